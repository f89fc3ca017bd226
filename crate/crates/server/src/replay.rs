//! Rebuilds a session on a server by re-issuing the API calls implied by
//! its event log, then compares the result with the original.
//!
//! Generations replay with their logged seeds, so on a deterministic
//! backend the replayed trees and blend results match exactly.

use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};
use thiserror::Error;
use worldsmith_core::model::SessionConfig;
use worldsmith_core::telemetry::{EventKind, InteractionEvent};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("{method} {path} returned {status}: {body}")]
    Status { method: &'static str, path: String, status: u16, body: Value },
    #[error("event {event_id}: {message}")]
    Event { event_id: u64, message: String },
    #[error("job {0} did not finish")]
    JobTimeout(String),
    #[error("job {job_id} failed: {message}")]
    JobFailed { job_id: String, message: String },
    #[error("replayed session differs: {0}")]
    Mismatch(String),
}

/// Minimal JSON client for the session API.
pub struct ApiClient {
    base: String,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base: base_url.into().trim_end_matches('/').to_owned(), agent }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn finish(
        &self,
        method: &'static str,
        path: &str,
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<(u16, Vec<u8>), ReplayError> {
        let url = format!("{}{path}", self.base);
        let transport = |e: ureq::Error| ReplayError::Transport { url: url.clone(), message: format!("{method}: {e}") };
        let resp = resp.map_err(transport)?;
        let status = resp.status().as_u16();
        let bytes = resp.into_body().with_config().limit(512 << 20).read_to_vec().map_err(transport)?;
        Ok((status, bytes))
    }

    fn json(status: u16, bytes: &[u8]) -> (u16, Value) {
        (status, serde_json::from_slice(bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(bytes).into())))
    }

    pub fn get_raw(&self, path: &str) -> Result<(u16, Vec<u8>), ReplayError> {
        let resp = self.agent.get(format!("{}{path}", self.base)).call();
        self.finish("GET", path, resp)
    }

    pub fn get(&self, path: &str) -> Result<(u16, Value), ReplayError> {
        let (s, b) = self.get_raw(path)?;
        Ok(Self::json(s, &b))
    }

    pub fn send(&self, method: &'static str, path: &str, body: &Value) -> Result<(u16, Value), ReplayError> {
        let url = format!("{}{path}", self.base);
        let bytes = serde_json::to_vec(body).expect("serializable");
        let resp = match method {
            "POST" => self.agent.post(&url).header("content-type", "application/json").send(&bytes[..]),
            "PUT" => self.agent.put(&url).header("content-type", "application/json").send(&bytes[..]),
            "PATCH" => self.agent.patch(&url).header("content-type", "application/json").send(&bytes[..]),
            other => panic!("unsupported method {other}"),
        };
        let (s, b) = self.finish(method, path, resp)?;
        Ok(Self::json(s, &b))
    }

    /// Like [`send`](Self::send) but treats any non-2xx status as an error.
    pub fn expect(&self, method: &'static str, path: &str, body: &Value) -> Result<Value, ReplayError> {
        match self.send(method, path, body)? {
            (s, v) if (200..300).contains(&s) => Ok(v),
            (status, body) => Err(ReplayError::Status { method, path: path.to_owned(), status, body }),
        }
    }

    pub fn expect_get(&self, path: &str) -> Result<Value, ReplayError> {
        match self.get(path)? {
            (s, v) if (200..300).contains(&s) => Ok(v),
            (status, body) => Err(ReplayError::Status { method: "GET", path: path.to_owned(), status, body }),
        }
    }

    /// Polls a job until it is done; failures and timeouts are errors.
    pub fn wait_job(&self, job_id: &str, timeout: Duration) -> Result<Value, ReplayError> {
        let deadline = Instant::now() + timeout;
        let mut delay = Duration::from_millis(2);
        loop {
            let job = self.expect_get(&format!("/jobs/{job_id}"))?;
            match job["state"].as_str() {
                Some("done") => return Ok(job),
                Some("failed") => {
                    let message = job["error"].as_str().unwrap_or_default().to_owned();
                    return Err(ReplayError::JobFailed { job_id: job_id.to_owned(), message });
                }
                _ if Instant::now() >= deadline => return Err(ReplayError::JobTimeout(job_id.to_owned())),
                _ => std::thread::sleep(delay),
            }
            delay = (delay * 2).min(Duration::from_millis(50));
        }
    }

    pub fn create_session(&self, config: &SessionConfig) -> Result<Value, ReplayError> {
        self.expect("POST", "/sessions", &serde_json::to_value(config).expect("serializable"))
    }

    pub fn session(&self, sid: &str) -> Result<Value, ReplayError> {
        self.expect_get(&format!("/sessions/{sid}"))
    }

    pub fn version(&self, sid: &str) -> Result<u64, ReplayError> {
        Ok(self.session(sid)?["version"].as_u64().unwrap_or_default())
    }

    pub fn events(&self, sid: &str) -> Result<Vec<u8>, ReplayError> {
        match self.get_raw(&format!("/sessions/{sid}/events"))? {
            (200, b) => Ok(b),
            (status, b) => {
                let (_, body) = Self::json(status, &b);
                Err(ReplayError::Status { method: "GET", path: format!("/sessions/{sid}/events"), status, body })
            }
        }
    }
}

/// Creation parameters of an existing session, as returned by `GET /sessions/{sid}`.
pub fn config_of(session_state: &Value) -> SessionConfig {
    let s = &session_state["session"];
    SessionConfig {
        canvas_size: serde_json::from_value(s["canvas_size"].clone()).ok(),
        tile_count: s["tiles"].as_array().map(|t| t.len() as u32),
        generation_resolution: serde_json::from_value(s["generation_resolution"].clone()).ok(),
        grid_gap: s["grid_gap"].as_u64().map(|g| g as u32),
    }
}

fn pick(payload: &Value, keys: &[&str]) -> Map<String, Value> {
    keys.iter().filter_map(|k| payload.get(*k).map(|v| ((*k).to_owned(), v.clone()))).collect()
}

/// Replays `events` into a new session on `client` and returns its id.
pub fn replay(
    client: &ApiClient,
    config: &SessionConfig,
    events: &[InteractionEvent],
    job_timeout: Duration,
) -> Result<String, ReplayError> {
    let created = client.create_session(config)?;
    let sid = created["session_id"].as_str().expect("session id").to_owned();
    let s = format!("/sessions/{sid}");
    for e in events {
        let p = &e.payload;
        let tile = || {
            e.tile_id.as_ref().map(|t| format!("{s}/tiles/{t}")).ok_or_else(|| ReplayError::Event {
                event_id: e.event_id,
                message: format!("{} event without tile", e.kind),
            })
        };
        let inputs_patch = |keys: &[&str]| -> Result<(), ReplayError> {
            let mut body = pick(p, keys);
            body.insert("expected_version".into(), json!(client.version(&sid)?));
            client.expect("PATCH", &format!("{}/inputs", tile()?), &Value::Object(body)).map(drop)
        };
        match e.kind {
            EventKind::ModifyText if p.get("blend_prompt").is_some() => {
                client.expect("PUT", &format!("{s}/blend-prompt"), &json!({ "prompt": p["blend_prompt"] }))?;
            }
            EventKind::ModifyText => inputs_patch(&["scene_prompt", "seed", "img2img_strength"])?,
            EventKind::ModifyRegion => inputs_patch(&["regions"])?,
            EventKind::ModifySketch => inputs_patch(&["sketch", "base_image"])?,
            EventKind::ModifyTile if p.get("rect").is_some() => {
                client.expect("PATCH", &format!("{}/rect", tile()?), &p["rect"])?;
            }
            EventKind::ModifyTile if p.get("grid_gap").is_some() => {
                client.expect("PUT", &format!("{s}/grid-gap"), &json!({ "grid_gap": p["grid_gap"] }))?;
            }
            EventKind::ModifyTile => {
                let image_id = p["current_image"].get("image_id").cloned().unwrap_or(Value::Null);
                client.expect("PUT", &format!("{}/current-image", tile()?), &json!({ "image_id": image_id }))?;
            }
            EventKind::RunDiffusion => {
                let job = client.expect("POST", &format!("{}/generate", tile()?), &Value::Object(pick(p, &["seed", "count"])))?;
                client.wait_job(job["job_id"].as_str().unwrap_or_default(), job_timeout)?;
            }
            EventKind::Blend => {
                let job = client.expect("POST", &format!("{s}/blend"), &Value::Object(pick(p, &["seed", "count", "blur_sigma"])))?;
                client.wait_job(job["job_id"].as_str().unwrap_or_default(), job_timeout)?;
            }
            EventKind::TreeSelect => {
                client.expect("POST", &format!("{}/tree/select", tile()?), &Value::Object(pick(p, &["node_id"])))?;
            }
            EventKind::TreeAdd => {
                client.expect("POST", &format!("{}/tree/nodes", tile()?), &Value::Object(pick(p, &["at", "mode"])))?;
            }
        }
    }
    Ok(sid)
}

fn strip(v: &mut Value, keys: &[&str]) {
    if let Value::Object(m) = v {
        for k in keys {
            m.remove(*k);
        }
    }
}

/// Session content that must survive replay: everything except ids,
/// timestamps and job handles.
pub fn fingerprint(client: &ApiClient, sid: &str) -> Result<Value, ReplayError> {
    let state = client.session(sid)?;
    let mut session = state["session"].clone();
    strip(&mut session, &["session_id", "created_at"]);
    let mut trees = Map::new();
    for t in state["session"]["tiles"].as_array().into_iter().flatten() {
        let tid = t["tile_id"].as_str().unwrap_or_default();
        let mut tree = client.expect_get(&format!("/sessions/{sid}/tiles/{tid}/tree"))?;
        for n in tree["nodes"].as_array_mut().into_iter().flatten() {
            strip(n, &["created_at"]);
        }
        trees.insert(tid.to_owned(), tree);
    }
    let mut blends = state["blends"].clone();
    for b in blends.as_array_mut().into_iter().flatten() {
        strip(b, &["job_id", "created_at"]);
    }
    Ok(json!({ "session": session, "trees": trees, "blends": blends }))
}

/// First JSON path at which two values differ.
pub fn first_difference(a: &Value, b: &Value, path: &str) -> Option<String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let keys: std::collections::BTreeSet<&String> = x.keys().chain(y.keys()).collect();
            keys.into_iter().find_map(|k| {
                first_difference(x.get(k).unwrap_or(&Value::Null), y.get(k).unwrap_or(&Value::Null), &format!("{path}.{k}"))
            })
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).enumerate().find_map(|(i, (p, q))| first_difference(p, q, &format!("{path}[{i}]")))
        }
        _ if a == b => None,
        _ => Some(format!("{path}: {a} != {b}")),
    }
}

/// Compares two sessions, possibly on different servers.
pub fn compare_sessions(a: (&ApiClient, &str), b: (&ApiClient, &str)) -> Result<(), ReplayError> {
    let (fa, fb) = (fingerprint(a.0, a.1)?, fingerprint(b.0, b.1)?);
    match first_difference(&fa, &fb, "$") {
        None => Ok(()),
        Some(d) => Err(ReplayError::Mismatch(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_reports_path() {
        let a = json!({ "x": [1, { "y": 2 }], "z": 0 });
        let b = json!({ "x": [1, { "y": 3 }], "z": 0 });
        assert_eq!(first_difference(&a, &b, "$").unwrap(), "$.x[1].y: 2 != 3");
        assert_eq!(first_difference(&a, &a, "$"), None);
    }
}
