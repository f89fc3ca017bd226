//! Client for a remote backend speaking the `/v1` protocol.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use ureq::Agent;

use super::job::{BackendDescriptor, GenerationJob, JobId, JobState};
use super::wire::{decode_job_images, encode_request, JobCreated, WireHealth, WireJob};
use super::{Backend, BackendError, GenerationRequest};

/// Upper bound on response bodies; a full batch of large PNGs is well below it.
const MAX_BODY: u64 = 512 << 20;

pub struct HttpBackend {
    base: String,
    agent: Agent,
    health: Mutex<Option<WireHealth>>,
    digests: Mutex<std::collections::HashMap<JobId, u64>>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self {
            base: base_url.into().trim_end_matches('/').to_owned(),
            agent,
            health: Mutex::new(None),
            digests: Mutex::new(Default::default()),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn read(resp: ureq::http::Response<ureq::Body>) -> Result<(u16, Vec<u8>), BackendError> {
        let status = resp.status().as_u16();
        let mut body = resp.into_body();
        let bytes = body.with_config().limit(MAX_BODY).read_to_vec().map_err(|e| BackendError::Unreachable(e.to_string()))?;
        Ok((status, bytes))
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<(u16, Result<T, String>), BackendError> {
        let resp = self.agent.get(&self.url(path)).call().map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let (status, bytes) = Self::read(resp)?;
        if !(200..300).contains(&status) {
            return Ok((status, Err(String::from_utf8_lossy(&bytes).into_owned())));
        }
        let parsed = serde_json::from_slice(&bytes).map_err(|e| BackendError::Protocol(e.to_string()))?;
        Ok((status, Ok(parsed)))
    }

    /// Fetches `/v1/health`, caching the answer on success.
    pub fn health(&self) -> Result<WireHealth, BackendError> {
        match self.get_json::<WireHealth>("/v1/health")? {
            (_, Ok(h)) => {
                *self.health.lock().unwrap() = Some(h.clone());
                Ok(h)
            }
            (status, Err(body)) => Err(BackendError::Protocol(format!("health returned {status}: {body}"))),
        }
    }
}

impl Backend for HttpBackend {
    fn descriptor(&self) -> BackendDescriptor {
        let cached = self.health.lock().unwrap().clone();
        let (health, healthy) = match cached {
            Some(h) => (Some(h), true),
            None => match self.health() {
                Ok(h) => (Some(h), true),
                Err(_) => (None, false),
            },
        };
        BackendDescriptor {
            name: health.as_ref().map(|h| h.name.clone()).unwrap_or_default(),
            endpoint: self.base.clone(),
            kinds: health.as_ref().map(|h| h.kinds.clone()).unwrap_or_default(),
            max_resolution: health.map(|h| h.max_resolution).unwrap_or(crate::raster::Size::new(0, 0)),
            healthy,
        }
    }

    fn enqueue(&self, request: GenerationRequest, digest: u64) -> Result<JobId, BackendError> {
        let body = serde_json::to_vec(&encode_request(&request)).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let resp = self
            .agent
            .post(&self.url("/v1/generate"))
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let (status, bytes) = Self::read(resp)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Rejected { status, message: String::from_utf8_lossy(&bytes).into_owned() });
        }
        let created: JobCreated = serde_json::from_slice(&bytes).map_err(|e| BackendError::Protocol(e.to_string()))?;
        self.digests.lock().unwrap().insert(created.job_id.clone(), digest);
        Ok(created.job_id)
    }

    fn poll(&self, job_id: &JobId) -> Result<GenerationJob, BackendError> {
        let wire: WireJob = match self.get_json(&format!("/v1/jobs/{}", job_id.0))? {
            (_, Ok(w)) => w,
            (404, Err(_)) => return Err(BackendError::UnknownJob(job_id.clone())),
            (status, Err(body)) => return Err(BackendError::Protocol(format!("job poll returned {status}: {body}"))),
        };
        let images = decode_job_images(&wire).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let digest = self.digests.lock().unwrap().get(job_id).copied().unwrap_or_default();
        Ok(GenerationJob {
            job_id: job_id.clone(),
            request_digest: digest,
            state: wire.state,
            images: if wire.state == JobState::Done { images.into_iter().map(Arc::new).collect() } else { Vec::new() },
            error: wire.error,
            timings: Default::default(),
        })
    }
}
