#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use worldsmith_core::backend::{Backend, MockBackend};
use worldsmith_core::telemetry::SyncPolicy;
use worldsmith_server::replay::ApiClient;
use worldsmith_server::{spawn_service, RunningServer, Service, ServiceConfig};

pub const WAIT: Duration = Duration::from_secs(60);

pub struct Harness {
    pub server: RunningServer,
    pub client: ApiClient,
    pub service: Arc<Service>,
}

pub fn config(dir: &std::path::Path) -> ServiceConfig {
    ServiceConfig { sync: SyncPolicy::Never, ..ServiceConfig::new(dir) }
}

pub fn start_with(config: ServiceConfig, backend: Arc<dyn Backend>) -> Harness {
    let service = Service::open(config, backend).unwrap();
    let server = spawn_service(service.clone()).unwrap();
    let client = ApiClient::new(server.url());
    Harness { server, client, service }
}

pub fn start(dir: &std::path::Path) -> (Harness, MockBackend) {
    let mock = MockBackend::new();
    (start_with(config(dir), Arc::new(mock.clone())), mock)
}

/// A small session so generations stay fast.
pub fn small_session(client: &ApiClient) -> String {
    let s = client
        .create_session(&serde_json::from_value(json!({
            "canvas_size": { "width": 128, "height": 128 },
            "generation_resolution": { "width": 32, "height": 32 },
            "grid_gap": 8
        }))
        .unwrap())
        .unwrap();
    s["session_id"].as_str().unwrap().to_owned()
}

pub fn patch_inputs(client: &ApiClient, sid: &str, tile: &str, mut body: Value) -> Value {
    body["expected_version"] = json!(client.version(sid).unwrap());
    client.expect("PATCH", &format!("/sessions/{sid}/tiles/{tile}/inputs"), &body).unwrap()
}

pub fn generate(client: &ApiClient, sid: &str, tile: &str, body: Value) -> Value {
    let job = client.expect("POST", &format!("/sessions/{sid}/tiles/{tile}/generate"), &body).unwrap();
    client.wait_job(job["job_id"].as_str().unwrap(), WAIT).unwrap()
}

pub fn tree(client: &ApiClient, sid: &str, tile: &str) -> Value {
    client.expect_get(&format!("/sessions/{sid}/tiles/{tile}/tree")).unwrap()
}

pub fn region(id: &str, color: [u8; 3], text: &str, x: f64, y: f64, side: f64) -> Value {
    json!({
        "region_id": id,
        "color": color,
        "description": text,
        "geometry": [{ "brush": "hull", "points": [
            { "x": x, "y": y }, { "x": x + side, "y": y }, { "x": x + side, "y": y + side }, { "x": x, "y": y + side }
        ] }]
    })
}
