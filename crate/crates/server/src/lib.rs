//! HTTP service for the world-building editor, the `/v1` generation
//! protocol server, and the offline tooling built on them.

pub mod analyze;
pub mod backend_server;
pub mod error;
pub mod replay;
pub mod routes;
pub mod service;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use worldsmith_core::backend::Backend;

pub use service::{Service, ServiceConfig};

/// A server running on a background runtime. Dropping it stops the server.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves `router` on a dedicated runtime thread.
pub fn spawn(router: Router, addr: SocketAddr) -> std::io::Result<RunningServer> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            let _ = axum::serve(listener, router)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(RunningServer { addr, shutdown: Some(tx), thread: Some(thread) })
}

/// Runs a session server on an ephemeral local port.
pub fn spawn_service(service: Arc<Service>) -> std::io::Result<RunningServer> {
    spawn(routes::router(service), ([127, 0, 0, 1], 0).into())
}

/// Runs a `/v1` protocol server over `backend` on an ephemeral local port.
pub fn spawn_backend(backend: Arc<dyn Backend>) -> std::io::Result<RunningServer> {
    spawn(backend_server::router(backend), ([127, 0, 0, 1], 0).into())
}
