//! Generation backends: request model, `/v1` wire format, job lifecycle,
//! the deterministic mock, and the HTTP client.

pub mod client;
pub mod job;
pub mod mock;
pub mod request;
pub mod wire;

use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use client::HttpBackend;
pub use job::{BackendDescriptor, GenerationJob, JobId, JobState, JobTimings};
pub use mock::{mock_generate, region_color, MockBackend};
pub use request::{
    infer_kind, request_from_blend_plan, request_from_inputs, BuildError, GenerationKind, GenerationRequest,
    RegionPrompt, RequestError, DEFAULT_BATCH_COUNT,
};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    Invalid(#[from] RequestError),
    #[error("backend does not support {0} requests")]
    UnsupportedKind(GenerationKind),
    #[error("resolution {found} exceeds backend maximum {max}")]
    ResolutionTooLarge { found: crate::raster::Size, max: crate::raster::Size },
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend rejected request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("unknown job `{0}`")]
    UnknownJob(JobId),
    #[error("job `{0}` did not finish in time")]
    Timeout(JobId),
}

pub trait Backend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;
    /// Queues an already validated request. Implementations never deduplicate.
    fn enqueue(&self, request: GenerationRequest, digest: u64) -> Result<JobId, BackendError>;
    fn poll(&self, job_id: &JobId) -> Result<GenerationJob, BackendError>;
}

/// Validates, checks backend capabilities, digests, and enqueues.
pub fn submit(backend: &dyn Backend, request: GenerationRequest) -> Result<JobId, BackendError> {
    request.validate()?;
    let desc = backend.descriptor();
    if !desc.healthy {
        return Err(BackendError::Unreachable(desc.endpoint));
    }
    if !desc.supports(request.kind) {
        return Err(BackendError::UnsupportedKind(request.kind));
    }
    let (r, max) = (request.resolution, desc.max_resolution);
    if r.width > max.width || r.height > max.height {
        return Err(BackendError::ResolutionTooLarge { found: r, max });
    }
    let digest = request.digest();
    backend.enqueue(request, digest)
}

/// Polls until the job reaches `done` or `failed`.
pub fn wait_for_job(backend: &dyn Backend, job_id: &JobId, timeout: Duration) -> Result<GenerationJob, BackendError> {
    let deadline = Instant::now() + timeout;
    let mut delay = Duration::from_millis(2);
    loop {
        let job = backend.poll(job_id)?;
        if job.state.is_terminal() {
            return Ok(job);
        }
        if Instant::now() >= deadline {
            return Err(BackendError::Timeout(job_id.clone()));
        }
        thread::sleep(delay);
        delay = (delay * 2).min(Duration::from_millis(100));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{RgbImage, Size};

    const RES: Size = Size::new(16, 16);
    const WAIT: Duration = Duration::from_secs(10);

    #[test]
    fn submit_rejects_invalid_requests() {
        let backend = MockBackend::new();
        let mut req = GenerationRequest::text2img("x", 0, RES);
        req.init_image = Some(RgbImage::filled(16, 16, [0; 3]));
        assert!(matches!(submit(&backend, req), Err(BackendError::Invalid(RequestError::Text2imgWithInitImage))));
        let big = GenerationRequest::text2img("x", 0, Size::new(4096, 16));
        assert!(matches!(submit(&backend, big), Err(BackendError::ResolutionTooLarge { .. })));
    }

    #[test]
    fn identical_requests_get_distinct_jobs() {
        let backend = MockBackend::new();
        let req = GenerationRequest { count: 2, ..GenerationRequest::text2img("x", 0, RES) };
        let a = submit(&backend, req.clone()).unwrap();
        let b = submit(&backend, req.clone()).unwrap();
        assert_ne!(a, b);
        let (ja, jb) = (wait_for_job(&backend, &a, WAIT).unwrap(), wait_for_job(&backend, &b, WAIT).unwrap());
        assert_eq!(ja.request_digest, req.digest());
        assert_eq!(ja.request_digest, jb.request_digest);
        assert_eq!(ja.images, jb.images);
        assert_eq!(ja.images.len(), 2);
    }

    #[test]
    fn paused_jobs_stay_queued() {
        let backend = MockBackend::new();
        backend.pause();
        let id = submit(&backend, GenerationRequest::text2img("x", 0, RES)).unwrap();
        let job = backend.poll(&id).unwrap();
        assert_eq!(job.state, JobState::Queued);
        assert!(job.images.is_empty());
        backend.resume();
        let job = wait_for_job(&backend, &id, WAIT).unwrap();
        assert_eq!(job.state, JobState::Done);
        assert_eq!(job.images.len(), DEFAULT_BATCH_COUNT as usize);
    }

    #[test]
    fn failure_text_is_preserved() {
        let backend = MockBackend::new();
        backend.fail_next("CUDA out of memory: tried to allocate 2.00 GiB");
        let id = submit(&backend, GenerationRequest::text2img("x", 0, RES)).unwrap();
        let job = wait_for_job(&backend, &id, WAIT).unwrap();
        assert_eq!(job.state, JobState::Failed);
        assert_eq!(job.error.as_deref(), Some("CUDA out of memory: tried to allocate 2.00 GiB"));
        assert!(job.images.is_empty());
        assert!(matches!(backend.poll(&"nope".into()), Err(BackendError::UnknownJob(_))));
    }
}
