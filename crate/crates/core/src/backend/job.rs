use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::request::GenerationKind;
use crate::model::ImageRef;
use crate::raster::{RgbImage, Size};
use crate::store::image_ref_for;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub String);

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for JobId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Allowed moves: queued to running, running to done or failed.
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done) | (JobState::Running, JobState::Failed)
        )
    }
}

/// Milliseconds since the Unix epoch for each lifecycle step reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobTimings {
    pub queued_at: Option<u64>,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationJob {
    pub job_id: JobId,
    pub request_digest: u64,
    pub state: JobState,
    /// Present only once the job is done.
    pub images: Vec<Arc<RgbImage>>,
    pub error: Option<String>,
    pub timings: JobTimings,
}

impl GenerationJob {
    pub fn queued(job_id: JobId, request_digest: u64, now: u64) -> Self {
        Self {
            job_id,
            request_digest,
            state: JobState::Queued,
            images: Vec::new(),
            error: None,
            timings: JobTimings { queued_at: Some(now), ..JobTimings::default() },
        }
    }

    /// Applies a state change; illegal moves are ignored and reported as `false`.
    pub fn advance(&mut self, next: JobState, now: u64) -> bool {
        if !self.state.can_become(next) {
            return false;
        }
        self.state = next;
        match next {
            JobState::Running => self.timings.started_at = Some(now),
            _ => self.timings.finished_at = Some(now),
        }
        true
    }

    pub fn image_refs(&self) -> Vec<ImageRef> {
        self.images.iter().map(|i| image_ref_for(i).0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub endpoint: String,
    pub kinds: Vec<GenerationKind>,
    pub max_resolution: Size,
    pub healthy: bool,
}

impl BackendDescriptor {
    pub fn supports(&self, kind: GenerationKind) -> bool {
        self.kinds.contains(&kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_are_monotone() {
        let mut job = GenerationJob::queued("j".into(), 0, 1);
        assert!(!job.advance(JobState::Done, 2));
        assert!(job.advance(JobState::Running, 2));
        assert!(!job.advance(JobState::Queued, 3));
        assert!(job.advance(JobState::Failed, 3));
        assert!(!job.advance(JobState::Done, 4));
        assert_eq!(job.state, JobState::Failed);
        assert_eq!(job.timings, JobTimings { queued_at: Some(1), started_at: Some(2), finished_at: Some(3) });
    }
}
