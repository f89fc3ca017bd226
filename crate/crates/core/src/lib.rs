//! Engine for tiled, iterative world-image generation.
//!
//! A [`model::WorldSession`] owns a grid of tiles. Each tile carries working
//! [`model::GenerationInputs`] (scene text, painted regions, a sketch layer)
//! and a branching [`tree::TileTree`] of past generations. Inputs become
//! [`backend::GenerationRequest`]s for a pluggable backend; the
//! [`compositor`] turns the tiles into a blend request; every user action
//! lands in the [`telemetry`] log.

pub mod backend;
pub mod canonical;
pub mod compositor;
pub mod mask;
pub mod model;
pub mod persist;
pub mod raster;
pub mod store;
pub mod telemetry;
pub mod tree;

use std::time::{SystemTime, UNIX_EPOCH};

/// Wall clock in milliseconds since the Unix epoch.
pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}
