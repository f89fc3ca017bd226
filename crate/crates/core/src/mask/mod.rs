//! Brush geometry to binary masks, composed segmentations, and back.

pub mod hull;
pub mod rasterize;
pub mod segmentation;

pub use hull::{convex_hull, hull_contains, EmptyHull, IPoint};
pub use rasterize::{fill_polygon, rasterize_action, rasterize_hull, rasterize_lasso, rasterize_pencil, rasterize_region};
pub use segmentation::{compose_segmentation, extract_binary_masks, ExtractedMask, PaletteEntry, Segmentation};

use thiserror::Error;

use crate::model::{Brush, BrushAction, Point};
use crate::raster::Rgb;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("lasso needs at least 3 points, got {0}")]
    LassoTooShort(usize),
    #[error("duplicate region color {0:?}")]
    DuplicateColor(Rgb),
    #[error("region color (0,0,0) is reserved for background")]
    BlackRegion,
    #[error("pixel ({x},{y}) has color {color:?} which is not in the palette")]
    UnknownColor { color: Rgb, x: u32, y: u32 },
}

/// Records brush input for one region.
///
/// Pencil and lasso produce one action per stroke. The hull brush keeps
/// growing a single action across strokes until another brush is selected.
#[derive(Debug, Default)]
pub struct RegionPainter {
    actions: Vec<BrushAction>,
    current: Option<BrushAction>,
}

impl RegionPainter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a stroke. Continuing with the hull brush reuses the open hull.
    pub fn begin_stroke(&mut self, brush: Brush, stroke_width: u32) {
        match &self.current {
            Some(open) if open.brush == Brush::Hull && brush == Brush::Hull => {}
            _ => {
                self.finish();
                self.current = Some(BrushAction { brush, points: Vec::new(), stroke_width });
            }
        }
    }

    pub fn add_point(&mut self, p: Point) {
        if let Some(action) = &mut self.current {
            action.points.push(p);
        }
    }

    /// Ends a stroke. Hull actions stay open for further strokes.
    pub fn end_stroke(&mut self) {
        if matches!(&self.current, Some(a) if a.brush != Brush::Hull) {
            self.finish();
        }
    }

    fn finish(&mut self) {
        if let Some(action) = self.current.take() {
            if action.validate().is_ok() {
                self.actions.push(action);
            }
        }
    }

    pub fn into_actions(mut self) -> Vec<BrushAction> {
        self.finish();
        self.actions
    }
}
