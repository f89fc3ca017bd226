//! Global composition: pasting tiles onto the canvas, the feathered blend
//! mask, and the plan handed to the backend for a `blend` request.

use serde::Serialize;
use thiserror::Error;

use crate::model::{TileId, TileRect, WorldSession};
use crate::raster::{Plane, Rgb, RgbImage, Size};
use crate::store::ImageSource;

pub const COMPOSITE_BACKGROUND: Rgb = [128, 128, 128];
pub const THUMBNAIL_SIZE: Size = Size::new(96, 96);

#[derive(Debug, Error, PartialEq)]
pub enum CompositeError {
    #[error("tile `{0}` has no current image")]
    MissingImage(TileId),
    #[error("image for tile `{0}` is not in the image store")]
    UnresolvedImage(TileId),
    #[error("blur sigma must be a non-negative number, got {0}")]
    NegativeSigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resample {
    #[default]
    Bilinear,
    Nearest,
}

/// Resamples with pixel-center alignment and edge clamping. Same-size
/// resampling is the identity in both modes.
pub fn resample(src: &RgbImage, width: u32, height: u32, mode: Resample) -> RgbImage {
    if src.size() == Size::new(width, height) {
        return src.clone();
    }
    let (sw, sh) = (src.width(), src.height());
    let (rx, ry) = (sw as f64 / width as f64, sh as f64 / height as f64);
    let mut out = RgbImage::filled(width, height, [0, 0, 0]);
    for dy in 0..height {
        for dx in 0..width {
            let px = match mode {
                Resample::Nearest => {
                    let sx = (((dx as f64 + 0.5) * rx).floor() as u32).min(sw - 1);
                    let sy = (((dy as f64 + 0.5) * ry).floor() as u32).min(sh - 1);
                    src.get(sx, sy)
                }
                Resample::Bilinear => {
                    let sx = ((dx as f64 + 0.5) * rx - 0.5).clamp(0.0, (sw - 1) as f64);
                    let sy = ((dy as f64 + 0.5) * ry - 0.5).clamp(0.0, (sh - 1) as f64);
                    let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
                    let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
                    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                    let (a, b, c, d) = (src.get(x0, y0), src.get(x1, y0), src.get(x0, y1), src.get(x1, y1));
                    std::array::from_fn(|ch| {
                        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
                        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
                        (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
                    })
                }
            };
            out.put(dx, dy, px);
        }
    }
    out
}

pub fn thumbnail(image: &RgbImage) -> RgbImage {
    resample(image, THUMBNAIL_SIZE.width, THUMBNAIL_SIZE.height, Resample::Bilinear)
}

/// Pastes images into their rects in order; later entries cover earlier ones.
pub fn paste_all(canvas: Size, layers: &[(TileRect, &RgbImage)], mode: Resample) -> RgbImage {
    let mut out = RgbImage::filled(canvas.width, canvas.height, COMPOSITE_BACKGROUND);
    for (rect, image) in layers {
        let scaled = resample(image, rect.w, rect.h, mode);
        for y in 0..rect.h {
            for x in 0..rect.w {
                let (cx, cy) = (rect.x + x, rect.y + y);
                if cx < canvas.width && cy < canvas.height {
                    out.put(cx, cy, scaled.get(x, y));
                }
            }
        }
    }
    out
}

fn tile_images(session: &WorldSession, images: &dyn ImageSource) -> Result<Vec<std::sync::Arc<RgbImage>>, CompositeError> {
    session
        .tiles
        .iter()
        .map(|t| {
            let r = t.current_image.as_ref().ok_or_else(|| CompositeError::MissingImage(t.tile_id.clone()))?;
            images.load_image(&r.image_id).ok_or_else(|| CompositeError::UnresolvedImage(t.tile_id.clone()))
        })
        .collect()
}

pub fn composite_tiles(session: &WorldSession, images: &dyn ImageSource, mode: Resample) -> Result<RgbImage, CompositeError> {
    let imgs = tile_images(session, images)?;
    let layers: Vec<_> = session.tiles.iter().zip(&imgs).map(|(t, i)| (t.rect, i.as_ref())).collect();
    Ok(paste_all(session.canvas_size, &layers, mode))
}

/// 0 inside any rect, 1 elsewhere.
pub fn rect_mask(size: Size, rects: &[TileRect]) -> Plane {
    let mut plane = Plane::filled(size.width, size.height, 1.0);
    for r in rects {
        for y in r.y..(r.y + r.h).min(size.height) {
            for x in r.x..(r.x + r.w).min(size.width) {
                plane.set(x, y, 0.0);
            }
        }
    }
    plane
}

pub fn build_blend_mask(session: &WorldSession) -> Plane {
    let rects: Vec<_> = session.tiles.iter().map(|t| t.rect).collect();
    rect_mask(session.canvas_size, &rects)
}

/// Normalized discrete Gaussian of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders. The summation order
/// per output pixel is fixed, so results are bit-stable. Outputs are clamped
/// to the input's value range to absorb rounding at the ulp level.
pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Result<Plane, CompositeError> {
    if sigma.is_nan() || sigma < 0.0 || sigma.is_infinite() {
        return Err(CompositeError::NegativeSigma(sigma));
    }
    if sigma == 0.0 || plane.values().is_empty() {
        return Ok(plane.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let src = plane.values();

    let mut horizontal = vec![0.0; src.len()];
    for y in 0..h {
        let row = &src[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sx = (x + k as i64 - radius).clamp(0, w - 1);
                acc += weight * row[sx as usize];
            }
            horizontal[(y * w + x) as usize] = acc;
        }
    }

    let (lo, hi) = plane.min_max().expect("non-empty");
    let mut out = plane.clone();
    let dst = out.values_mut();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sy = (y + k as i64 - radius).clamp(0, h - 1);
                acc += weight * horizontal[(sy * w + x) as usize];
            }
            dst[(y * w + x) as usize] = acc.clamp(lo, hi);
        }
    }
    Ok(out)
}

/// Feather width scales with the space being filled: gap / 4, kept in [1, 32].
pub fn default_blur_sigma(grid_gap: u32) -> f64 {
    (grid_gap as f64 / 4.0).clamp(1.0, 32.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacedTile {
    pub tile_id: TileId,
    pub rect: TileRect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendPlan {
    pub base_image: RgbImage,
    /// Blurred; 1 means synthesize, 0 means keep tile content.
    pub blend_mask: Plane,
    pub prompt: String,
    pub blur_sigma: f64,
    /// Tile rects in plan coordinates, i.e. the exact zero regions before blur.
    pub tiles: Vec<PlacedTile>,
    /// Canvas-to-plan scale factor (1 when no downscaling was needed).
    pub scale: f64,
}

impl BlendPlan {
    pub fn size(&self) -> Size {
        self.base_image.size()
    }
}

fn scale_rect(rect: TileRect, scale: f64, offset: (u32, u32), bounds: Size) -> TileRect {
    let edge = |v: u32| (v as f64 * scale).round() as u32;
    let x0 = (offset.0 + edge(rect.x)).min(bounds.width - 1);
    let y0 = (offset.1 + edge(rect.y)).min(bounds.height - 1);
    let x1 = (offset.0 + edge(rect.x + rect.w)).clamp(x0 + 1, bounds.width);
    let y1 = (offset.1 + edge(rect.y + rect.h)).clamp(y0 + 1, bounds.height);
    TileRect::new(x0, y0, x1 - x0, y1 - y0)
}

/// Builds the blend request payload. Canvases larger than the generation
/// resolution are scaled down with aspect preserved; the letterbox bands
/// count as empty space. `blur_sigma` is in plan pixels and defaults to
/// [`default_blur_sigma`] of the session's grid gap.
pub fn make_blend_plan(
    session: &WorldSession,
    images: &dyn ImageSource,
    blur_sigma: Option<f64>,
    mode: Resample,
) -> Result<BlendPlan, CompositeError> {
    let sigma = blur_sigma.unwrap_or_else(|| default_blur_sigma(session.grid_gap));
    if sigma.is_nan() || sigma < 0.0 {
        return Err(CompositeError::NegativeSigma(sigma));
    }
    let imgs = tile_images(session, images)?;
    let canvas = session.canvas_size;
    let res = session.generation_resolution;
    let scale = (res.width as f64 / canvas.width as f64).min(res.height as f64 / canvas.height as f64).min(1.0);

    let (plan_size, offset) = if scale < 1.0 {
        let cw = ((canvas.width as f64 * scale).round() as u32).clamp(1, res.width);
        let ch = ((canvas.height as f64 * scale).round() as u32).clamp(1, res.height);
        (res, ((res.width - cw) / 2, (res.height - ch) / 2))
    } else {
        (canvas, (0, 0))
    };

    let tiles: Vec<PlacedTile> = session
        .tiles
        .iter()
        .map(|t| PlacedTile {
            tile_id: t.tile_id.clone(),
            rect: if scale < 1.0 { scale_rect(t.rect, scale, offset, plan_size) } else { t.rect },
        })
        .collect();
    let layers: Vec<_> = tiles.iter().zip(&imgs).map(|(p, i)| (p.rect, i.as_ref())).collect();
    let base_image = paste_all(plan_size, &layers, mode);
    let rects: Vec<_> = tiles.iter().map(|p| p.rect).collect();
    let blend_mask = gaussian_blur(&rect_mask(plan_size, &rects), sigma)?;
    Ok(BlendPlan { base_image, blend_mask, prompt: session.global_blend_prompt.clone(), blur_sigma: sigma, tiles, scale })
}
