use serde::{Deserialize, Serialize};

use crate::model::{RegionId, RegionSpec, BACKGROUND_COLOR};
use crate::raster::{BinaryMask, Rgb, RgbImage, Size};

use super::rasterize::rasterize_region;
use super::MaskError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub region_id: RegionId,
    pub color: Rgb,
    pub description: String,
}

/// Multi-color region raster; black is "no region". Palette is in paint order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pixels: RgbImage,
    palette: Vec<PaletteEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedMask {
    pub region_id: RegionId,
    pub description: String,
    pub mask: BinaryMask,
}

impl Segmentation {
    /// Validates that palette colors are unique, non-black, and cover every
    /// painted pixel.
    pub fn from_parts(pixels: RgbImage, palette: Vec<PaletteEntry>) -> Result<Self, MaskError> {
        check_palette(palette.iter().map(|p| p.color))?;
        for y in 0..pixels.height() {
            for x in 0..pixels.width() {
                let c = pixels.get(x, y);
                if c != BACKGROUND_COLOR && !palette.iter().any(|p| p.color == c) {
                    return Err(MaskError::UnknownColor { color: c, x, y });
                }
            }
        }
        Ok(Self { pixels, palette })
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }

    pub fn palette(&self) -> &[PaletteEntry] {
        &self.palette
    }

    pub fn size(&self) -> Size {
        self.pixels.size()
    }

    pub fn painted_count(&self) -> u64 {
        let (w, h) = (self.pixels.width(), self.pixels.height());
        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| self.pixels.get(x, y) != BACKGROUND_COLOR).count() as u64
    }

    pub fn palette_json(&self) -> String {
        serde_json::to_string(&self.palette).expect("palette serializes")
    }
}

fn check_palette(colors: impl Iterator<Item = Rgb>) -> Result<(), MaskError> {
    let mut seen = std::collections::HashSet::new();
    for c in colors {
        if c == BACKGROUND_COLOR {
            return Err(MaskError::BlackRegion);
        }
        if !seen.insert(c) {
            return Err(MaskError::DuplicateColor(c));
        }
    }
    Ok(())
}

/// Paints each region's mask in its color, in list order; later regions win
/// where they overlap earlier ones.
pub fn compose_segmentation(regions: &[RegionSpec], size: Size) -> Result<Segmentation, MaskError> {
    check_palette(regions.iter().map(|r| r.color))?;
    let mut pixels = RgbImage::filled(size.width, size.height, BACKGROUND_COLOR);
    let mut palette = Vec::with_capacity(regions.len());
    for region in regions {
        let mask = rasterize_region(region, size)?;
        for (x, y) in mask.iter_set() {
            pixels.put(x, y, region.color);
        }
        palette.push(PaletteEntry {
            region_id: region.region_id.clone(),
            color: region.color,
            description: region.description.clone(),
        });
    }
    Ok(Segmentation { pixels, palette })
}

/// One binary mask per palette entry: bit set iff the pixel has that color.
pub fn extract_binary_masks(segmentation: &Segmentation) -> Vec<ExtractedMask> {
    let size = segmentation.size();
    let mut masks: Vec<ExtractedMask> = segmentation
        .palette
        .iter()
        .map(|p| ExtractedMask { region_id: p.region_id.clone(), description: p.description.clone(), mask: BinaryMask::new(size) })
        .collect();
    for y in 0..size.height {
        for x in 0..size.width {
            let c = segmentation.pixels.get(x, y);
            if c == BACKGROUND_COLOR {
                continue;
            }
            if let Some(i) = segmentation.palette.iter().position(|p| p.color == c) {
                masks[i].mask.set(x, y, true);
            }
        }
    }
    masks
}
