use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{fnv1a64, FieldWriter, Payload};
use crate::compositor::{resample, BlendPlan, Resample};
use crate::mask::{compose_segmentation, extract_binary_masks, MaskError};
use crate::model::{GenerationInputs, TileId};
use crate::raster::{BinaryMask, GrayImage, RgbImage, Size};
use crate::store::ImageSource;

pub const DEFAULT_BATCH_COUNT: u32 = 12;
pub const MAX_BATCH_COUNT: u32 = 64;

const MAGIC: &[u8; 4] = b"WSRQ";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationKind {
    Text2img,
    Img2img,
    RegionGuided,
    Blend,
}

impl GenerationKind {
    pub const ALL: [GenerationKind; 4] =
        [GenerationKind::Text2img, GenerationKind::Img2img, GenerationKind::RegionGuided, GenerationKind::Blend];

    pub fn as_str(self) -> &'static str {
        match self {
            GenerationKind::Text2img => "text2img",
            GenerationKind::Img2img => "img2img",
            GenerationKind::RegionGuided => "region_guided",
            GenerationKind::Blend => "blend",
        }
    }

    fn code(self) -> u8 {
        match self {
            GenerationKind::Text2img => 0,
            GenerationKind::Img2img => 1,
            GenerationKind::RegionGuided => 2,
            GenerationKind::Blend => 3,
        }
    }
}

impl std::fmt::Display for GenerationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPrompt {
    pub mask: BinaryMask,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub kind: GenerationKind,
    pub prompt: String,
    pub regions: Vec<RegionPrompt>,
    pub init_image: Option<RgbImage>,
    pub mask_image: Option<GrayImage>,
    pub strength: Option<f64>,
    pub seed: u64,
    pub count: u32,
    pub resolution: Size,
}

#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("text2img requests must not carry an init_image")]
    Text2imgWithInitImage,
    #[error("img2img requests require an init_image")]
    Img2imgWithoutInitImage,
    #[error("region_guided requests require at least one region")]
    RegionGuidedWithoutRegions,
    #[error("blend requests require both init_image and mask_image")]
    BlendWithoutImages,
    #[error("mask_image is only valid for blend requests")]
    MaskImageOutsideBlend,
    #[error("strength must lie in [0, 1], got {0}")]
    Strength(f64),
    #[error("count must be in 1..={MAX_BATCH_COUNT}, got {0}")]
    Count(u32),
    #[error("resolution must be non-zero, got {0}")]
    Resolution(Size),
    #[error("{field} is {found} but the request resolution is {expected}")]
    Dimensions { field: String, found: Size, expected: Size },
}

impl GenerationRequest {
    pub fn text2img(prompt: impl Into<String>, seed: u64, resolution: Size) -> Self {
        Self {
            kind: GenerationKind::Text2img,
            prompt: prompt.into(),
            regions: Vec::new(),
            init_image: None,
            mask_image: None,
            strength: None,
            seed,
            count: DEFAULT_BATCH_COUNT,
            resolution,
        }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.resolution.width == 0 || self.resolution.height == 0 {
            return Err(RequestError::Resolution(self.resolution));
        }
        if self.count == 0 || self.count > MAX_BATCH_COUNT {
            return Err(RequestError::Count(self.count));
        }
        match self.kind {
            GenerationKind::Text2img if self.init_image.is_some() => return Err(RequestError::Text2imgWithInitImage),
            GenerationKind::Img2img if self.init_image.is_none() => return Err(RequestError::Img2imgWithoutInitImage),
            GenerationKind::RegionGuided if self.regions.is_empty() => {
                return Err(RequestError::RegionGuidedWithoutRegions)
            }
            GenerationKind::Blend if self.init_image.is_none() || self.mask_image.is_none() => {
                return Err(RequestError::BlendWithoutImages)
            }
            _ => {}
        }
        if self.kind != GenerationKind::Blend && self.mask_image.is_some() {
            return Err(RequestError::MaskImageOutsideBlend);
        }
        if let Some(s) = self.strength {
            if !(0.0..=1.0).contains(&s) {
                return Err(RequestError::Strength(s));
            }
        }
        let expected = self.resolution;
        let check = |field: String, found: Size| {
            if found == expected {
                Ok(())
            } else {
                Err(RequestError::Dimensions { field, found, expected })
            }
        };
        for (i, r) in self.regions.iter().enumerate() {
            check(format!("regions[{i}].mask"), r.mask.size())?;
        }
        if let Some(img) = &self.init_image {
            check("init_image".into(), img.size())?;
        }
        if let Some(mask) = &self.mask_image {
            check("mask_image".into(), mask.size())?;
        }
        Ok(())
    }

    /// Byte encoding that every field of the request feeds into; images
    /// contribute their raw pixels.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::with_header(MAGIC, VERSION);
        w.field(1, &[self.kind.code()]);
        w.field(2, self.prompt.as_bytes());
        let mut regions = Payload::default();
        regions.u32(self.regions.len() as u32);
        for r in &self.regions {
            regions.u32(r.mask.width()).u32(r.mask.height()).bytes(&r.mask.encode_png()).str(&r.text);
        }
        w.field(3, &regions.0);
        if let Some(img) = &self.init_image {
            let mut p = Payload::default();
            p.u32(img.width()).u32(img.height()).bytes(img.as_raw());
            w.field(4, &p.0);
        }
        if let Some(mask) = &self.mask_image {
            let mut p = Payload::default();
            p.u32(mask.width()).u32(mask.height()).bytes(mask.as_raw());
            w.field(5, &p.0);
        }
        if let Some(s) = self.strength {
            w.field(6, &s.to_bits().to_le_bytes());
        }
        let mut tail = Payload::default();
        tail.u64(self.seed).u32(self.count).u32(self.resolution.width).u32(self.resolution.height);
        w.field(7, &tail.0);
        w.finish()
    }

    /// FNV-1a 64 over [`Self::canonical_bytes`].
    pub fn digest(&self) -> u64 {
        fnv1a64(&self.canonical_bytes())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("base image `{0}` is not in the image store")]
    MissingBaseImage(String),
    #[error("sketch is {found} but the generation resolution is {expected}")]
    SketchSize { found: Size, expected: Size },
    #[error("tile `{0}` has nothing to generate from")]
    EmptyInputs(TileId),
}

/// Kind chosen for a tile's inputs: a sketch or base image makes it
/// img2img, otherwise regions make it region_guided, otherwise text2img.
pub fn infer_kind(inputs: &GenerationInputs) -> GenerationKind {
    if inputs.sketch.is_some() || inputs.base_image.is_some() {
        GenerationKind::Img2img
    } else if !inputs.regions.is_empty() {
        GenerationKind::RegionGuided
    } else {
        GenerationKind::Text2img
    }
}

/// Init image for img2img: the base image (or white) with sketched pixels on top.
fn init_image(inputs: &GenerationInputs, images: &dyn ImageSource, res: Size) -> Result<RgbImage, BuildError> {
    let mut init = match &inputs.base_image {
        Some(r) => {
            let img = images.load_image(&r.image_id).ok_or_else(|| BuildError::MissingBaseImage(r.image_id.0.clone()))?;
            if img.size() == res {
                (*img).clone()
            } else {
                resample(&img, res.width, res.height, Resample::Bilinear)
            }
        }
        None => RgbImage::filled(res.width, res.height, [255, 255, 255]),
    };
    if let Some(sketch) = &inputs.sketch {
        if sketch.size() != res {
            return Err(BuildError::SketchSize { found: sketch.size(), expected: res });
        }
        for (x, y) in sketch.coverage.iter_set() {
            init.put(x, y, sketch.image.get(x, y));
        }
    }
    Ok(init)
}

/// Builds the backend request for a tile's working inputs.
pub fn request_from_inputs(
    inputs: &GenerationInputs,
    images: &dyn ImageSource,
    resolution: Size,
    seed: u64,
    count: u32,
) -> Result<GenerationRequest, BuildError> {
    let kind = infer_kind(inputs);
    let regions = if inputs.regions.is_empty() {
        Vec::new()
    } else {
        let seg = compose_segmentation(&inputs.regions, resolution)?;
        extract_binary_masks(&seg).into_iter().map(|m| RegionPrompt { mask: m.mask, text: m.description }).collect()
    };
    let (init_image, strength) = match kind {
        GenerationKind::Img2img => (Some(init_image(inputs, images, resolution)?), Some(inputs.img2img_strength)),
        _ => (None, None),
    };
    Ok(GenerationRequest {
        kind,
        prompt: inputs.scene_prompt.clone(),
        regions,
        init_image,
        mask_image: None,
        strength,
        seed,
        count,
        resolution,
    })
}

/// Blend request: the composite is the init image and the blurred mask,
/// quantized to 8 bits, says where to synthesize.
pub fn request_from_blend_plan(plan: &BlendPlan, seed: u64, count: u32) -> GenerationRequest {
    GenerationRequest {
        kind: GenerationKind::Blend,
        prompt: plan.prompt.clone(),
        regions: Vec::new(),
        init_image: Some(plan.base_image.clone()),
        mask_image: Some(plan.blend_mask.quantize()),
        strength: None,
        seed,
        count,
        resolution: plan.size(),
    }
}
