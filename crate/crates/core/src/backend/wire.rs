//! JSON bodies of the `/v1` backend protocol.
//!
//! Region masks travel as 1-bit grayscale PNG, blend masks as 8-bit
//! grayscale PNG and images as 8-bit RGB PNG, all base64 encoded.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::job::{BackendDescriptor, GenerationJob, JobId, JobState};
use super::request::{GenerationKind, GenerationRequest, RegionPrompt, DEFAULT_BATCH_COUNT};
use crate::raster::{BinaryMask, GrayImage, RasterError, RgbImage, Size};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("{field}: invalid base64: {source}")]
    Base64 { field: String, source: base64::DecodeError },
    #[error("{field}: {source}")]
    Png { field: String, source: RasterError },
    #[error("malformed body: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRegion {
    pub mask_png_b64: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub kind: GenerationKind,
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub regions: Vec<WireRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_image_png_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_png_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: u32,
    pub width: u32,
    pub height: u32,
}

fn default_count() -> u32 {
    DEFAULT_BATCH_COUNT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: JobId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireJob {
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireHealth {
    pub name: String,
    pub kinds: Vec<GenerationKind>,
    pub max_resolution: Size,
}

fn b64_decode(field: &str, s: &str) -> Result<Vec<u8>, WireError> {
    B64.decode(s).map_err(|source| WireError::Base64 { field: field.to_owned(), source })
}

fn png_err(field: impl Into<String>) -> impl FnOnce(RasterError) -> WireError {
    let field = field.into();
    move |source| WireError::Png { field, source }
}

pub fn encode_request(req: &GenerationRequest) -> WireRequest {
    WireRequest {
        kind: req.kind,
        prompt: req.prompt.clone(),
        regions: req
            .regions
            .iter()
            .map(|r| WireRegion { mask_png_b64: B64.encode(r.mask.encode_png()), text: r.text.clone() })
            .collect(),
        init_image_png_b64: req.init_image.as_ref().map(|i| B64.encode(i.encode_png())),
        mask_png_b64: req.mask_image.as_ref().map(|m| B64.encode(m.encode_png())),
        strength: req.strength,
        seed: req.seed,
        count: req.count,
        width: req.resolution.width,
        height: req.resolution.height,
    }
}

/// Decodes images and masks; semantic checks are left to `validate`.
pub fn decode_request(wire: &WireRequest) -> Result<GenerationRequest, WireError> {
    let mut regions = Vec::with_capacity(wire.regions.len());
    for (i, r) in wire.regions.iter().enumerate() {
        let field = format!("regions[{i}].mask_png_b64");
        let mask = BinaryMask::decode_png(&b64_decode(&field, &r.mask_png_b64)?).map_err(png_err(field))?;
        regions.push(RegionPrompt { mask, text: r.text.clone() });
    }
    let init_image = match &wire.init_image_png_b64 {
        Some(s) => Some(RgbImage::decode_png(&b64_decode("init_image_png_b64", s)?).map_err(png_err("init_image_png_b64"))?),
        None => None,
    };
    let mask_image = match &wire.mask_png_b64 {
        Some(s) => Some(GrayImage::decode_png(&b64_decode("mask_png_b64", s)?).map_err(png_err("mask_png_b64"))?),
        None => None,
    };
    Ok(GenerationRequest {
        kind: wire.kind,
        prompt: wire.prompt.clone(),
        regions,
        init_image,
        mask_image,
        strength: wire.strength,
        seed: wire.seed,
        count: wire.count,
        resolution: Size::new(wire.width, wire.height),
    })
}

pub fn encode_job(job: &GenerationJob) -> WireJob {
    WireJob {
        state: job.state,
        images: (job.state == JobState::Done).then(|| job.images.iter().map(|i| B64.encode(i.encode_png())).collect()),
        error: job.error.clone(),
    }
}

pub fn decode_job_images(wire: &WireJob) -> Result<Vec<RgbImage>, WireError> {
    let Some(images) = &wire.images else {
        return Ok(Vec::new());
    };
    images
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let field = format!("images[{i}]");
            RgbImage::decode_png(&b64_decode(&field, s)?).map_err(png_err(field))
        })
        .collect()
}

pub fn encode_health(d: &BackendDescriptor) -> WireHealth {
    WireHealth { name: d.name.clone(), kinds: d.kinds.clone(), max_resolution: d.max_resolution }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_shape() {
        let mut req = GenerationRequest::text2img("a castle", 42, Size::new(8, 4));
        let mut mask = BinaryMask::new(Size::new(8, 4));
        mask.set(1, 1, true);
        req.kind = GenerationKind::RegionGuided;
        req.regions.push(RegionPrompt { mask, text: "moat".into() });
        let json = serde_json::to_value(encode_request(&req)).unwrap();
        assert_eq!(json["kind"], "region_guided");
        assert_eq!(json["seed"], 42);
        assert_eq!(json["count"], 12);
        assert_eq!((json["width"].as_u64(), json["height"].as_u64()), (Some(8), Some(4)));
        assert!(json.get("init_image_png_b64").is_none());
        assert_eq!(json["regions"][0]["text"], "moat");
        let back = decode_request(&serde_json::from_value(json).unwrap()).unwrap();
        assert_eq!(back, req);
        assert_eq!(back.digest(), req.digest());
    }

    #[test]
    fn missing_count_defaults() {
        let wire: WireRequest =
            serde_json::from_str(r#"{"kind":"text2img","prompt":"x","seed":1,"width":4,"height":4}"#).unwrap();
        assert_eq!(decode_request(&wire).unwrap().count, DEFAULT_BATCH_COUNT);
    }

    #[test]
    fn bad_base64_names_the_field() {
        let wire: WireRequest = serde_json::from_str(
            r#"{"kind":"img2img","seed":1,"width":4,"height":4,"init_image_png_b64":"@@"}"#,
        )
        .unwrap();
        let err = decode_request(&wire).unwrap_err().to_string();
        assert!(err.starts_with("init_image_png_b64"), "{err}");
    }

    #[test]
    fn job_images_only_when_done() {
        let mut job = GenerationJob::queued("j".into(), 1, 0);
        assert_eq!(serde_json::to_string(&encode_job(&job)).unwrap(), r#"{"state":"queued"}"#);
        job.advance(JobState::Running, 1);
        job.images.push(std::sync::Arc::new(RgbImage::filled(2, 2, [1, 2, 3])));
        job.advance(JobState::Done, 2);
        let wire = encode_job(&job);
        assert_eq!(decode_job_images(&wire).unwrap(), vec![RgbImage::filled(2, 2, [1, 2, 3])]);
    }
}
