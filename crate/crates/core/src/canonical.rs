//! Stable, platform-independent byte encoding of generation inputs.
//!
//! Layout: `WSIN` magic, a version byte, then fields in fixed order, each as
//! `tag:u8 | len:u32le | payload`. Strings are UTF-8. Coordinates are stored
//! as signed millipixels, strength as parts-per-million, and the sketch only
//! by the SHA-256 of its pixels and coverage bits.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::model::{Brush, GenerationInputs, SketchLayer};

const MAGIC: &[u8; 4] = b"WSIN";
const VERSION: u8 = 1;

mod tag {
    pub const SCENE: u8 = 1;
    pub const REGIONS: u8 = 2;
    pub const SKETCH: u8 = 3;
    pub const BASE_IMAGE: u8 = 4;
    pub const SEED: u8 = 5;
    pub const STRENGTH: u8 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub String);

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalSnapshot {
    pub bytes: Vec<u8>,
    pub digest: Digest,
}

/// Appends tagged, length-prefixed fields.
#[derive(Default)]
pub(crate) struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub(crate) fn with_header(magic: &[u8; 4], version: u8) -> Self {
        let mut buf = magic.to_vec();
        buf.push(version);
        Self { buf }
    }

    pub(crate) fn field(&mut self, tag: u8, payload: &[u8]) {
        self.buf.push(tag);
        self.buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(payload);
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Length-prefixed payload builder used inside a field.
#[derive(Default)]
pub(crate) struct Payload(pub(crate) Vec<u8>);

impl Payload {
    pub(crate) fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    pub(crate) fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub(crate) fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub(crate) fn i64(&mut self, v: i64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub(crate) fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.0.extend_from_slice(v);
        self
    }
    pub(crate) fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }
}

pub(crate) fn fixed_millis(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

pub(crate) fn fixed_ppm(v: f64) -> u32 {
    (v * 1_000_000.0).round() as u32
}

pub fn sketch_content_hash(sketch: &SketchLayer) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(sketch.image.width().to_le_bytes());
    h.update(sketch.image.height().to_le_bytes());
    h.update(sketch.image.as_raw());
    for (x, y) in sketch.coverage.iter_set() {
        h.update(x.to_le_bytes());
        h.update(y.to_le_bytes());
    }
    h.finalize().into()
}

pub fn canonicalize_inputs(inputs: &GenerationInputs) -> CanonicalSnapshot {
    let mut w = FieldWriter::with_header(MAGIC, VERSION);
    w.field(tag::SCENE, inputs.scene_prompt.as_bytes());

    let mut regions = Payload::default();
    regions.u32(inputs.regions.len() as u32);
    for r in &inputs.regions {
        regions.str(r.region_id.as_str()).u8(r.color[0]).u8(r.color[1]).u8(r.color[2]).str(&r.description);
        regions.u32(r.geometry.len() as u32);
        for action in &r.geometry {
            let brush = match action.brush {
                Brush::Pencil => 0,
                Brush::Hull => 1,
                Brush::Lasso => 2,
            };
            regions.u8(brush).u32(action.stroke_width).u32(action.points.len() as u32);
            for p in &action.points {
                regions.i64(fixed_millis(p.x)).i64(fixed_millis(p.y));
            }
        }
    }
    w.field(tag::REGIONS, &regions.0);

    let mut sketch = Payload::default();
    match &inputs.sketch {
        None => sketch.u8(0),
        Some(s) => sketch.u8(1).u32(s.image.width()).u32(s.image.height()).bytes(&sketch_content_hash(s)),
    };
    w.field(tag::SKETCH, &sketch.0);

    let mut base = Payload::default();
    match &inputs.base_image {
        None => base.u8(0),
        Some(img) => base.u8(1).str(img.image_id.as_str()).u32(img.width).u32(img.height),
    };
    w.field(tag::BASE_IMAGE, &base.0);

    let mut seed = Payload::default();
    match inputs.seed {
        None => seed.u8(0),
        Some(s) => seed.u8(1).u64(s),
    };
    w.field(tag::SEED, &seed.0);

    let mut strength = Payload::default();
    strength.u32(fixed_ppm(inputs.img2img_strength));
    w.field(tag::STRENGTH, &strength.0);

    let bytes = w.finish();
    let digest = Digest(sha256_hex(&bytes));
    CanonicalSnapshot { bytes, digest }
}
