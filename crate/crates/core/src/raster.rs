//! Raster containers shared by every pipeline stage, plus their PNG codecs.
//!
//! Encoding is deterministic: the same pixels always produce the same PNG
//! bytes, which is what makes content addressing of images work.

use std::io::Cursor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("png decode failed: {0}")]
    Decode(String),
    #[error("png encode failed: {0}")]
    Encode(String),
    #[error("unexpected png format: expected {expected}, found {found}")]
    Format { expected: &'static str, found: String },
    #[error("pixel buffer of {len} bytes does not match {width}x{height}")]
    Size { width: u32, height: u32, len: usize },
}

/// Width and height in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

impl Size {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

pub type Rgb = [u8; 3];

/// Packed 8-bit RGB raster, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&color);
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(RasterError::Size { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> Size {
        Size::new(self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode(self.width, self.height, png::ColorType::Rgb, png::BitDepth::Eight, &self.data)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let (info, data) = decode(bytes)?;
        match (info.color_type, info.bit_depth) {
            (png::ColorType::Rgb, png::BitDepth::Eight) => Self::from_raw(info.width, info.height, data),
            (png::ColorType::Rgba, png::BitDepth::Eight) => {
                let rgb = data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
                Self::from_raw(info.width, info.height, rgb)
            }
            (c, d) => Err(RasterError::Format { expected: "8-bit RGB", found: format!("{c:?}/{d:?}") }),
        }
    }
}

/// 8-bit single-channel raster. Used for blend masks on the wire.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != width as usize * height as usize {
            return Err(RasterError::Size { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> Size {
        Size::new(self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode(self.width, self.height, png::ColorType::Grayscale, png::BitDepth::Eight, &self.data)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let (info, data) = decode(bytes)?;
        match (info.color_type, info.bit_depth) {
            (png::ColorType::Grayscale, png::BitDepth::Eight) => Self::from_raw(info.width, info.height, data),
            (c, d) => Err(RasterError::Format { expected: "8-bit grayscale", found: format!("{c:?}/{d:?}") }),
        }
    }
}

/// Single-channel float plane, row-major. Blend-mask math happens here.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Plane {
    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> Size {
        Size::new(self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.data.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Quantizes a plane with values in [0,1] to 8 bits, rounding to nearest.
    pub fn quantize(&self) -> GrayImage {
        let data = self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

/// Hard-edged single-bit raster; bit set means "inside".
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryMask({}x{}, {} set)", self.width, self.height, self.count_ones())
    }
}

impl BinaryMask {
    pub fn new(size: Size) -> Self {
        let bits = size.area() as usize;
        Self { width: size.width, height: size.height, words: vec![0; bits.div_ceil(64)] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> Size {
        Size::new(self.width, self.height)
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = self.index(x, y);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = self.index(x, y);
        if on {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Sets pixels `x0..x1` on row `y`; bounds are clipped.
    pub fn fill_span(&mut self, y: u32, x0: u32, x1: u32) {
        for x in x0..x1.min(self.width) {
            self.set(x, y, true);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &BinaryMask) {
        debug_assert_eq!(self.size(), other.size());
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersects(&self, other: &BinaryMask) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        (0..self.height).flat_map(move |y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| self.get(x, y))
    }

    /// Encodes as a 1-bit grayscale PNG (white = set).
    pub fn encode_png(&self) -> Vec<u8> {
        let row_bytes = (self.width as usize).div_ceil(8);
        let mut packed = vec![0u8; row_bytes * self.height as usize];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    packed[y as usize * row_bytes + x as usize / 8] |= 0x80 >> (x % 8);
                }
            }
        }
        encode(self.width, self.height, png::ColorType::Grayscale, png::BitDepth::One, &packed)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let (info, data) = decode(bytes)?;
        if (info.color_type, info.bit_depth) != (png::ColorType::Grayscale, png::BitDepth::One) {
            return Err(RasterError::Format {
                expected: "1-bit grayscale",
                found: format!("{:?}/{:?}", info.color_type, info.bit_depth),
            });
        }
        let mut mask = BinaryMask::new(Size::new(info.width, info.height));
        let row_bytes = (info.width as usize).div_ceil(8);
        for y in 0..info.height {
            for x in 0..info.width {
                if data[y as usize * row_bytes + x as usize / 8] & (0x80 >> (x % 8)) != 0 {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }
}

fn encode(width: u32, height: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(color);
        encoder.set_depth(depth);
        encoder.set_compression(png::Compression::Balanced);
        // Writing into a Vec cannot fail once the header is valid.
        let mut writer = encoder.write_header().expect("png header");
        writer.write_image_data(data).expect("png data");
    }
    out
}

struct DecodedInfo {
    width: u32,
    height: u32,
    color_type: png::ColorType,
    bit_depth: png::BitDepth,
}

fn decode(bytes: &[u8]) -> Result<(DecodedInfo, Vec<u8>), RasterError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| RasterError::Decode(e.to_string()))?;
    let len = reader.output_buffer_size().ok_or_else(|| RasterError::Decode("image too large".into()))?;
    let mut buf = vec![0; len];
    let frame = reader.next_frame(&mut buf).map_err(|e| RasterError::Decode(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    let info = DecodedInfo {
        width: frame.width,
        height: frame.height,
        color_type: frame.color_type,
        bit_depth: frame.bit_depth,
    };
    Ok((info, buf))
}
