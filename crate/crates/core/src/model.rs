//! Session aggregate: tiles, layout geometry and per-tile prompt state.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::raster::{BinaryMask, Rgb, RgbImage, Size};
use crate::telemetry::{EventDraft, EventKind};
use crate::tree::TileTree;

pub const DEFAULT_TILE_COUNT: u32 = 4;
pub const DEFAULT_GENERATION_RESOLUTION: Size = Size::new(512, 512);
pub const DEFAULT_GRID_GAP: u32 = 32;
pub const DEFAULT_IMG2IMG_STRENGTH: f64 = 0.65;

/// Region colors, handed out in this order. Hues are 30° apart and ordered so
/// that every prefix is as spread out around the wheel as possible.
pub const REGION_PALETTE: [Rgb; 12] = [
    [255, 0, 0],
    [0, 255, 255],
    [255, 255, 0],
    [0, 0, 255],
    [0, 255, 0],
    [255, 0, 255],
    [255, 128, 0],
    [0, 128, 255],
    [128, 255, 0],
    [128, 0, 255],
    [0, 255, 128],
    [255, 0, 128],
];

pub const BACKGROUND_COLOR: Rgb = [0, 0, 0];

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid dimension `{field}`: {value} (must be positive)")]
    InvalidDimension { field: &'static str, value: i64 },
    #[error("grid gap {gap} leaves no room for {cols}x{rows} tiles on a {canvas} canvas")]
    GapTooLarge { gap: u32, cols: u32, rows: u32, canvas: Size },
    #[error("rect {rect:?} lies outside the {canvas} canvas")]
    OutOfBounds { rect: TileRect, canvas: Size },
    #[error("unknown tile `{0}`")]
    UnknownTile(TileId),
    #[error("duplicate region color {0:?}")]
    DuplicateColor(Rgb),
    #[error("region color (0,0,0) is reserved for background")]
    ReservedColor,
    #[error("duplicate region id `{0}`")]
    DuplicateRegionId(RegionId),
    #[error("region palette exhausted")]
    PaletteExhausted,
    #[error("invalid brush action: {0}")]
    InvalidBrush(String),
    #[error("sketch is {found}, expected {expected}")]
    SketchSize { found: Size, expected: Size },
    #[error("img2img strength {0} outside [0,1]")]
    Strength(f64),
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(SessionId);
string_id!(TileId);
string_id!(RegionId);
string_id!(ImageId);

impl SessionId {
    pub fn random() -> Self {
        Self(uuid::Uuid::new_v4().simple().to_string())
    }
}

/// Reference into the content-addressed image store.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: ImageId,
    pub width: u32,
    pub height: u32,
}

impl ImageRef {
    pub fn storage_key(&self) -> String {
        format!("{}.png", self.image_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl TileRect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.w && y < self.y + self.h
    }

    pub fn intersects(&self, other: &TileRect) -> bool {
        self.x < other.x + other.w && other.x < self.x + self.w && self.y < other.y + other.h && other.y < self.y + self.h
    }

    pub fn fits_in(&self, canvas: Size) -> bool {
        self.w > 0
            && self.h > 0
            && self.x as u64 + self.w as u64 <= canvas.width as u64
            && self.y as u64 + self.h as u64 <= canvas.height as u64
    }
}

/// Position in the default grid. Only tiles that still sit in their slot are
/// re-spaced when the grid gap changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSlot {
    pub col: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Brush {
    Pencil,
    Hull,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushAction {
    pub brush: Brush,
    pub points: Vec<Point>,
    #[serde(default = "default_stroke_width")]
    pub stroke_width: u32,
}

fn default_stroke_width() -> u32 {
    1
}

impl BrushAction {
    pub fn pencil(points: Vec<Point>, stroke_width: u32) -> Self {
        Self { brush: Brush::Pencil, points, stroke_width }
    }

    pub fn hull(points: Vec<Point>) -> Self {
        Self { brush: Brush::Hull, points, stroke_width: 1 }
    }

    pub fn lasso(points: Vec<Point>) -> Self {
        Self { brush: Brush::Lasso, points, stroke_width: 1 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.points.is_empty() {
            return Err(ModelError::InvalidBrush("no points".into()));
        }
        if self.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(ModelError::InvalidBrush("non-finite coordinate".into()));
        }
        match self.brush {
            Brush::Pencil if self.stroke_width == 0 => Err(ModelError::InvalidBrush("stroke width must be >= 1".into())),
            Brush::Lasso if self.points.len() < 3 => Err(ModelError::InvalidBrush("lasso needs at least 3 points".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub region_id: RegionId,
    pub color: Rgb,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub geometry: Vec<BrushAction>,
}

/// Painted sketch raster with an explicit coverage mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SketchLayer {
    pub image: RgbImage,
    pub coverage: BinaryMask,
}

impl SketchLayer {
    pub fn blank(size: Size) -> Self {
        Self { image: RgbImage::filled(size.width, size.height, [255, 255, 255]), coverage: BinaryMask::new(size) }
    }

    pub fn size(&self) -> Size {
        self.image.size()
    }

    pub fn paint(&mut self, x: u32, y: u32, color: Rgb) {
        self.image.put(x, y, color);
        self.coverage.set(x, y, true);
    }
}

#[derive(Serialize, Deserialize)]
struct SketchWire {
    width: u32,
    height: u32,
    rgb_png_b64: String,
    coverage_png_b64: String,
}

impl Serialize for SketchLayer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use base64::Engine;
        let b64 = base64::engine::general_purpose::STANDARD;
        SketchWire {
            width: self.image.width(),
            height: self.image.height(),
            rgb_png_b64: b64.encode(self.image.encode_png()),
            coverage_png_b64: b64.encode(self.coverage.encode_png()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SketchLayer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use base64::Engine;
        use serde::de::Error;
        let b64 = base64::engine::general_purpose::STANDARD;
        let wire = SketchWire::deserialize(d)?;
        let image = RgbImage::decode_png(&b64.decode(&wire.rgb_png_b64).map_err(D::Error::custom)?)
            .map_err(D::Error::custom)?;
        let coverage = BinaryMask::decode_png(&b64.decode(&wire.coverage_png_b64).map_err(D::Error::custom)?)
            .map_err(D::Error::custom)?;
        if image.size() != Size::new(wire.width, wire.height) || coverage.size() != image.size() {
            return Err(D::Error::custom("sketch layer dimensions disagree"));
        }
        Ok(Self { image, coverage })
    }
}

/// The prompt state of one tile: everything a generation is derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationInputs {
    #[serde(default)]
    pub scene_prompt: String,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
    #[serde(default)]
    pub sketch: Option<SketchLayer>,
    #[serde(default)]
    pub base_image: Option<ImageRef>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_strength")]
    pub img2img_strength: f64,
}

fn default_strength() -> f64 {
    DEFAULT_IMG2IMG_STRENGTH
}

impl Default for GenerationInputs {
    fn default() -> Self {
        Self {
            scene_prompt: String::new(),
            regions: Vec::new(),
            sketch: None,
            base_image: None,
            seed: None,
            img2img_strength: DEFAULT_IMG2IMG_STRENGTH,
        }
    }
}

impl GenerationInputs {
    pub fn with_prompt(prompt: impl Into<String>) -> Self {
        Self { scene_prompt: prompt.into(), ..Self::default() }
    }

    /// Appends a region using the next unused palette color.
    pub fn add_region(&mut self, description: impl Into<String>, geometry: Vec<BrushAction>) -> Result<RegionId, ModelError> {
        let used: HashSet<Rgb> = self.regions.iter().map(|r| r.color).collect();
        let color = REGION_PALETTE.iter().copied().find(|c| !used.contains(c)).ok_or(ModelError::PaletteExhausted)?;
        let region_id = self.next_region_id();
        self.insert_region(RegionSpec { region_id: region_id.clone(), color, description: description.into(), geometry })?;
        Ok(region_id)
    }

    pub fn insert_region(&mut self, region: RegionSpec) -> Result<(), ModelError> {
        check_region(&region)?;
        if self.regions.iter().any(|r| r.color == region.color) {
            return Err(ModelError::DuplicateColor(region.color));
        }
        if self.regions.iter().any(|r| r.region_id == region.region_id) {
            return Err(ModelError::DuplicateRegionId(region.region_id));
        }
        self.regions.push(region);
        Ok(())
    }

    pub fn next_region_id(&self) -> RegionId {
        (0..)
            .map(|n| RegionId(format!("r{n}")))
            .find(|id| self.regions.iter().all(|r| &r.region_id != id))
            .expect("unbounded")
    }

    pub fn validate(&self, resolution: Size) -> Result<(), ModelError> {
        let mut colors = HashSet::new();
        let mut ids = HashSet::new();
        for region in &self.regions {
            check_region(region)?;
            if !colors.insert(region.color) {
                return Err(ModelError::DuplicateColor(region.color));
            }
            if !ids.insert(&region.region_id) {
                return Err(ModelError::DuplicateRegionId(region.region_id.clone()));
            }
        }
        if let Some(sketch) = &self.sketch {
            if sketch.size() != resolution {
                return Err(ModelError::SketchSize { found: sketch.size(), expected: resolution });
            }
        }
        if !(0.0..=1.0).contains(&self.img2img_strength) {
            return Err(ModelError::Strength(self.img2img_strength));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.scene_prompt.is_empty() && self.regions.is_empty() && self.sketch.is_none() && self.base_image.is_none()
    }

    /// Preview text for tree nodes: scene description followed by region descriptions.
    pub fn label(&self) -> String {
        let regions: Vec<&str> =
            self.regions.iter().map(|r| r.description.as_str()).filter(|d| !d.is_empty()).collect();
        match (self.scene_prompt.is_empty(), regions.is_empty()) {
            (_, true) => self.scene_prompt.clone(),
            (true, false) => format!("regions: {}", regions.join(", ")),
            (false, false) => format!("{}; regions: {}", self.scene_prompt, regions.join(", ")),
        }
    }
}

fn check_region(region: &RegionSpec) -> Result<(), ModelError> {
    if region.color == BACKGROUND_COLOR {
        return Err(ModelError::ReservedColor);
    }
    region.geometry.iter().try_for_each(BrushAction::validate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub tile_id: TileId,
    pub rect: TileRect,
    /// `Some` while the tile sits in its default grid slot.
    pub grid_slot: Option<GridSlot>,
    pub current_image: Option<ImageRef>,
    #[serde(skip)]
    pub tree: TileTree,
    pub inputs: GenerationInputs,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub canvas_size: Option<Size>,
    pub tile_count: Option<u32>,
    pub generation_resolution: Option<Size>,
    pub grid_gap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSession {
    pub session_id: SessionId,
    pub tiles: Vec<Tile>,
    pub global_blend_prompt: String,
    pub grid_gap: u32,
    pub canvas_size: Size,
    pub generation_resolution: Size,
    pub created_at: u64,
}

/// Columns and rows of the near-square grid used for `count` tiles.
pub fn grid_shape(count: u32) -> (u32, u32) {
    if count == 0 {
        return (0, 0);
    }
    let mut cols = (count as f64).sqrt().ceil() as u32;
    while (cols - 1) * (cols - 1) >= count {
        cols -= 1;
    }
    while cols * cols < count {
        cols += 1;
    }
    (cols, count.div_ceil(cols))
}

/// Default grid placement: `gap` pixels between neighbouring tiles, none at
/// the canvas border. Leftover pixels from uneven division stay empty on the
/// right and bottom edges.
pub fn grid_layout(canvas: Size, count: u32, gap: u32) -> Result<Vec<(GridSlot, TileRect)>, ModelError> {
    let (cols, rows) = grid_shape(count);
    if count == 0 {
        return Ok(Vec::new());
    }
    let span = |extent: u32, n: u32| -> Option<u32> {
        let gaps = (n as u64 - 1) * gap as u64;
        let free = (extent as u64).checked_sub(gaps)?;
        let each = free / n as u64;
        (each > 0).then_some(each as u32)
    };
    let too_large = || ModelError::GapTooLarge { gap, cols, rows, canvas };
    let w = span(canvas.width, cols).ok_or_else(too_large)?;
    let h = span(canvas.height, rows).ok_or_else(too_large)?;
    Ok((0..count)
        .map(|i| {
            let slot = GridSlot { col: i % cols, row: i / cols };
            (slot, TileRect::new(slot.col * (w + gap), slot.row * (h + gap), w, h))
        })
        .collect())
}

impl WorldSession {
    pub fn create(config: &SessionConfig, now_ms: u64) -> Result<Self, ModelError> {
        let canvas = config.canvas_size.unwrap_or(Size::new(1024, 1024));
        positive("canvas_width", canvas.width)?;
        positive("canvas_height", canvas.height)?;
        let resolution = config.generation_resolution.unwrap_or(DEFAULT_GENERATION_RESOLUTION);
        positive("generation_width", resolution.width)?;
        positive("generation_height", resolution.height)?;
        let count = config.tile_count.unwrap_or(DEFAULT_TILE_COUNT);
        positive("tile_count", count)?;
        let gap = config.grid_gap.unwrap_or(DEFAULT_GRID_GAP);
        let tiles = grid_layout(canvas, count, gap)?
            .into_iter()
            .enumerate()
            .map(|(i, (slot, rect))| Tile {
                tile_id: TileId(format!("tile-{i}")),
                rect,
                grid_slot: Some(slot),
                current_image: None,
                tree: TileTree::new(now_ms),
                inputs: GenerationInputs::default(),
            })
            .collect();
        Ok(Self {
            session_id: SessionId::random(),
            tiles,
            global_blend_prompt: String::new(),
            grid_gap: gap,
            canvas_size: canvas,
            generation_resolution: resolution,
            created_at: now_ms,
        })
    }

    pub fn tile(&self, id: &TileId) -> Result<&Tile, ModelError> {
        self.tiles.iter().find(|t| &t.tile_id == id).ok_or_else(|| ModelError::UnknownTile(id.clone()))
    }

    pub fn tile_mut(&mut self, id: &TileId) -> Result<&mut Tile, ModelError> {
        self.tiles.iter_mut().find(|t| &t.tile_id == id).ok_or_else(|| ModelError::UnknownTile(id.clone()))
    }

    /// Replaces a tile's rect. Overlap with other tiles is allowed.
    pub fn move_resize_tile(&mut self, id: &TileId, rect: TileRect) -> Result<EventDraft, ModelError> {
        let canvas = self.canvas_size;
        if !rect.fits_in(canvas) {
            return Err(ModelError::OutOfBounds { rect, canvas });
        }
        let tile = self.tile_mut(id)?;
        if tile.rect != rect {
            tile.rect = rect;
            tile.grid_slot = None;
        }
        Ok(EventDraft::tile(EventKind::ModifyTile, id.clone(), json!({ "rect": rect })))
    }

    /// Re-spaces tiles still in their default slot; moved tiles keep their rects.
    pub fn set_grid_gap(&mut self, gap: u32) -> Result<EventDraft, ModelError> {
        let layout = grid_layout(self.canvas_size, self.tiles.len() as u32, gap)?;
        for tile in &mut self.tiles {
            if let Some(slot) = tile.grid_slot {
                if let Some((_, rect)) = layout.iter().find(|(s, _)| *s == slot) {
                    tile.rect = *rect;
                }
            }
        }
        self.grid_gap = gap;
        Ok(EventDraft::session(EventKind::ModifyTile, json!({ "grid_gap": gap })))
    }

    pub fn tile_ids(&self) -> impl Iterator<Item = &TileId> {
        self.tiles.iter().map(|t| &t.tile_id)
    }
}

fn positive(field: &'static str, value: u32) -> Result<(), ModelError> {
    if value == 0 {
        Err(ModelError::InvalidDimension { field, value: value as i64 })
    } else {
        Ok(())
    }
}
