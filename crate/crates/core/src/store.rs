//! Content-addressed PNG store. The id of an image is the SHA-256 of its
//! encoded PNG bytes, so identical images share one file.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::canonical::sha256_hex;
use crate::model::{ImageId, ImageRef};
use crate::raster::{RasterError, RgbImage};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("image store io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Anything that can resolve image ids to pixels.
pub trait ImageSource {
    fn load_image(&self, id: &ImageId) -> Option<Arc<RgbImage>>;
}

impl ImageSource for HashMap<ImageId, Arc<RgbImage>> {
    fn load_image(&self, id: &ImageId) -> Option<Arc<RgbImage>> {
        self.get(id).cloned()
    }
}

/// Id and encoded bytes of an image, without storing it.
pub fn image_ref_for(image: &RgbImage) -> (ImageRef, Vec<u8>) {
    let png = image.encode_png();
    let id = ImageId(sha256_hex(&png));
    (ImageRef { image_id: id, width: image.width(), height: image.height() }, png)
}

fn is_valid_id(id: &ImageId) -> bool {
    id.0.len() == 64 && id.0.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

#[derive(Debug)]
pub struct ImageStore {
    dir: PathBuf,
    cache: Mutex<HashMap<ImageId, Arc<RgbImage>>>,
}

impl ImageStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, cache: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, id: &ImageId) -> PathBuf {
        self.dir.join(format!("{id}.png"))
    }

    /// Stores the image (if new) and returns its reference.
    pub fn put(&self, image: &RgbImage) -> Result<ImageRef, StoreError> {
        let (image_ref, png) = image_ref_for(image);
        let path = self.path_of(&image_ref.image_id);
        if !path.exists() {
            let tmp = self.dir.join(format!(".{}.tmp-{}", image_ref.image_id, uuid::Uuid::new_v4().simple()));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&png)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)?;
        }
        self.cache.lock().unwrap().insert(image_ref.image_id.clone(), Arc::new(image.clone()));
        Ok(image_ref)
    }

    pub fn png_bytes(&self, id: &ImageId) -> Result<Option<Vec<u8>>, StoreError> {
        if !is_valid_id(id) {
            return Ok(None);
        }
        match fs::read(self.path_of(id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get(&self, id: &ImageId) -> Result<Option<Arc<RgbImage>>, StoreError> {
        if let Some(img) = self.cache.lock().unwrap().get(id) {
            return Ok(Some(img.clone()));
        }
        let Some(bytes) = self.png_bytes(id)? else {
            return Ok(None);
        };
        let img = Arc::new(RgbImage::decode_png(&bytes)?);
        self.cache.lock().unwrap().insert(id.clone(), img.clone());
        Ok(Some(img))
    }

    pub fn contains(&self, id: &ImageId) -> bool {
        is_valid_id(id) && self.path_of(id).exists()
    }
}

impl ImageSource for ImageStore {
    fn load_image(&self, id: &ImageId) -> Option<Arc<RgbImage>> {
        self.get(id).ok().flatten()
    }
}
