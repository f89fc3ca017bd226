//! On-disk session documents.
//!
//! A session directory holds `session.json` (layout, working inputs,
//! version counter, blend records) and `tree.json` (one tree document per
//! tile). Files are replaced atomically.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::JobState;
use crate::model::{ImageRef, TileId, WorldSession};
use crate::tree::{TileTree, TreeDocument, TreeError};

pub const SESSION_FORMAT_VERSION: u32 = 1;
pub const SESSION_FILE: &str = "session.json";
pub const TREE_FILE: &str = "tree.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("session io: {0}")]
    Io(#[from] std::io::Error),
    #[error("session json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported session format_version {0}")]
    UnsupportedVersion(u32),
    #[error("tree of tile `{tile}`: {source}")]
    Tree { tile: TileId, source: TreeError },
    #[error("tile `{0}` has no tree document")]
    MissingTree(TileId),
}

/// One blend run; kept apart from the tiles it was made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendRecord {
    pub blend_id: String,
    pub job_id: Option<String>,
    pub prompt: String,
    pub seed: u64,
    pub blur_sigma: f64,
    pub state: JobState,
    #[serde(default)]
    pub results: Vec<ImageRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionDocument {
    format_version: u32,
    version: u64,
    session: WorldSession,
    #[serde(default)]
    blends: Vec<BlendRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub session: WorldSession,
    pub version: u64,
    pub blends: Vec<BlendRecord>,
}

/// Writes through a temporary file, syncs it, and renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    // Directory fsync makes the rename durable; not every platform allows it.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn save_session(dir: &Path, stored: &StoredSession) -> Result<(), PersistError> {
    let trees: BTreeMap<&TileId, TreeDocument> = stored.session.tiles.iter().map(|t| (&t.tile_id, t.tree.export())).collect();
    write_atomic(&dir.join(TREE_FILE), &serde_json::to_vec(&trees)?)?;
    let doc = SessionDocument {
        format_version: SESSION_FORMAT_VERSION,
        version: stored.version,
        session: stored.session.clone(),
        blends: stored.blends.clone(),
    };
    write_atomic(&dir.join(SESSION_FILE), &serde_json::to_vec_pretty(&doc)?)?;
    Ok(())
}

pub fn load_session(dir: &Path) -> Result<StoredSession, PersistError> {
    let doc: SessionDocument = serde_json::from_slice(&fs::read(dir.join(SESSION_FILE))?)?;
    if doc.format_version != SESSION_FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion(doc.format_version));
    }
    let mut trees: BTreeMap<TileId, TreeDocument> = serde_json::from_slice(&fs::read(dir.join(TREE_FILE))?)?;
    let mut session = doc.session;
    for tile in &mut session.tiles {
        let tree_doc = trees.remove(&tile.tile_id).ok_or_else(|| PersistError::MissingTree(tile.tile_id.clone()))?;
        tile.tree = TileTree::import(tree_doc).map_err(|source| PersistError::Tree { tile: tile.tile_id.clone(), source })?;
    }
    Ok(StoredSession { session, version: doc.version, blends: doc.blends })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GenerationInputs, SessionConfig};

    #[test]
    fn round_trip_with_trees() {
        let dir = tempfile::tempdir().unwrap();
        let mut session = WorldSession::create(&SessionConfig::default(), 5).unwrap();
        let tile = &mut session.tiles[1];
        tile.inputs = GenerationInputs::with_prompt("a harbor town");
        let img = ImageRef { image_id: crate::model::ImageId("ab".repeat(32)), width: 512, height: 512 };
        tile.tree.record_generation(&tile.inputs, 3, vec![img], 6).unwrap();
        let stored = StoredSession { session, version: 9, blends: Vec::new() };
        save_session(dir.path(), &stored).unwrap();
        let back = load_session(dir.path()).unwrap();
        assert_eq!(back, stored);
        assert_eq!(back.session.tiles[1].tree.len(), 2);
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let stored = StoredSession {
            session: WorldSession::create(&SessionConfig::default(), 0).unwrap(),
            version: 0,
            blends: Vec::new(),
        };
        save_session(dir.path(), &stored).unwrap();
        let path = dir.path().join(SESSION_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_session(dir.path()), Err(PersistError::UnsupportedVersion(7))));
    }
}
