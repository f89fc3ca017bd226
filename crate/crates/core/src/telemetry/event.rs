use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{SessionId, TileId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ModifyText,
    ModifyRegion,
    ModifySketch,
    ModifyTile,
    RunDiffusion,
    Blend,
    TreeAdd,
    TreeSelect,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::ModifyText,
        EventKind::ModifyRegion,
        EventKind::ModifySketch,
        EventKind::ModifyTile,
        EventKind::RunDiffusion,
        EventKind::Blend,
        EventKind::TreeAdd,
        EventKind::TreeSelect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ModifyText => "modify_text",
            EventKind::ModifyRegion => "modify_region",
            EventKind::ModifySketch => "modify_sketch",
            EventKind::ModifyTile => "modify_tile",
            EventKind::RunDiffusion => "run_diffusion",
            EventKind::Blend => "blend",
            EventKind::TreeAdd => "tree_add",
            EventKind::TreeSelect => "tree_select",
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// An event before the log has assigned it an id and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDraft {
    pub kind: EventKind,
    pub tile_id: Option<TileId>,
    pub payload: Value,
}

impl EventDraft {
    pub fn tile(kind: EventKind, tile_id: TileId, payload: Value) -> Self {
        Self { kind, tile_id: Some(tile_id), payload }
    }

    pub fn session(kind: EventKind, payload: Value) -> Self {
        Self { kind, tile_id: None, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub event_id: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub session_id: SessionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_id: Option<TileId>,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Value,
}
