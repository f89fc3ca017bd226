//! Stateful session service behind the HTTP routes.
//!
//! Every mutation runs under the session's lock: the new state is built on
//! a copy, written to disk, swapped in, and only then are its telemetry
//! events appended. A failed write leaves the previous state in place.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;
use worldsmith_core::backend::{
    request_from_blend_plan, request_from_inputs, submit, wait_for_job, Backend, BackendDescriptor, GenerationKind,
    GenerationRequest, JobState,
};
use worldsmith_core::compositor::{make_blend_plan, thumbnail, Resample};
use worldsmith_core::model::{
    GenerationInputs, ImageId, ImageRef, RegionSpec, SessionConfig, SessionId, SketchLayer, TileId, TileRect,
    WorldSession,
};
use worldsmith_core::persist::{load_session, save_session, BlendRecord, StoredSession, SESSION_FILE};
use worldsmith_core::raster::Size;
use worldsmith_core::store::ImageStore;
use worldsmith_core::telemetry::{EventDraft, EventKind, EventStore, SyncPolicy};
use worldsmith_core::tree::{ManualMode, NodeId};

use crate::error::ApiError;

/// Seeds drawn by the service stay below 2^53 so JSON clients keep them exact.
pub const MAX_RANDOM_SEED: u64 = 1 << 53;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub batch_count: u32,
    pub resolution: Size,
    /// `None` derives sigma from the grid gap.
    pub blur_sigma: Option<f64>,
    pub sync: SyncPolicy,
    pub job_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            batch_count: worldsmith_core::backend::DEFAULT_BATCH_COUNT,
            resolution: worldsmith_core::model::DEFAULT_GENERATION_RESOLUTION,
            blur_sigma: None,
            sync: SyncPolicy::Always,
            job_timeout: Duration::from_secs(600),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JobTarget {
    Tile { tile_id: TileId },
    Blend { blend_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobView {
    pub job_id: String,
    pub session_id: SessionId,
    #[serde(flatten)]
    pub target: JobTarget,
    pub kind: GenerationKind,
    pub seed: u64,
    pub count: u32,
    pub state: JobState,
    pub results: Vec<ImageRef>,
    pub thumbnails: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_id: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionState {
    pub session_id: SessionId,
    pub version: u64,
    pub session: WorldSession,
    /// Tiles with a generation in flight.
    pub pending: Vec<TileId>,
    pub blends: Vec<BlendRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeNodeView {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub label: String,
    pub digest: String,
    pub results: Vec<ImageRef>,
    pub seeds: Vec<u64>,
    pub thumbnail: Option<String>,
    pub depth: u32,
    pub sibling_index: u32,
    pub created_at: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeView {
    pub tile_id: TileId,
    pub root_id: NodeId,
    pub selected_id: NodeId,
    pub nodes: Vec<TreeNodeView>,
}

fn some<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<Option<T>>, D::Error> {
    Option::<T>::deserialize(d).map(Some)
}

/// Partial update of a tile's working inputs. Absent fields are left alone;
/// `null` clears the nullable ones.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct InputsPatch {
    pub expected_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_prompt: Option<String>,
    #[serde(default, deserialize_with = "some", skip_serializing_if = "Option::is_none")]
    pub seed: Option<Option<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub img2img_strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<RegionSpec>>,
    #[serde(default, deserialize_with = "some", skip_serializing_if = "Option::is_none")]
    pub sketch: Option<Option<SketchLayer>>,
    #[serde(default, deserialize_with = "some", skip_serializing_if = "Option::is_none")]
    pub base_image: Option<Option<ImageRef>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct GenerateOptions {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub count: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct BlendOptions {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub count: Option<u32>,
    #[serde(default)]
    pub blur_sigma: Option<f64>,
}

struct SessionEntry {
    dir: PathBuf,
    stored: StoredSession,
    /// Tile to job id of its generation in flight.
    pending: HashMap<TileId, String>,
}

struct Generation {
    tile_id: TileId,
    base: NodeId,
    inputs: GenerationInputs,
}

pub struct Service {
    config: ServiceConfig,
    images: ImageStore,
    events: EventStore,
    backend: Arc<dyn Backend>,
    sessions: Mutex<HashMap<SessionId, Arc<Mutex<SessionEntry>>>>,
    jobs: Mutex<HashMap<String, JobView>>,
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 128 && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn random_seed() -> u64 {
    rand::random_range(0..MAX_RANDOM_SEED)
}

impl Service {
    pub fn open(config: ServiceConfig, backend: Arc<dyn Backend>) -> Result<Arc<Self>, ApiError> {
        let images = ImageStore::open(config.data_dir.join("images"))?;
        let events = EventStore::new(config.data_dir.join("sessions"), config.sync);
        Ok(Arc::new(Self {
            config,
            images,
            events,
            backend,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn images(&self) -> &ImageStore {
        &self.images
    }

    pub fn backend_descriptor(&self) -> BackendDescriptor {
        self.backend.descriptor()
    }

    fn session_dir(&self, id: &SessionId) -> PathBuf {
        self.events.session_dir(id)
    }

    /// Session handle, loading it from disk on first access.
    fn entry(&self, id: &SessionId) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        let mut sessions = self.sessions.lock().unwrap();
        if let Some(e) = sessions.get(id) {
            return Ok(e.clone());
        }
        let dir = self.session_dir(id);
        if !valid_id(id.as_str()) || !dir.join(SESSION_FILE).is_file() {
            return Err(ApiError::NotFound(format!("unknown session `{id}`")));
        }
        let stored = load_session(&dir)?;
        self.events.register(id).map_err(|e| ApiError::Internal(e.to_string()))?;
        let entry = Arc::new(Mutex::new(SessionEntry { dir, stored, pending: HashMap::new() }));
        sessions.insert(id.clone(), entry.clone());
        Ok(entry)
    }

    fn log(&self, session: &SessionId, drafts: Vec<EventDraft>) {
        for d in drafts {
            if let Err(e) = self.events.log_event(session, d) {
                tracing::warn!("telemetry for session {session} not recorded: {e}");
            }
        }
    }

    /// Applies `f` to a copy of the session, persists it with a bumped
    /// version, swaps it in and logs the returned events.
    fn mutate<T>(
        &self,
        id: &SessionId,
        expected_version: Option<u64>,
        f: impl FnOnce(&mut StoredSession, &HashMap<TileId, String>) -> Result<(T, Vec<EventDraft>), ApiError>,
    ) -> Result<(T, u64), ApiError> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock().unwrap();
        if let Some(v) = expected_version {
            if v != entry.stored.version {
                return Err(ApiError::Conflict(format!("version mismatch: expected {v}, current {}", entry.stored.version)));
            }
        }
        let mut next = entry.stored.clone();
        let (out, drafts) = f(&mut next, &entry.pending)?;
        next.version += 1;
        save_session(&entry.dir, &next)?;
        let version = next.version;
        entry.stored = next;
        self.log(id, drafts);
        Ok((out, version))
    }

    pub fn create_session(&self, config: &SessionConfig) -> Result<SessionState, ApiError> {
        let mut config = config.clone();
        config.generation_resolution.get_or_insert(self.config.resolution);
        let session = WorldSession::create(&config, worldsmith_core::now_ms())?;
        let id = session.session_id.clone();
        let dir = self.session_dir(&id);
        let stored = StoredSession { session, version: 1, blends: Vec::new() };
        save_session(&dir, &stored)?;
        self.events.register(&id).map_err(|e| ApiError::Internal(e.to_string()))?;
        let entry = SessionEntry { dir, stored, pending: HashMap::new() };
        self.sessions.lock().unwrap().insert(id.clone(), Arc::new(Mutex::new(entry)));
        self.session_state(&id)
    }

    pub fn session_state(&self, id: &SessionId) -> Result<SessionState, ApiError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().unwrap();
        let mut pending: Vec<TileId> = entry.pending.keys().cloned().collect();
        pending.sort();
        Ok(SessionState {
            session_id: id.clone(),
            version: entry.stored.version,
            session: entry.stored.session.clone(),
            pending,
            blends: entry.stored.blends.clone(),
        })
    }

    pub fn move_tile(&self, id: &SessionId, tile: &TileId, rect: TileRect, expected: Option<u64>) -> Result<u64, ApiError> {
        self.mutate(id, expected, |s, _| Ok(((), vec![s.session.move_resize_tile(tile, rect)?]))).map(|(_, v)| v)
    }

    pub fn set_grid_gap(&self, id: &SessionId, gap: u32, expected: Option<u64>) -> Result<u64, ApiError> {
        self.mutate(id, expected, |s, _| Ok(((), vec![s.session.set_grid_gap(gap)?]))).map(|(_, v)| v)
    }

    pub fn set_blend_prompt(&self, id: &SessionId, prompt: &str, expected: Option<u64>) -> Result<u64, ApiError> {
        self.mutate(id, expected, |s, _| {
            if s.session.global_blend_prompt == prompt {
                return Ok(((), Vec::new()));
            }
            s.session.global_blend_prompt = prompt.to_owned();
            Ok(((), vec![EventDraft::session(EventKind::ModifyText, json!({ "blend_prompt": prompt }))]))
        })
        .map(|(_, v)| v)
    }

    fn resolve_image(&self, r: &ImageRef, field: &str) -> Result<ImageRef, ApiError> {
        match self.images.get(&r.image_id)? {
            Some(img) => Ok(ImageRef { image_id: r.image_id.clone(), width: img.width(), height: img.height() }),
            None => Err(ApiError::invalid(field, format!("image `{}` is not in the image store", r.image_id))),
        }
    }

    /// Picks which generated image represents the tile on the global canvas.
    pub fn set_current_image(
        &self,
        id: &SessionId,
        tile: &TileId,
        image: Option<ImageId>,
        expected: Option<u64>,
    ) -> Result<u64, ApiError> {
        let resolved = match image {
            Some(image_id) => Some(self.resolve_image(&ImageRef { image_id, width: 0, height: 0 }, "image_id")?),
            None => None,
        };
        self.mutate(id, expected, |s, _| {
            let t = s.session.tile_mut(tile)?;
            if t.current_image == resolved {
                return Ok(((), Vec::new()));
            }
            t.current_image = resolved.clone();
            Ok(((), vec![EventDraft::tile(EventKind::ModifyTile, tile.clone(), json!({ "current_image": resolved }))]))
        })
        .map(|(_, v)| v)
    }

    /// Patches working inputs, emitting one event per changed facet:
    /// text (scene, seed, strength), regions, and sketch (sketch, base image).
    pub fn update_inputs(&self, id: &SessionId, tile: &TileId, patch: InputsPatch) -> Result<(u64, usize), ApiError> {
        let base_image = match &patch.base_image {
            Some(Some(r)) => Some(Some(self.resolve_image(r, "base_image")?)),
            other => other.clone(),
        };
        let (n, version) = self.mutate(id, Some(patch.expected_version), |s, _| {
            let resolution = s.session.generation_resolution;
            let t = s.session.tile_mut(tile)?;
            let old = t.inputs.clone();
            let mut new = old.clone();
            if let Some(p) = patch.scene_prompt {
                new.scene_prompt = p;
            }
            if let Some(seed) = patch.seed {
                new.seed = seed;
            }
            if let Some(st) = patch.img2img_strength {
                new.img2img_strength = st;
            }
            if let Some(r) = patch.regions {
                new.regions = r;
            }
            if let Some(sk) = patch.sketch {
                new.sketch = sk;
            }
            if let Some(b) = base_image {
                new.base_image = b;
            }
            new.validate(resolution)?;

            let mut drafts = Vec::new();
            let ev = |kind, payload| EventDraft::tile(kind, tile.clone(), payload);
            if (&old.scene_prompt, old.seed, old.img2img_strength) != (&new.scene_prompt, new.seed, new.img2img_strength) {
                drafts.push(ev(
                    EventKind::ModifyText,
                    json!({ "scene_prompt": new.scene_prompt, "seed": new.seed, "img2img_strength": new.img2img_strength }),
                ));
            }
            if old.regions != new.regions {
                drafts.push(ev(EventKind::ModifyRegion, json!({ "regions": new.regions })));
            }
            if (&old.sketch, &old.base_image) != (&new.sketch, &new.base_image) {
                drafts.push(ev(EventKind::ModifySketch, json!({ "sketch": new.sketch, "base_image": new.base_image })));
            }
            t.inputs = new;
            Ok((drafts.len(), drafts))
        })?;
        Ok((version, n))
    }

    pub fn tree(&self, id: &SessionId, tile: &TileId) -> Result<TreeView, ApiError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().unwrap();
        let tree = &entry.stored.session.tile(tile)?.tree;
        let hints: HashMap<NodeId, _> = tree.hints().into_iter().map(|h| (h.node_id, h)).collect();
        let nodes = tree
            .nodes()
            .map(|n| TreeNodeView {
                node_id: n.node_id,
                parent_id: n.parent_id,
                children: n.children.clone(),
                label: n.label.clone(),
                digest: n.digest().0.clone(),
                results: n.results.clone(),
                seeds: n.seeds.clone(),
                thumbnail: n.thumbnail().map(|r| format!("/images/{}/thumbnail", r.image_id)),
                depth: hints[&n.node_id].depth,
                sibling_index: hints[&n.node_id].sibling_index,
                created_at: n.created_at,
            })
            .collect();
        Ok(TreeView { tile_id: tile.clone(), root_id: tree.root_id(), selected_id: tree.selected_id(), nodes })
    }

    /// Selects a node and loads its inputs into the tile's editor state.
    pub fn select_node(
        &self,
        id: &SessionId,
        tile: &TileId,
        node: NodeId,
        expected: Option<u64>,
    ) -> Result<(GenerationInputs, u64), ApiError> {
        self.mutate(id, expected, |s, pending| {
            pending_conflict(pending, tile)?;
            let t = s.session.tile_mut(tile)?;
            let inputs = t.tree.select_node(node)?;
            t.inputs = inputs.clone();
            Ok((inputs, vec![EventDraft::tile(EventKind::TreeSelect, tile.clone(), json!({ "node_id": node }))]))
        })
    }

    pub fn add_node(
        &self,
        id: &SessionId,
        tile: &TileId,
        at: NodeId,
        mode: ManualMode,
        expected: Option<u64>,
    ) -> Result<((NodeId, GenerationInputs), u64), ApiError> {
        self.mutate(id, expected, |s, pending| {
            pending_conflict(pending, tile)?;
            let t = s.session.tile_mut(tile)?;
            let node = t.tree.add_node_manual(at, mode, worldsmith_core::now_ms())?;
            t.inputs = t.tree.node(node)?.inputs().clone();
            let draft = EventDraft::tile(EventKind::TreeAdd, tile.clone(), json!({ "at": at, "mode": mode, "node_id": node }));
            Ok(((node, t.inputs.clone()), vec![draft]))
        })
    }

    pub fn job(&self, job_id: &str) -> Result<JobView, ApiError> {
        self.jobs.lock().unwrap().get(job_id).cloned().ok_or_else(|| ApiError::NotFound(format!("unknown job `{job_id}`")))
    }

    fn update_job(&self, job_id: &str, f: impl FnOnce(&mut JobView)) {
        if let Some(j) = self.jobs.lock().unwrap().get_mut(job_id) {
            f(j);
        }
    }

    /// Submits the tile's working inputs. The tree is updated when the job
    /// completes; until then the tile refuses tree operations and new runs.
    pub fn generate(self: &Arc<Self>, id: &SessionId, tile: &TileId, opts: GenerateOptions) -> Result<JobView, ApiError> {
        let entry = self.entry(id)?;
        let mut guard = entry.lock().unwrap();
        pending_conflict(&guard.pending, tile)?;
        let session = &guard.stored.session;
        let t = session.tile(tile)?;
        if t.inputs.is_empty() {
            return Err(ApiError::invalid("inputs", format!("tile `{tile}` has nothing to generate from")));
        }
        let seed = opts.seed.or(t.inputs.seed).unwrap_or_else(random_seed);
        let count = opts.count.unwrap_or(self.config.batch_count);
        let request = request_from_inputs(&t.inputs, &self.images, session.generation_resolution, seed, count)?;
        request.validate().map_err(|e| ApiError::invalid("inputs", e))?;
        let generation = Generation { tile_id: tile.clone(), base: t.tree.selected_id(), inputs: t.inputs.clone() };

        let job_id = format!("job-{}", uuid::Uuid::new_v4().simple());
        let view = JobView {
            job_id: job_id.clone(),
            session_id: id.clone(),
            target: JobTarget::Tile { tile_id: tile.clone() },
            kind: request.kind,
            seed,
            count,
            state: JobState::Queued,
            results: Vec::new(),
            thumbnails: Vec::new(),
            node_id: None,
            error: None,
        };
        self.jobs.lock().unwrap().insert(job_id.clone(), view.clone());
        guard.pending.insert(tile.clone(), job_id.clone());
        let payload = json!({ "job_id": job_id, "kind": request.kind, "seed": seed, "count": count });
        self.log(id, vec![EventDraft::tile(EventKind::RunDiffusion, tile.clone(), payload)]);
        drop(guard);

        let svc = self.clone();
        let sid = id.clone();
        thread::spawn(move || {
            let outcome = svc.run_backend(&job_id, request);
            svc.finish_generation(&sid, &job_id, generation, seed, outcome);
        });
        Ok(view)
    }

    /// Submits and waits; the result is the image list or the error text.
    fn run_backend(&self, job_id: &str, request: GenerationRequest) -> Result<Vec<ImageRef>, String> {
        let backend_job = submit(self.backend.as_ref(), request).map_err(|e| e.to_string())?;
        self.update_job(job_id, |j| j.state = JobState::Running);
        let job = wait_for_job(self.backend.as_ref(), &backend_job, self.config.job_timeout).map_err(|e| e.to_string())?;
        if job.state == JobState::Failed {
            return Err(job.error.unwrap_or_else(|| "backend reported failure".into()));
        }
        let mut refs = Vec::with_capacity(job.images.len());
        for img in &job.images {
            refs.push(self.images.put(img).map_err(|e| e.to_string())?);
        }
        Ok(refs)
    }

    fn fail_job(&self, job_id: &str, message: String) {
        tracing::warn!("job {job_id} failed: {message}");
        self.update_job(job_id, |j| {
            j.state = JobState::Failed;
            j.error = Some(message);
        });
    }

    fn finish_generation(
        &self,
        id: &SessionId,
        job_id: &str,
        g: Generation,
        seed: u64,
        outcome: Result<Vec<ImageRef>, String>,
    ) {
        let recorded = outcome.and_then(|refs| {
            self.mutate(id, None, |s, _| {
                let t = s.session.tile_mut(&g.tile_id)?;
                let rec = t.tree.record_generation_from(g.base, &g.inputs, seed, refs.clone(), worldsmith_core::now_ms())?;
                Ok(((rec.node_id, refs), Vec::new()))
            })
            .map(|(out, _)| out)
            .map_err(|e| e.to_string())
        });
        if let Ok(entry) = self.entry(id) {
            entry.lock().unwrap().pending.remove(&g.tile_id);
        }
        match recorded {
            Ok((node, refs)) => self.update_job(job_id, |j| {
                j.thumbnails = refs.iter().map(|r| format!("/images/{}/thumbnail", r.image_id)).collect();
                j.results = refs;
                j.node_id = Some(node);
                j.state = JobState::Done;
            }),
            Err(msg) => self.fail_job(job_id, msg),
        }
    }

    /// Builds the blend plan from the tiles' current images and submits it.
    /// The result is kept as a session-level record; tiles are untouched.
    pub fn blend(self: &Arc<Self>, id: &SessionId, opts: BlendOptions) -> Result<JobView, ApiError> {
        let job_id = format!("job-{}", uuid::Uuid::new_v4().simple());
        let count = opts.count.unwrap_or(self.config.batch_count);
        let seed = opts.seed.unwrap_or_else(random_seed);
        let mut request = None;
        let ((blend_id, sigma), _) = self.mutate(id, None, |s, _| {
            let sigma = opts.blur_sigma.or(self.config.blur_sigma);
            let plan = make_blend_plan(&s.session, &self.images, sigma, Resample::Bilinear)?;
            let blend_id = format!("blend-{}", s.blends.len() + 1);
            s.blends.push(BlendRecord {
                blend_id: blend_id.clone(),
                job_id: Some(job_id.clone()),
                prompt: plan.prompt.clone(),
                seed,
                blur_sigma: plan.blur_sigma,
                state: JobState::Queued,
                results: Vec::new(),
                error: None,
                created_at: worldsmith_core::now_ms(),
            });
            request = Some(request_from_blend_plan(&plan, seed, count));
            let payload = json!({
                "blend_id": blend_id, "job_id": job_id, "seed": seed, "count": count,
                "blur_sigma": opts.blur_sigma, "prompt": plan.prompt,
            });
            Ok(((blend_id, plan.blur_sigma), vec![EventDraft::session(EventKind::Blend, payload)]))
        })?;
        let request = request.expect("set by mutation");
        let view = JobView {
            job_id: job_id.clone(),
            session_id: id.clone(),
            target: JobTarget::Blend { blend_id: blend_id.clone() },
            kind: GenerationKind::Blend,
            seed,
            count,
            state: JobState::Queued,
            results: Vec::new(),
            thumbnails: Vec::new(),
            node_id: None,
            error: None,
        };
        self.jobs.lock().unwrap().insert(job_id.clone(), view.clone());
        tracing::debug!("blend {blend_id} submitted with sigma {sigma}");

        let svc = self.clone();
        let sid = id.clone();
        thread::spawn(move || {
            let outcome = svc.run_backend(&job_id, request);
            let (state, results, error) = match &outcome {
                Ok(refs) => (JobState::Done, refs.clone(), None),
                Err(msg) => (JobState::Failed, Vec::new(), Some(msg.clone())),
            };
            let saved = svc.mutate(&sid, None, |s, _| {
                if let Some(b) = s.blends.iter_mut().find(|b| b.blend_id == blend_id) {
                    b.state = state;
                    b.results = results.clone();
                    b.error = error.clone();
                }
                Ok(((), Vec::new()))
            });
            match (outcome, saved) {
                (Ok(refs), Ok(_)) => svc.update_job(&job_id, |j| {
                    j.thumbnails = refs.iter().map(|r| format!("/images/{}/thumbnail", r.image_id)).collect();
                    j.results = refs;
                    j.state = JobState::Done;
                }),
                (Err(msg), _) => svc.fail_job(&job_id, msg),
                (_, Err(e)) => svc.fail_job(&job_id, e.to_string()),
            }
        });
        Ok(view)
    }

    pub fn blends(&self, id: &SessionId) -> Result<Vec<BlendRecord>, ApiError> {
        Ok(self.session_state(id)?.blends)
    }

    pub fn events_ndjson(&self, id: &SessionId) -> Result<Vec<u8>, ApiError> {
        self.entry(id)?;
        self.events.export_ndjson(id).map_err(|e| ApiError::Internal(e.to_string()))
    }

    pub fn image_png(&self, image: &ImageId) -> Result<Vec<u8>, ApiError> {
        self.images.png_bytes(image)?.ok_or_else(|| ApiError::NotFound(format!("unknown image `{image}`")))
    }

    /// PNG of the 96x96 preview of a stored image; computed once, then stored.
    pub fn thumbnail_png(&self, image: &ImageId) -> Result<Vec<u8>, ApiError> {
        let img = self.images.get(image)?.ok_or_else(|| ApiError::NotFound(format!("unknown image `{image}`")))?;
        let thumb = self.images.put(&thumbnail(&img))?;
        self.image_png(&thumb.image_id)
    }
}

fn pending_conflict(pending: &HashMap<TileId, String>, tile: &TileId) -> Result<(), ApiError> {
    match pending.get(tile) {
        Some(job) => Err(ApiError::Conflict(format!("tile `{tile}` has generation {job} in progress"))),
        None => Ok(()),
    }
}
