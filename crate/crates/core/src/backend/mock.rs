//! Deterministic in-process backend.
//!
//! Every output pixel is a pure function of the request, so tests can
//! recompute expected images exactly and replays reproduce content hashes.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;

use super::job::{BackendDescriptor, GenerationJob, JobId, JobState};
use super::request::{GenerationKind, GenerationRequest};
use super::{Backend, BackendError};
use crate::canonical::fnv1a64;
use crate::model::DEFAULT_IMG2IMG_STRENGTH;
use crate::raster::{Rgb, RgbImage, Size};

/// Side length of the value-noise lattice cells.
pub const NOISE_CELL: u32 = 32;
pub const MOCK_MAX_RESOLUTION: Size = Size::new(2048, 2048);

/// Flat color the mock paints over a region with this description.
pub fn region_color(text: &str) -> Rgb {
    let h = fnv1a64(text.as_bytes()).to_le_bytes();
    [h[0], h[1], h[2]]
}

/// Seed of the texture for one image of a batch.
pub fn texture_seed(prompt: &str, seed: u64, index: u32) -> u64 {
    let mut bytes = Vec::with_capacity(prompt.len() + 12);
    bytes.extend_from_slice(prompt.as_bytes());
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a64(&bytes)
}

/// Value noise: random lattice values every [`NOISE_CELL`] pixels, bilinearly
/// interpolated in integer arithmetic.
pub fn value_noise(size: Size, seed: u64) -> RgbImage {
    let lw = size.width / NOISE_CELL + 2;
    let lh = size.height / NOISE_CELL + 2;
    let mut lattice = vec![[0u32; 3]; (lw * lh) as usize];
    for gy in 0..lh {
        for gx in 0..lw {
            let mut key = [0u8; 16];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8..12].copy_from_slice(&gx.to_le_bytes());
            key[12..].copy_from_slice(&gy.to_le_bytes());
            let h = fnv1a64(&key).to_le_bytes();
            lattice[(gy * lw + gx) as usize] = [h[0] as u32, h[1] as u32, h[2] as u32];
        }
    }
    let c = NOISE_CELL;
    let mut data = Vec::with_capacity(size.area() as usize * 3);
    for y in 0..size.height {
        let (gy, fy) = (y / c, y % c);
        for x in 0..size.width {
            let (gx, fx) = (x / c, x % c);
            let at = |dx: u32, dy: u32| lattice[((gy + dy) * lw + gx + dx) as usize];
            let (a, b, d, e) = (at(0, 0), at(1, 0), at(0, 1), at(1, 1));
            for ch in 0..3 {
                let v = a[ch] * (c - fx) * (c - fy) + b[ch] * fx * (c - fy) + d[ch] * (c - fx) * fy + e[ch] * fx * fy;
                data.push(((v + c * c / 2) / (c * c)) as u8);
            }
        }
    }
    RgbImage::from_raw(size.width, size.height, data).expect("sized buffer")
}

fn mix(keep: u8, fill: u8, m: u32) -> u8 {
    ((keep as u32 * (255 - m) + fill as u32 * m + 127) / 255) as u8
}

/// One image of a batch; `request` must already be valid.
pub fn mock_image(request: &GenerationRequest, index: u32) -> RgbImage {
    let res = request.resolution;
    let mut out = value_noise(res, texture_seed(&request.prompt, request.seed, index));
    match (request.kind, &request.init_image) {
        (GenerationKind::Img2img, Some(init)) => {
            let m = (request.strength.unwrap_or(DEFAULT_IMG2IMG_STRENGTH) * 255.0).round() as u32;
            for y in 0..res.height {
                for x in 0..res.width {
                    let (i, t) = (init.get(x, y), out.get(x, y));
                    out.put(x, y, [mix(i[0], t[0], m), mix(i[1], t[1], m), mix(i[2], t[2], m)]);
                }
            }
        }
        (GenerationKind::Blend, Some(init)) => {
            let mask = request.mask_image.as_ref().expect("validated blend request");
            for y in 0..res.height {
                for x in 0..res.width {
                    let m = mask.get(x, y) as u32;
                    let (i, t) = (init.get(x, y), out.get(x, y));
                    out.put(x, y, [mix(i[0], t[0], m), mix(i[1], t[1], m), mix(i[2], t[2], m)]);
                }
            }
        }
        _ => {}
    }
    for region in &request.regions {
        let color = region_color(&region.text);
        for (x, y) in region.mask.iter_set() {
            out.put(x, y, color);
        }
    }
    out
}

/// Synchronous core of the mock backend.
pub fn mock_generate(request: &GenerationRequest) -> Vec<RgbImage> {
    (0..request.count).map(|i| mock_image(request, i)).collect()
}

#[derive(Default)]
struct Shared {
    jobs: Mutex<HashMap<JobId, GenerationJob>>,
    paused: Mutex<bool>,
    resumed: Condvar,
    failures: Mutex<VecDeque<String>>,
    next_id: AtomicU64,
}

/// Runs each job on its own thread. Jobs can be held in the queue with
/// [`MockBackend::pause`] and made to fail with [`MockBackend::fail_next`].
#[derive(Clone, Default)]
pub struct MockBackend {
    shared: Arc<Shared>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Holds newly started work in `queued` until [`Self::resume`].
    pub fn pause(&self) {
        *self.shared.paused.lock().unwrap() = true;
    }

    pub fn resume(&self) {
        *self.shared.paused.lock().unwrap() = false;
        self.shared.resumed.notify_all();
    }

    /// The next enqueued job fails with exactly this message.
    pub fn fail_next(&self, message: impl Into<String>) {
        self.shared.failures.lock().unwrap().push_back(message.into());
    }

    fn update(&self, id: &JobId, f: impl FnOnce(&mut GenerationJob)) {
        if let Some(job) = self.shared.jobs.lock().unwrap().get_mut(id) {
            f(job);
        }
    }
}

impl Backend for MockBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            name: "mock".into(),
            endpoint: "in-process".into(),
            kinds: GenerationKind::ALL.to_vec(),
            max_resolution: MOCK_MAX_RESOLUTION,
            healthy: true,
        }
    }

    fn enqueue(&self, request: GenerationRequest, digest: u64) -> Result<JobId, BackendError> {
        let id = JobId(format!("mock-{}", self.shared.next_id.fetch_add(1, Ordering::Relaxed) + 1));
        let failure = self.shared.failures.lock().unwrap().pop_front();
        self.shared.jobs.lock().unwrap().insert(id.clone(), GenerationJob::queued(id.clone(), digest, crate::now_ms()));
        let this = self.clone();
        let job_id = id.clone();
        thread::spawn(move || {
            {
                let mut paused = this.shared.paused.lock().unwrap();
                while *paused {
                    paused = this.shared.resumed.wait(paused).unwrap();
                }
            }
            this.update(&job_id, |j| {
                j.advance(JobState::Running, crate::now_ms());
            });
            let outcome = match failure {
                Some(msg) => Err(msg),
                None => Ok(mock_generate(&request)),
            };
            this.update(&job_id, |j| match outcome {
                Ok(images) => {
                    j.images = images.into_iter().map(Arc::new).collect();
                    j.advance(JobState::Done, crate::now_ms());
                }
                Err(msg) => {
                    j.error = Some(msg);
                    j.advance(JobState::Failed, crate::now_ms());
                }
            });
        });
        Ok(id)
    }

    fn poll(&self, job_id: &JobId) -> Result<GenerationJob, BackendError> {
        self.shared.jobs.lock().unwrap().get(job_id).cloned().ok_or_else(|| BackendError::UnknownJob(job_id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::request::RegionPrompt;
    use crate::raster::{BinaryMask, GrayImage};

    const RES: Size = Size::new(48, 40);

    #[test]
    fn deterministic_and_sized() {
        let mut req = GenerationRequest::text2img("dunes", 9, RES);
        req.count = 3;
        let a = mock_generate(&req);
        let b = mock_generate(&req);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|i| i.size() == RES));
        assert_ne!(a[0], a[1], "batch images differ by index");
    }

    #[test]
    fn noise_is_smooth_between_lattice_points() {
        let img = value_noise(Size::new(64, 64), 5);
        for y in 0..64 {
            for x in 1..64 {
                let (p, q) = (img.get(x - 1, y), img.get(x, y));
                for ch in 0..3 {
                    assert!((p[ch] as i32 - q[ch] as i32).abs() <= 9);
                }
            }
        }
    }

    #[test]
    fn region_paints_exactly_its_mask() {
        let mut mask = BinaryMask::new(RES);
        for y in 5..15 {
            for x in 20..30 {
                mask.set(x, y, true);
            }
        }
        let mut req = GenerationRequest::text2img("plains", 1, RES);
        req.kind = GenerationKind::RegionGuided;
        req.count = 1;
        req.regions.push(RegionPrompt { mask: mask.clone(), text: "a red barn".into() });
        let out = &mock_generate(&req)[0];
        let color = region_color("a red barn");
        let texture = value_noise(RES, texture_seed("plains", 1, 0));
        for y in 0..RES.height {
            for x in 0..RES.width {
                let expect = if mask.get(x, y) { color } else { texture.get(x, y) };
                assert_eq!(out.get(x, y), expect);
            }
        }
    }

    #[test]
    fn blend_with_zero_mask_keeps_init() {
        let init = value_noise(RES, 77);
        let mut req = GenerationRequest::text2img("", 3, RES);
        req.kind = GenerationKind::Blend;
        req.count = 2;
        req.init_image = Some(init.clone());
        req.mask_image = Some(GrayImage::filled(RES.width, RES.height, 0));
        assert!(mock_generate(&req).iter().all(|o| *o == init));
        req.mask_image = Some(GrayImage::filled(RES.width, RES.height, 255));
        assert_eq!(mock_generate(&req)[0], value_noise(RES, texture_seed("", 3, 0)));
    }

    #[test]
    fn img2img_strength_extremes() {
        let init = RgbImage::filled(RES.width, RES.height, [200, 10, 90]);
        let mut req = GenerationRequest::text2img("fog", 2, RES);
        req.kind = GenerationKind::Img2img;
        req.count = 1;
        req.init_image = Some(init.clone());
        req.strength = Some(0.0);
        assert_eq!(mock_generate(&req)[0], init);
        req.strength = Some(1.0);
        assert_eq!(mock_generate(&req)[0], value_noise(RES, texture_seed("fog", 2, 0)));
    }
}
