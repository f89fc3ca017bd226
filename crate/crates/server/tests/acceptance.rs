//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs entirely on the mock backend.

mod common;

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use worldsmith_core::backend::wire::{decode_request, encode_request, WireRequest};
use worldsmith_core::backend::{
    mock_generate, region_color, submit, wait_for_job, GenerationKind, GenerationRequest, HttpBackend, RegionPrompt,
    DEFAULT_BATCH_COUNT,
};
use worldsmith_core::compositor::{build_blend_mask, gaussian_blur, gaussian_kernel, make_blend_plan, Resample};
use worldsmith_core::mask::{
    compose_segmentation, convex_hull, extract_binary_masks, fill_polygon, rasterize_hull, rasterize_region, IPoint,
};
use worldsmith_core::model::{
    BrushAction, ImageId, Point, RegionId, RegionSpec, SessionConfig, SketchLayer, WorldSession,
    DEFAULT_GENERATION_RESOLUTION, DEFAULT_TILE_COUNT, REGION_PALETTE,
};
use worldsmith_core::raster::{BinaryMask, GrayImage, Plane, RgbImage, Size};
use worldsmith_core::telemetry::{
    code_prompt, parse_ndjson, transition_matrix, Code, CodingLexicon, EventKind, InteractionEvent,
};
use worldsmith_oracles::geometry::{brute_force_hull, polygon_pixels, random_points};
use worldsmith_oracles::tree::{compare, engine_replay, random_script, RefTree, Step};
use worldsmith_oracles::{blur, markov};
use worldsmith_server::replay::{compare_sessions, config_of, replay, ApiClient};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn bits(mask: &BinaryMask) -> Vec<bool> {
    (0..mask.height()).flat_map(|y| (0..mask.width()).map(move |x| (x, y))).map(|(x, y)| mask.get(x, y)).collect()
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let n = rng.random_range(10..=500);
        // small ranges force duplicates and collinear runs
        let range = if i % 4 == 0 { 6 } else { 1 << 20 };
        let raw = random_points(&mut rng, n, range);
        let pts: Vec<IPoint> = raw.iter().map(|&(x, y)| IPoint::new(x, y)).collect();
        let got: Vec<(i64, i64)> = convex_hull(&pts).unwrap().iter().map(|p| (p.x, p.y)).collect();
        ensure!(got == brute_force_hull(&raw), "hull mismatch on set {i} ({n} points)");
    }
    let size = Size::new(64, 64);
    for i in 0..100 {
        let n = rng.random_range(3..=12);
        let raw: Vec<(i64, i64)> = (0..n).map(|_| (rng.random_range(-8..72), rng.random_range(-8..72))).collect();
        let lasso = fill_polygon(&raw.iter().map(|&(x, y)| IPoint::new(x, y)).collect::<Vec<_>>(), size);
        ensure!(bits(&lasso) == polygon_pixels(&raw, 64, 64), "lasso fill mismatch on polygon {i}");
        let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let hull = brute_force_hull(&raw);
        if hull.len() >= 3 {
            ensure!(bits(&rasterize_hull(&pts, size)) == polygon_pixels(&hull, 64, 64), "hull fill mismatch on polygon {i}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("1000 hulls, 100 lasso and hull fills in {:.1}s", elapsed.as_secs_f64()))
}

fn blur_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let plane = match i % 5 {
            0 => Plane::filled(64, 64, rng.random_range(-2.0..2.0)),
            1 => {
                let (px, py) = (rng.random_range(0..64), rng.random_range(0..64));
                Plane::from_fn(64, 64, |x, y| if (x, y) == (px, py) { 1.0 } else { 0.0 })
            }
            2 => Plane::from_fn(64, 64, |x, y| if (x / 8 + y / 8) % 2 == 0 { 1.0 } else { 0.0 }),
            _ => Plane::from_fn(64, 64, |_, _| rng.random_range(0.0..1.0)),
        };
        let sigma = [0.5, 1.0, 2.5, 4.0, 7.3][i % 5] + rng.random_range(0.0..1.0);
        let fast = gaussian_blur(&plane, sigma).unwrap();
        let dense = blur::dense_gaussian(plane.values(), 64, 64, sigma);
        let err = fast.values().iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        ensure!(err <= 1e-6, "plane {i} sigma {sigma}: L-inf {err:e}");
        let same = gaussian_blur(&plane, 0.0).unwrap();
        ensure!(
            same.values().iter().zip(plane.values()).all(|(a, b)| a.to_bits() == b.to_bits()),
            "sigma 0 changed plane {i}"
        );
    }
    Ok(format!("50 planes, worst L-inf {worst:.1e}"))
}

fn segmentation_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let size = Size::new(48, 48);
    for set in 0..500 {
        let count = rng.random_range(1..=6);
        let regions: Vec<RegionSpec> = (0..count)
            .map(|i| {
                let pts: Vec<Point> = (0..rng.random_range(3..8))
                    .map(|_| Point::new(rng.random_range(-4.0..52.0), rng.random_range(-4.0..52.0)))
                    .collect();
                let action = match rng.random_range(0..3) {
                    0 => BrushAction::hull(pts),
                    1 => BrushAction::lasso(pts),
                    _ => BrushAction::pencil(pts, rng.random_range(1..6)),
                };
                RegionSpec {
                    region_id: RegionId(format!("r{i}")),
                    color: REGION_PALETTE[i],
                    description: format!("region {i}"),
                    geometry: vec![action],
                }
            })
            .collect();
        let seg = compose_segmentation(&regions, size).map_err(|e| e.to_string())?;
        let masks = extract_binary_masks(&seg);
        ensure!(masks.len() == regions.len(), "set {set}: {} masks for {} regions", masks.len(), regions.len());
        let mut painted = BinaryMask::new(size);
        for r in &regions {
            painted.union_with(&rasterize_region(r, size).map_err(|e| e.to_string())?);
        }
        let mut union = BinaryMask::new(size);
        for (i, a) in masks.iter().enumerate() {
            for b in &masks[i + 1..] {
                ensure!(!a.mask.intersects(&b.mask), "set {set}: masks overlap");
            }
            union.union_with(&a.mask);
        }
        ensure!(union == painted, "set {set}: union differs from painted pixels");
    }
    Ok("500 region sets partition exactly".into())
}

fn blend_plan_figures() -> Outcome {
    for gap in [0u32, 8, 32, 100] {
        let config = SessionConfig { grid_gap: Some(gap), ..Default::default() };
        let mut session = WorldSession::create(&config, 0).map_err(|e| e.to_string())?;
        let canvas = session.canvas_size;
        let pre = build_blend_mask(&session);
        let ones = pre.values().iter().filter(|&&v| v == 1.0).count() as u64;
        let tiles: u64 = session.tiles.iter().map(|t| t.rect.area()).sum();
        ensure!(ones == canvas.area() - tiles, "gap {gap}: {ones} ones, expected {}", canvas.area() - tiles);
        ensure!(pre.values().iter().all(|&v| v == 0.0 || v == 1.0), "gap {gap}: pre-blur mask not binary");

        let mut images: HashMap<ImageId, Arc<RgbImage>> = HashMap::new();
        for (i, t) in session.tiles.iter_mut().enumerate() {
            let img = RgbImage::filled(t.rect.w, t.rect.h, [40 * i as u8, 90, 160]);
            let (r, _) = worldsmith_core::store::image_ref_for(&img);
            images.insert(r.image_id.clone(), Arc::new(img));
            t.current_image = Some(r);
        }
        let plan = make_blend_plan(&session, &images, None, Resample::Bilinear).map_err(|e| e.to_string())?;
        ensure!(plan.blend_mask.values().iter().all(|v| (0.0..=1.0).contains(v)), "gap {gap}: blurred value outside [0,1]");
        let sharp = make_blend_plan(&session, &images, Some(0.0), Resample::Bilinear).map_err(|e| e.to_string())?;
        let plan_ones = sharp.blend_mask.values().iter().filter(|&&v| v == 1.0).count() as u64;
        let placed: u64 = sharp.tiles.iter().map(|t| t.rect.area()).sum();
        ensure!(plan_ones == sharp.size().area() - placed, "gap {gap}: plan ones {plan_ones}");
    }
    for sigma in [0.3, 1.0, 8.0, 32.0] {
        let dc: f64 = gaussian_kernel(sigma).iter().sum();
        ensure!((dc - 1.0).abs() <= 1e-6, "kernel gain {dc} at sigma {sigma}");
        let flat = gaussian_blur(&Plane::filled(64, 64, 0.37), sigma).unwrap();
        ensure!(flat.values().iter().all(|v| (v - 0.37).abs() <= 1e-6), "constant plane changed at sigma {sigma}");
    }
    ensure!(DEFAULT_GENERATION_RESOLUTION == Size::new(512, 512), "resolution {DEFAULT_GENERATION_RESOLUTION}");
    ensure!(DEFAULT_TILE_COUNT == 4, "tile count {DEFAULT_TILE_COUNT}");
    ensure!(DEFAULT_BATCH_COUNT == 12, "batch count {DEFAULT_BATCH_COUNT}");
    let s = WorldSession::create(&SessionConfig::default(), 0).map_err(|e| e.to_string())?;
    ensure!(s.tiles.len() == 4 && s.generation_resolution == Size::new(512, 512), "default session shape");
    Ok("mask counts exact for 4 gaps, unit DC gain, defaults 512x512 / 4 tiles / 12 images".into())
}

fn tree_semantics() -> Outcome {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let script = random_script(&mut rng, 200);
        let mut reference = RefTree::new();
        script.iter().for_each(|s| reference.apply(s));
        let (tree, created) = engine_replay(&script);
        compare(&tree, &created, &reference).map_err(|e| format!("script {seed}: {e}"))?;

        // an immediate second generation has unchanged inputs
        let doubled: Vec<Step> = script
            .iter()
            .flat_map(|s| match s {
                Step::Generate { .. } => vec![s.clone(), Step::Generate { results: 1 }],
                _ => vec![s.clone()],
            })
            .collect();
        let (tree2, _) = engine_replay(&doubled);
        ensure!(tree2.len() == tree.len(), "script {seed}: regeneration added {} nodes", tree2.len() - tree.len());
    }
    for n in [1usize, 10, 50] {
        let script: Vec<Step> =
            (0..n).flat_map(|i| [Step::SetPrompt(format!("p{i}")), Step::Generate { results: 1 }]).collect();
        let (tree, _) = engine_replay(&script);
        ensure!(tree.len() - 1 == n, "{n} distinct generations made {} nodes", tree.len() - 1);
    }
    Ok("5 x 200-step scripts isomorphic; regeneration adds no node; N generations make N nodes".into())
}

fn random_request(rng: &mut ChaCha8Rng) -> GenerationRequest {
    let kind = GenerationKind::ALL[rng.random_range(0..GenerationKind::ALL.len())];
    let (w, h) = (rng.random_range(1..24), rng.random_range(1..24));
    let size = Size::new(w, h);
    let prompt: String = (0..rng.random_range(0..30)).map(|_| char::from_u32(rng.random_range(32..0x3000)).unwrap_or('?')).collect();
    let mask = |rng: &mut ChaCha8Rng| {
        let mut m = BinaryMask::new(size);
        for _ in 0..rng.random_range(1..(w * h).max(2)) {
            m.set(rng.random_range(0..w), rng.random_range(0..h), true);
        }
        m
    };
    let regions = match kind {
        GenerationKind::RegionGuided => {
            (0..rng.random_range(1..4)).map(|i| RegionPrompt { mask: mask(rng), text: format!("r{i}") }).collect()
        }
        GenerationKind::Img2img if rng.random_bool(0.5) => vec![RegionPrompt { mask: mask(rng), text: "lake".into() }],
        _ => Vec::new(),
    };
    let raw: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
    let gray: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
    GenerationRequest {
        kind,
        prompt,
        regions,
        init_image: matches!(kind, GenerationKind::Img2img | GenerationKind::Blend).then(|| RgbImage::from_raw(w, h, raw).unwrap()),
        mask_image: (kind == GenerationKind::Blend).then(|| GrayImage::from_raw(w, h, gray).unwrap()),
        strength: rng.random_bool(0.5).then(|| rng.random_range(0.0..=1.0)),
        seed: rng.random(),
        count: rng.random_range(1..6),
        resolution: size,
    }
}

struct ChildGuard(Child);

impl Drop for ChildGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Starts the mock in a separate process and returns its base URL.
fn mock_process() -> Result<(ChildGuard, String), String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_worldsmith"))
        .args(["mock-backend", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().expect("piped");
    let guard = ChildGuard(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
    let url = line.trim().strip_prefix("listening on ").ok_or_else(|| format!("unexpected output `{line}`"))?;
    Ok((guard, url.to_owned()))
}

fn protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let requests: Vec<GenerationRequest> = (0..1000).map(|_| random_request(&mut rng)).collect();
    for (i, req) in requests.iter().enumerate() {
        ensure!(req.validate().is_ok(), "generator produced invalid request {i}");
        let text = serde_json::to_string(&encode_request(req)).map_err(|e| e.to_string())?;
        let wire: WireRequest = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let back = decode_request(&wire).map_err(|e| e.to_string())?;
        ensure!(&back == req && back.digest() == req.digest(), "round trip changed request {i} ({:?})", req.kind);
    }

    let (_child, url) = mock_process()?;
    let remote = HttpBackend::new(url, Duration::from_secs(30));
    for (i, req) in requests.iter().take(40).enumerate() {
        let local: Vec<Vec<u8>> = mock_generate(req).iter().map(RgbImage::encode_png).collect();
        let again: Vec<Vec<u8>> = mock_generate(req).iter().map(RgbImage::encode_png).collect();
        ensure!(local == again, "request {i}: in-process output not repeatable");
        let id = submit(&remote, req.clone()).map_err(|e| e.to_string())?;
        let job = wait_for_job(&remote, &id, WAIT).map_err(|e| e.to_string())?;
        let other: Vec<Vec<u8>> = job.images.iter().map(|img| img.encode_png()).collect();
        ensure!(local == other, "request {i}: separate process produced different PNGs");
    }

    for (i, req) in requests.iter().filter(|r| r.kind == GenerationKind::RegionGuided).take(100).enumerate() {
        let mut plain = req.clone();
        plain.kind = GenerationKind::Text2img;
        plain.regions.clear();
        let (painted, base) = (mock_generate(req), mock_generate(&plain));
        // later regions paint over earlier ones
        let mut expected: Vec<Option<[u8; 3]>> = vec![None; req.resolution.area() as usize];
        for r in &req.regions {
            for (x, y) in r.mask.iter_set() {
                expected[(y * req.resolution.width + x) as usize] = Some(region_color(&r.text));
            }
        }
        for (a, b) in painted.iter().zip(&base) {
            for y in 0..req.resolution.height {
                for x in 0..req.resolution.width {
                    let want = expected[(y * req.resolution.width + x) as usize].unwrap_or(b.get(x, y));
                    ensure!(a.get(x, y) == want, "region request {i}: pixel ({x},{y})");
                }
            }
        }
    }
    Ok("1000 round trips exact; 40 requests byte-identical across processes; region paint exact".into())
}

fn sketch_json(size: Size) -> Value {
    let mut sketch = SketchLayer::blank(size);
    for i in 0..size.width.min(size.height) {
        sketch.paint(i, i, [20, 160, 40]);
        sketch.paint(size.width - 1 - i, i, [20, 60, 200]);
    }
    serde_json::to_value(&sketch).unwrap()
}

/// Drives a varied session through the API without fixed seeds.
fn record_session(c: &ApiClient) -> Result<String, String> {
    let e = |e: worldsmith_server::replay::ReplayError| e.to_string();
    let s = c
        .create_session(&serde_json::from_value(json!({
            "canvas_size": { "width": 256, "height": 192 },
            "generation_resolution": { "width": 48, "height": 48 },
            "grid_gap": 16,
            "tile_count": 4
        }))
        .unwrap())
        .map_err(e)?;
    let sid = s["session_id"].as_str().unwrap().to_owned();
    let gen = |tile: &str, body: Value| -> Result<Value, String> {
        let job = c.expect("POST", &format!("/sessions/{sid}/tiles/{tile}/generate"), &body).map_err(e)?;
        c.wait_job(job["job_id"].as_str().unwrap(), WAIT).map_err(e)
    };
    let tile_path = |tile: &str, rest: &str| format!("/sessions/{sid}/tiles/{tile}/{rest}");

    patch_inputs(c, &sid, "tile-0", json!({ "scene_prompt": "Mountain range running north to south" }));
    let first = gen("tile-0", json!({ "count": 3 }))?;
    patch_inputs(c, &sid, "tile-0", json!({ "regions": [
        region("r0", [255, 0, 0], "glacier lake", 4.0, 4.0, 14.0),
        region("r1", [0, 255, 0], "pine forest", 20.0, 10.0, 20.0)
    ] }));
    gen("tile-0", json!({ "count": 2 }))?;
    gen("tile-0", json!({ "count": 1 }))?;
    c.expect("POST", &tile_path("tile-0", "tree/select"), &json!({ "node_id": 1 })).map_err(e)?;
    patch_inputs(c, &sid, "tile-0", json!({ "scene_prompt": "volcanic ridge", "seed": 77 }));
    gen("tile-0", json!({}))?;
    c.expect("POST", &tile_path("tile-0", "tree/nodes"), &json!({ "at": 2, "mode": "copy" })).map_err(e)?;
    patch_inputs(c, &sid, "tile-0", json!({ "img2img_strength": 0.4, "seed": null }));
    let last0 = gen("tile-0", json!({ "count": 2 }))?;

    patch_inputs(c, &sid, "tile-1", json!({ "scene_prompt": "river delta", "sketch": sketch_json(Size::new(48, 48)) }));
    gen("tile-1", json!({ "count": 2 }))?;
    patch_inputs(c, &sid, "tile-1", json!({ "base_image": first["results"][1] }));
    let last1 = gen("tile-1", json!({ "count": 2 }))?;
    c.expect("POST", &tile_path("tile-1", "tree/nodes"), &json!({ "at": 0, "mode": "blank" })).map_err(e)?;

    patch_inputs(c, &sid, "tile-2", json!({ "regions": [region("r0", [0, 0, 255], "desert dunes", 0.0, 0.0, 30.0)] }));
    let last2 = gen("tile-2", json!({ "count": 1 }))?;
    patch_inputs(c, &sid, "tile-3", json!({ "scene_prompt": "coastal city, top down" }));
    let last3 = gen("tile-3", json!({ "count": 1 }))?;

    for (tile, job) in [("tile-0", &last0), ("tile-1", &last1), ("tile-2", &last2), ("tile-3", &last3)] {
        let body = json!({ "image_id": job["results"][0]["image_id"] });
        c.expect("PUT", &tile_path(tile, "current-image"), &body).map_err(e)?;
    }
    c.expect("PATCH", &tile_path("tile-3", "rect"), &json!({ "x": 150, "y": 100, "w": 90, "h": 80 })).map_err(e)?;
    c.expect("PUT", &format!("/sessions/{sid}/grid-gap"), &json!({ "grid_gap": 24 })).map_err(e)?;
    c.expect("PUT", &format!("/sessions/{sid}/blend-prompt"), &json!({ "prompt": "a single continent" })).map_err(e)?;
    let blend = c.expect("POST", &format!("/sessions/{sid}/blend"), &json!({ "count": 2 })).map_err(e)?;
    c.wait_job(blend["job_id"].as_str().unwrap(), WAIT).map_err(e)?;
    Ok(sid)
}

fn full_replay() -> Outcome {
    let (dir_a, dir_b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (a, _) = start(dir_a.path());
    let (b, _) = start(dir_b.path());
    let sid = record_session(&a.client)?;
    let events = parse_ndjson(&a.client.events(&sid).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let config = config_of(&a.client.session(&sid).map_err(|e| e.to_string())?);
    let replayed = replay(&b.client, &config, &events, WAIT).map_err(|e| e.to_string())?;
    compare_sessions((&a.client, &sid), (&b.client, &replayed)).map_err(|e| e.to_string())?;

    let again = parse_ndjson(&b.client.events(&replayed).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let shape = |evs: &[InteractionEvent]| evs.iter().map(|e| (e.kind, e.tile_id.clone())).collect::<Vec<_>>();
    ensure!(shape(&events) == shape(&again), "replayed log has a different action sequence");
    let images: usize = (0..4)
        .map(|t| tree(&b.client, &replayed, &format!("tile-{t}"))["nodes"].as_array().unwrap().iter().map(|n| n["results"].as_array().unwrap().len()).sum::<usize>())
        .sum();
    Ok(format!("{} events replayed; trees, {images} tile images and blend results identical", events.len()))
}

fn telemetry_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let seq: Vec<EventKind> = (0..5000).map(|_| EventKind::ALL[rng.random_range(0..8)]).collect();
    for collapse in [false, true] {
        let m = worldsmith_core::telemetry::transition_matrix_from_sequence(seq.clone(), &EventKind::ALL, collapse);
        for (k, row) in m.kinds.iter().zip(&m.rows) {
            let s: f64 = row.iter().sum();
            ensure!((s - 1.0).abs() <= 1e-9, "row {k} sums to {s}");
        }
    }

    let codes = code_prompt("Mountain range running north to south", &CodingLexicon::builtin());
    ensure!(codes == [Code::Action, Code::Positional].into(), "quoted phrase coded as {codes:?}");

    let kinds = [EventKind::ModifyText, EventKind::ModifyRegion, EventKind::RunDiffusion];
    let truth = vec![vec![0.0, 0.15, 0.85], vec![0.1, 0.0, 0.9], vec![0.8, 0.2, 0.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states = markov::simulate(&truth, 0, 500, &mut rng);
    let events: Vec<InteractionEvent> = states
        .iter()
        .enumerate()
        .map(|(i, &s)| InteractionEvent {
            event_id: i as u64 + 1,
            timestamp: i as u64,
            session_id: "synthetic".into(),
            tile_id: Some("tile-0".into()),
            kind: kinds[s],
            payload: json!({}),
        })
        .collect();
    let m = transition_matrix(&events, &kinds, true);
    let err = m.rows.iter().flatten().zip(truth.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(err <= 0.05, "Markov chain recovered with L-inf {err:.4}");
    Ok(format!("rows stochastic; phrase coded {{Action, Positional}}; Markov L-inf {err:.4} at 500 events"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("geometry oracles", geometry),
        ("blur correctness", blur_correctness),
        ("segmentation partition", segmentation_partition),
        ("blend plan figures", blend_plan_figures),
        ("tree semantics", tree_semantics),
        ("mock backend and protocol", protocol),
        ("full replay", full_replay),
        ("telemetry analytics", telemetry_analytics),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
