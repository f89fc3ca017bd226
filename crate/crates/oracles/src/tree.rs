//! Reference interpreter for tile history scripts, plus a driver that runs
//! the same script through the engine's incremental tree.
//!
//! Nodes are addressed by creation ordinal (the root is 0) so a script is
//! meaningful to both sides.

use rand::Rng;
use worldsmith_core::model::{BrushAction, GenerationInputs, ImageId, ImageRef, Point};
use worldsmith_core::tree::{ManualMode, NodeId, TileTree};

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    SetPrompt(String),
    SetSeed(Option<u64>),
    AddRegion { description: String, x: u32, y: u32, side: u32 },
    ClearRegions,
    Generate { results: usize },
    Manual { at: usize, copy: bool },
    Select { at: usize },
}

#[derive(Debug, Clone)]
pub struct RefNode {
    pub parent: Option<usize>,
    pub inputs: GenerationInputs,
    pub results: Vec<ImageRef>,
    pub children: Vec<usize>,
}

/// Tree kept as a plain vector in creation order, with the working inputs
/// of the editor alongside.
#[derive(Debug, Clone)]
pub struct RefTree {
    pub nodes: Vec<RefNode>,
    pub selected: usize,
    pub working: GenerationInputs,
    next_image: u64,
}

impl Default for RefTree {
    fn default() -> Self {
        Self::new()
    }
}

fn fake_image(n: u64) -> ImageRef {
    ImageRef { image_id: ImageId(format!("{n:064x}")), width: 8, height: 8 }
}

fn square(x: u32, y: u32, side: u32) -> Vec<BrushAction> {
    let (x, y, s) = (x as f64, y as f64, side as f64);
    vec![BrushAction::lasso(vec![
        Point { x, y },
        Point { x: x + s, y },
        Point { x: x + s, y: y + s },
        Point { x, y: y + s },
    ])]
}

/// Applies an input edit to a working copy; shared by both interpreters.
pub fn edit(inputs: &mut GenerationInputs, step: &Step) {
    match step {
        Step::SetPrompt(p) => inputs.scene_prompt = p.clone(),
        Step::SetSeed(s) => inputs.seed = *s,
        Step::AddRegion { description, x, y, side } => {
            // palette exhaustion leaves the inputs unchanged
            let _ = inputs.add_region(description.clone(), square(*x, *y, *side));
        }
        Step::ClearRegions => inputs.regions.clear(),
        _ => {}
    }
}

impl RefTree {
    pub fn new() -> Self {
        let root = RefNode { parent: None, inputs: GenerationInputs::default(), results: Vec::new(), children: Vec::new() };
        Self { nodes: vec![root], selected: 0, working: GenerationInputs::default(), next_image: 0 }
    }

    fn push_child(&mut self, parent: usize, inputs: GenerationInputs) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RefNode { parent: Some(parent), inputs, results: Vec::new(), children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn apply(&mut self, step: &Step) {
        match step {
            Step::Generate { results } => {
                let imgs: Vec<ImageRef> = (0..*results).map(|k| fake_image(self.next_image + k as u64)).collect();
                self.next_image += *results as u64;
                let target = if self.nodes[self.selected].inputs == self.working {
                    self.selected
                } else {
                    self.push_child(self.selected, self.working.clone())
                };
                self.nodes[target].results.extend(imgs);
                self.selected = target;
            }
            Step::Manual { at, copy } => {
                let at = at % self.nodes.len();
                let inputs = if *copy { self.nodes[at].inputs.clone() } else { GenerationInputs::default() };
                self.selected = self.push_child(at, inputs);
                self.working = self.nodes[self.selected].inputs.clone();
            }
            Step::Select { at } => {
                self.selected = at % self.nodes.len();
                self.working = self.nodes[self.selected].inputs.clone();
            }
            edit_step => edit(&mut self.working, edit_step),
        }
    }
}

/// Runs a script through the engine, returning the tree and its node ids in
/// creation order.
pub fn engine_replay(script: &[Step]) -> (TileTree, Vec<NodeId>) {
    let mut tree = TileTree::new(0);
    let mut created = vec![tree.root_id()];
    let mut working = GenerationInputs::default();
    let mut next_image = 0u64;
    for (t, step) in script.iter().enumerate() {
        let now = t as u64 + 1;
        match step {
            Step::Generate { results } => {
                let imgs: Vec<ImageRef> = (0..*results).map(|k| fake_image(next_image + k as u64)).collect();
                next_image += *results as u64;
                let rec = tree.record_generation(&working, next_image, imgs, now).expect("non-empty results");
                if rec.created {
                    created.push(rec.node_id);
                }
            }
            Step::Manual { at, copy } => {
                let at = created[at % created.len()];
                let mode = if *copy { ManualMode::Copy } else { ManualMode::Blank };
                let id = tree.add_node_manual(at, mode, now).expect("known node");
                created.push(id);
                working = tree.node(id).unwrap().inputs().clone();
            }
            Step::Select { at } => {
                working = tree.select_node(created[at % created.len()]).expect("known node");
            }
            edit_step => edit(&mut working, edit_step),
        }
    }
    (tree, created)
}

/// Checks that the engine tree matches the reference node for node:
/// same parent links, same ordered children, equal inputs and results, and
/// the same selection.
pub fn compare(engine: &TileTree, created: &[NodeId], reference: &RefTree) -> Result<(), String> {
    if engine.len() != reference.nodes.len() || created.len() != reference.nodes.len() {
        return Err(format!("node count {} vs reference {}", engine.len(), reference.nodes.len()));
    }
    engine.check_invariants().map_err(|e| e.to_string())?;
    let ordinal = |id: NodeId| created.iter().position(|&c| c == id);
    for (i, (&id, r)) in created.iter().zip(&reference.nodes).enumerate() {
        let node = engine.node(id).map_err(|e| e.to_string())?;
        if node.inputs() != &r.inputs {
            return Err(format!("node #{i}: inputs differ"));
        }
        if node.results != r.results {
            return Err(format!("node #{i}: {} results vs {}", node.results.len(), r.results.len()));
        }
        let kids: Vec<Option<usize>> = node.children.iter().map(|&c| ordinal(c)).collect();
        let want: Vec<Option<usize>> = r.children.iter().map(|&c| Some(c)).collect();
        if kids != want {
            return Err(format!("node #{i}: children {kids:?} vs {want:?}"));
        }
    }
    if ordinal(engine.selected_id()) != Some(reference.selected) {
        return Err("selection differs".into());
    }
    Ok(())
}

const PROMPTS: [&str; 5] = ["a castle on a hill", "volcano island", "a port town at dusk", "frozen lake", ""];
const REGIONS: [&str; 4] = ["a dragon", "pine forest", "river delta", "lighthouse"];

/// Random script that mixes edits, generations, manual nodes and
/// selections. A small prompt vocabulary makes unchanged regenerations common.
pub fn random_script<R: Rng>(rng: &mut R, steps: usize) -> Vec<Step> {
    (0..steps)
        .map(|_| match rng.random_range(0..100) {
            0..=19 => Step::SetPrompt(PROMPTS[rng.random_range(0..PROMPTS.len())].to_owned()),
            20..=24 => Step::SetSeed(if rng.random_bool(0.5) { Some(rng.random_range(0..4)) } else { None }),
            25..=34 => Step::AddRegion {
                description: REGIONS[rng.random_range(0..REGIONS.len())].to_owned(),
                x: rng.random_range(0..40),
                y: rng.random_range(0..40),
                side: rng.random_range(2..20),
            },
            35..=39 => Step::ClearRegions,
            40..=69 => Step::Generate { results: rng.random_range(1..4) },
            70..=79 => Step::Manual { at: rng.random_range(0..1000), copy: rng.random_bool(0.5) },
            _ => Step::Select { at: rng.random_range(0..1000) },
        })
        .collect()
}
