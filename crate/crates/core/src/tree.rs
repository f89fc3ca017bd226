//! Per-tile branching generation history.
//!
//! The tree is append-only. A generation whose inputs differ from the
//! selected node's snapshot becomes a new child of that node; otherwise the
//! results are appended to the selected node.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonicalize_inputs, CanonicalSnapshot, Digest};
use crate::model::{GenerationInputs, ImageRef};

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("a generation must produce at least one result")]
    NoResults,
    #[error("unsupported tree format_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid tree document: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManualMode {
    /// Duplicate the inputs of the node being branched from.
    Copy,
    /// Start from empty inputs.
    Blank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    inputs: GenerationInputs,
    snapshot: CanonicalSnapshot,
    pub results: Vec<ImageRef>,
    /// One seed per generation batch appended to this node.
    pub seeds: Vec<u64>,
    pub children: Vec<NodeId>,
    pub created_at: u64,
    pub label: String,
}

impl TreeNode {
    fn new(node_id: NodeId, parent_id: Option<NodeId>, inputs: GenerationInputs, created_at: u64) -> Self {
        let snapshot = canonicalize_inputs(&inputs);
        let label = inputs.label();
        Self { node_id, parent_id, inputs, snapshot, results: Vec::new(), seeds: Vec::new(), children: Vec::new(), created_at, label }
    }

    pub fn inputs(&self) -> &GenerationInputs {
        &self.inputs
    }

    pub fn snapshot(&self) -> &CanonicalSnapshot {
        &self.snapshot
    }

    pub fn digest(&self) -> &Digest {
        &self.snapshot.digest
    }

    /// First result, shown as the node's thumbnail.
    pub fn thumbnail(&self) -> Option<&ImageRef> {
        self.results.first()
    }
}

/// Layout hints for tree rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeHint {
    pub node_id: NodeId,
    pub depth: u32,
    pub sibling_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recorded {
    pub node_id: NodeId,
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileTree {
    nodes: BTreeMap<NodeId, TreeNode>,
    root_id: NodeId,
    selected_id: NodeId,
    next_id: u64,
}

impl Default for TileTree {
    fn default() -> Self {
        Self::new(0)
    }
}

impl TileTree {
    /// A tree holding only a root with empty inputs.
    pub fn new(now_ms: u64) -> Self {
        let root = TreeNode::new(NodeId(0), None, GenerationInputs::default(), now_ms);
        Self { nodes: BTreeMap::from([(NodeId(0), root)]), root_id: NodeId(0), selected_id: NodeId(0), next_id: 1 }
    }

    pub fn root_id(&self) -> NodeId {
        self.root_id
    }

    pub fn selected_id(&self) -> NodeId {
        self.selected_id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode, TreeError> {
        self.nodes.get(&id).ok_or(TreeError::UnknownNode(id))
    }

    pub fn selected(&self) -> &TreeNode {
        &self.nodes[&self.selected_id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values()
    }

    fn insert_child(&mut self, parent: NodeId, inputs: GenerationInputs, now_ms: u64) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(id, TreeNode::new(id, Some(parent), inputs, now_ms));
        self.nodes.get_mut(&parent).expect("parent exists").children.push(id);
        id
    }

    /// Records a finished generation against the selected node.
    pub fn record_generation(
        &mut self,
        inputs: &GenerationInputs,
        seed: u64,
        results: Vec<ImageRef>,
        now_ms: u64,
    ) -> Result<Recorded, TreeError> {
        self.record_generation_from(self.selected_id, inputs, seed, results, now_ms)
    }

    /// Like [`record_generation`](Self::record_generation) but compares
    /// against `base`, the node that was selected when the generation was
    /// submitted.
    pub fn record_generation_from(
        &mut self,
        base: NodeId,
        inputs: &GenerationInputs,
        seed: u64,
        results: Vec<ImageRef>,
        now_ms: u64,
    ) -> Result<Recorded, TreeError> {
        if results.is_empty() {
            return Err(TreeError::NoResults);
        }
        let base_node = self.node(base)?;
        let digest = canonicalize_inputs(inputs).digest;
        let (target, created) = if &digest == base_node.digest() {
            (base, false)
        } else {
            (self.insert_child(base, inputs.clone(), now_ms), true)
        };
        let node = self.nodes.get_mut(&target).expect("target exists");
        node.results.extend(results);
        node.seeds.push(seed);
        self.selected_id = target;
        Ok(Recorded { node_id: target, created })
    }

    /// Branches manually from `at`, selecting the new node.
    pub fn add_node_manual(&mut self, at: NodeId, mode: ManualMode, now_ms: u64) -> Result<NodeId, TreeError> {
        let inputs = match mode {
            ManualMode::Copy => self.node(at)?.inputs.clone(),
            ManualMode::Blank => {
                self.node(at)?;
                GenerationInputs::default()
            }
        };
        let id = self.insert_child(at, inputs, now_ms);
        self.selected_id = id;
        Ok(id)
    }

    /// Selects a node and returns an editable copy of its inputs.
    pub fn select_node(&mut self, id: NodeId) -> Result<GenerationInputs, TreeError> {
        let inputs = self.node(id)?.inputs.clone();
        self.selected_id = id;
        Ok(inputs)
    }

    pub fn depth(&self, id: NodeId) -> Result<u32, TreeError> {
        let mut depth = 0;
        let mut cur = self.node(id)?;
        while let Some(p) = cur.parent_id {
            cur = self.node(p)?;
            depth += 1;
        }
        Ok(depth)
    }

    pub fn hints(&self) -> Vec<NodeHint> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([(self.root_id, 0u32, 0u32)]);
        while let Some((id, depth, sibling_index)) = queue.pop_front() {
            out.push(NodeHint { node_id: id, depth, sibling_index });
            for (i, &c) in self.nodes[&id].children.iter().enumerate() {
                queue.push_back((c, depth + 1, i as u32));
            }
        }
        out
    }

    /// Structural checks: single root, consistent links, everything reachable.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let invalid = |m: String| Err(TreeError::Invalid(m));
        let roots: Vec<_> = self.nodes.values().filter(|n| n.parent_id.is_none()).map(|n| n.node_id).collect();
        if roots != [self.root_id] {
            return invalid(format!("expected exactly one root {}, found {roots:?}", self.root_id));
        }
        if !self.nodes.contains_key(&self.selected_id) {
            return invalid(format!("selected node {} does not exist", self.selected_id));
        }
        for node in self.nodes.values() {
            if let Some(p) = node.parent_id {
                let Some(parent) = self.nodes.get(&p) else {
                    return invalid(format!("{} has missing parent {p}", node.node_id));
                };
                if parent.children.iter().filter(|&&c| c == node.node_id).count() != 1 {
                    return invalid(format!("{p} does not list {} exactly once", node.node_id));
                }
            }
            for c in &node.children {
                match self.nodes.get(c) {
                    Some(child) if child.parent_id == Some(node.node_id) => {}
                    _ => return invalid(format!("{} lists {c} which does not point back", node.node_id)),
                }
            }
            if node.node_id.0 >= self.next_id {
                return invalid(format!("node id {} not below next id {}", node.node_id, self.next_id));
            }
        }
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([self.root_id]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                return invalid(format!("cycle through {id}"));
            }
            queue.extend(self.nodes[&id].children.iter().copied());
        }
        if seen.len() != self.nodes.len() {
            return invalid(format!("{} nodes unreachable from root", self.nodes.len() - seen.len()));
        }
        Ok(())
    }

    pub fn export(&self) -> TreeDocument {
        TreeDocument {
            format_version: TREE_FORMAT_VERSION,
            root_id: self.root_id,
            selected_id: self.selected_id,
            next_id: self.next_id,
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDocument {
                    node_id: n.node_id,
                    parent_id: n.parent_id,
                    inputs: n.inputs.clone(),
                    digest: n.snapshot.digest.clone(),
                    results: n.results.clone(),
                    seeds: n.seeds.clone(),
                    children: n.children.clone(),
                    created_at: n.created_at,
                    label: n.label.clone(),
                })
                .collect(),
        }
    }

    pub fn import(doc: TreeDocument) -> Result<Self, TreeError> {
        if doc.format_version != TREE_FORMAT_VERSION {
            return Err(TreeError::UnsupportedVersion(doc.format_version));
        }
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let snapshot = canonicalize_inputs(&n.inputs);
            if snapshot.digest != n.digest {
                return Err(TreeError::Invalid(format!("digest mismatch on {}", n.node_id)));
            }
            let node = TreeNode {
                node_id: n.node_id,
                parent_id: n.parent_id,
                inputs: n.inputs,
                snapshot,
                results: n.results,
                seeds: n.seeds,
                children: n.children,
                created_at: n.created_at,
                label: n.label,
            };
            if nodes.insert(node.node_id, node).is_some() {
                return Err(TreeError::Invalid(format!("duplicate node id {}", n.node_id)));
            }
        }
        if !nodes.contains_key(&doc.root_id) {
            return Err(TreeError::Invalid(format!("root {} missing", doc.root_id)));
        }
        let tree = Self { nodes, root_id: doc.root_id, selected_id: doc.selected_id, next_id: doc.next_id };
        tree.check_invariants()?;
        Ok(tree)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("tree serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument = serde_json::from_str(json).map_err(|e| TreeError::Invalid(e.to_string()))?;
        Self::import(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub format_version: u32,
    pub root_id: NodeId,
    pub selected_id: NodeId,
    pub next_id: u64,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub inputs: GenerationInputs,
    pub digest: Digest,
    pub results: Vec<ImageRef>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub children: Vec<NodeId>,
    pub created_at: u64,
    pub label: String,
}
