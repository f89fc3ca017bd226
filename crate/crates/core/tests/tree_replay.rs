use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use worldsmith_core::model::{GenerationInputs, ImageId, ImageRef};
use worldsmith_core::tree::{ManualMode, TileTree, TreeError};
use worldsmith_oracles::tree::{compare, engine_replay, random_script, RefTree, Step};

fn reference(script: &[Step]) -> RefTree {
    let mut r = RefTree::new();
    script.iter().for_each(|s| r.apply(s));
    r
}

#[test]
fn random_scripts_agree_with_reference() {
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let script = random_script(&mut rng, 200);
        let (tree, created) = engine_replay(&script);
        if let Err(e) = compare(&tree, &created, &reference(&script)) {
            panic!("seed {seed}: {e}");
        }
    }
}

#[test]
fn successive_edits_form_a_path() {
    let script: Vec<Step> = ["a", "b", "c"]
        .iter()
        .flat_map(|p| [Step::SetPrompt(p.to_string()), Step::Generate { results: 1 }])
        .collect();
    let (tree, created) = engine_replay(&script);
    compare(&tree, &created, &reference(&script)).unwrap();
    assert_eq!(tree.depth(tree.selected_id()).unwrap(), 3);
}

#[test]
fn distinct_generations_from_fresh_tile_add_one_node_each() {
    for n in [1usize, 5, 30] {
        let script: Vec<Step> = (0..n)
            .flat_map(|i| [Step::SetPrompt(format!("prompt {i}")), Step::Generate { results: 2 }, Step::Generate { results: 1 }])
            .collect();
        let (tree, _) = engine_replay(&script);
        assert_eq!(tree.len() - 1, n);
    }
}

#[test]
fn manual_node_receives_following_generation() {
    let script = vec![
        Step::SetPrompt("city".into()),
        Step::Generate { results: 1 },
        Step::Manual { at: 1, copy: false },
        Step::SetPrompt("neon sign".into()),
        Step::Generate { results: 1 },
    ];
    let (tree, created) = engine_replay(&script);
    compare(&tree, &created, &reference(&script)).unwrap();
    let last = tree.node(created[3]).unwrap();
    assert_eq!(last.parent_id, Some(created[2]));
}

fn fake(n: u64) -> ImageRef {
    ImageRef { image_id: ImageId(format!("{n:064x}")), width: 4, height: 4 }
}

fn random_tree(rng: &mut ChaCha8Rng, nodes: usize) -> TileTree {
    let mut tree = TileTree::new(0);
    let mut ids = vec![tree.root_id()];
    let mut k = 0;
    while tree.len() < nodes {
        let at = ids[rng.random_range(0..ids.len())];
        let id = if rng.random_bool(0.5) {
            tree.add_node_manual(at, if rng.random_bool(0.5) { ManualMode::Copy } else { ManualMode::Blank }, k).unwrap()
        } else {
            tree.select_node(at).unwrap();
            let inputs = GenerationInputs::with_prompt(format!("p{k}"));
            k += 1;
            tree.record_generation(&inputs, k, vec![fake(k)], k).unwrap().node_id
        };
        ids.push(id);
    }
    tree.select_node(ids[rng.random_range(0..ids.len())]).unwrap();
    tree
}

#[test]
fn export_import_round_trip_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let tree = random_tree(&mut rng, 50);
        let back = TileTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.export(), tree.export());
    }
}

#[test]
fn import_rejects_cycles_and_unknown_versions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_tree(&mut rng, 6);
    let mut doc = tree.export();
    doc.format_version = 2;
    assert_eq!(TileTree::import(doc), Err(TreeError::UnsupportedVersion(2)));

    let mut doc = tree.export();
    let leaf = doc.nodes.iter().position(|n| n.children.is_empty() && n.parent_id.is_some()).unwrap();
    let root = doc.root_id;
    let root_pos = doc.nodes.iter().position(|n| n.node_id == root).unwrap();
    let leaf_id = doc.nodes[leaf].node_id;
    doc.nodes[leaf].children.push(root);
    doc.nodes[root_pos].parent_id = Some(leaf_id);
    assert!(matches!(TileTree::import(doc), Err(TreeError::Invalid(_))));
}

#[test]
fn selection_returns_an_independent_copy() {
    let mut tree = TileTree::new(0);
    let inputs = GenerationInputs::with_prompt("ruins");
    let id = tree.record_generation(&inputs, 0, vec![fake(0)], 1).unwrap().node_id;
    let mut working = tree.select_node(id).unwrap();
    working.scene_prompt.push_str(" overgrown");
    assert_eq!(tree.select_node(id).unwrap(), inputs);
    assert!(tree.select_node(tree.root_id()).unwrap().is_empty());
}
