//! Offline analysis of exported event logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use worldsmith_core::telemetry::{
    code_prompt, prompt_stats, transition_matrix, Code, CodingLexicon, EventKind, InteractionEvent, PromptStats,
    TransitionMatrix,
};

#[derive(Debug, Clone, Serialize)]
pub struct CodeRow {
    pub code: Code,
    /// Distinct prompts tagged with the code.
    pub prompts: usize,
    pub share: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub transitions: TransitionMatrix,
    pub codes: Vec<CodeRow>,
    pub coded_prompts: usize,
    pub stats: PromptStats,
}

/// Distinct scene prompts and region descriptions in the log, per tile.
pub fn distinct_prompts(events: &[InteractionEvent]) -> BTreeSet<(Option<String>, String)> {
    let mut out = BTreeSet::new();
    for e in events {
        let tile = e.tile_id.as_ref().map(|t| t.0.clone());
        match e.kind {
            EventKind::ModifyText => {
                if let Some(s) = e.payload["scene_prompt"].as_str().filter(|s| !s.is_empty()) {
                    out.insert((tile, s.to_owned()));
                }
            }
            EventKind::ModifyRegion => {
                for r in e.payload["regions"].as_array().into_iter().flatten() {
                    if let Some(d) = r["description"].as_str().filter(|s| !s.is_empty()) {
                        out.insert((tile.clone(), d.to_owned()));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Analyzes several logs together. Transitions are counted within each log
/// and summed, so no transition spans two sessions.
pub fn analyze(logs: &[Vec<InteractionEvent>], kinds: &[EventKind], collapse_runs: bool, lexicon: &CodingLexicon) -> Report {
    let mut sums = vec![vec![0u64; kinds.len()]; kinds.len()];
    for log in logs {
        let m = transition_matrix(log, kinds, collapse_runs);
        for (row, src) in sums.iter_mut().zip(&m.counts) {
            row.iter_mut().zip(src).for_each(|(c, s)| *c += s);
        }
    }
    let events: Vec<InteractionEvent> = logs.iter().flatten().cloned().collect();
    let events = &events[..];
    let prompts = distinct_prompts(events);
    let mut counts: BTreeMap<Code, usize> = Code::ALL.iter().map(|&c| (c, 0)).collect();
    for (_, p) in &prompts {
        for c in code_prompt(p, lexicon) {
            *counts.get_mut(&c).expect("all codes present") += 1;
        }
    }
    let n = prompts.len();
    let codes = counts
        .into_iter()
        .map(|(code, prompts)| CodeRow { code, prompts, share: if n == 0 { 0.0 } else { prompts as f64 / n as f64 } })
        .collect();
    Report { transitions: TransitionMatrix::from_counts(kinds.to_vec(), sums), codes, coded_prompts: n, stats: prompt_stats(events) }
}

impl Report {
    pub fn codes_csv(&self) -> String {
        let mut out = String::from("code,prompts,share\n");
        for r in &self.codes {
            writeln!(out, "{:?},{},{}", r.code, r.prompts, r.share).expect("string write");
        }
        out
    }

    pub fn stats_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "prompts": self.coded_prompts,
            "scene_words": self.stats.scene,
            "region_words": self.stats.region,
            "regions_per_tile": self.stats.regions_per_tile,
        }))
        .expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ev(id: u64, tile: &str, kind: EventKind, payload: serde_json::Value) -> InteractionEvent {
        InteractionEvent { event_id: id, timestamp: id, session_id: "s".into(), tile_id: Some(tile.into()), kind, payload }
    }

    #[test]
    fn codes_count_distinct_prompts() {
        let events = vec![
            ev(1, "a", EventKind::ModifyText, json!({ "scene_prompt": "a large castle" })),
            ev(2, "a", EventKind::ModifyText, json!({ "scene_prompt": "a large castle" })),
            ev(3, "b", EventKind::ModifyRegion, json!({ "regions": [{ "region_id": "r0", "description": "tiny boats, top down" }] })),
            ev(4, "b", EventKind::RunDiffusion, json!({})),
        ];
        let r = analyze(&[events], &EventKind::ALL, true, &CodingLexicon::builtin());
        assert_eq!(r.coded_prompts, 2);
        let get = |c| r.codes.iter().find(|row| row.code == c).unwrap().prompts;
        assert_eq!(get(Code::Size), 2);
        assert_eq!(get(Code::Perspective), 1);
        assert_eq!(get(Code::Style), 0);
        assert!(r.codes_csv().starts_with("code,prompts,share\nSize,2,1\n"));
    }

    #[test]
    fn transitions_do_not_cross_logs() {
        let a = vec![ev(1, "a", EventKind::ModifyText, json!({}))];
        let b = vec![ev(1, "a", EventKind::RunDiffusion, json!({}))];
        let r = analyze(&[a, b], &EventKind::ALL, true, &CodingLexicon::builtin());
        assert!(r.transitions.counts.iter().flatten().all(|&c| c == 0));
    }
}
