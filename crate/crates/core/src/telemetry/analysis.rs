//! Interaction-log analytics: action transition matrices and prompt length
//! statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::event::{EventKind, InteractionEvent};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub kinds: Vec<EventKind>,
    /// `counts[from][to]`
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts; rows without outgoing transitions are all zero.
    pub rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    /// Normalizes `counts[from][to]` row by row.
    pub fn from_counts(kinds: Vec<EventKind>, counts: Vec<Vec<u64>>) -> Self {
        let rows = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
            })
            .collect();
        Self { kinds, counts, rows }
    }

    pub fn get(&self, from: EventKind, to: EventKind) -> f64 {
        match (self.position(from), self.position(to)) {
            (Some(i), Some(j)) => self.rows[i][j],
            _ => 0.0,
        }
    }

    fn position(&self, kind: EventKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("from");
        for k in &self.kinds {
            out.push(',');
            out.push_str(k.as_str());
        }
        out.push('\n');
        for (k, row) in self.kinds.iter().zip(&self.rows) {
            out.push_str(k.as_str());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Transition ratios between action kinds in sequence order.
///
/// Events of other kinds are dropped first; with `collapse_runs`, repeats of
/// the same kind are merged into one run so only run boundaries count.
pub fn transition_matrix_from_sequence(
    sequence: impl IntoIterator<Item = EventKind>,
    kinds: &[EventKind],
    collapse_runs: bool,
) -> TransitionMatrix {
    let n = kinds.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut prev: Option<usize> = None;
    for kind in sequence {
        let Some(cur) = kinds.iter().position(|&k| k == kind) else {
            continue;
        };
        if let Some(p) = prev {
            if !(collapse_runs && p == cur) {
                counts[p][cur] += 1;
            }
        }
        prev = Some(cur);
    }
    TransitionMatrix::from_counts(kinds.to_vec(), counts)
}

pub fn transition_matrix(events: &[InteractionEvent], kinds: &[EventKind], collapse_runs: bool) -> TransitionMatrix {
    transition_matrix_from_sequence(events.iter().map(|e| e.kind), kinds, collapse_runs)
}

/// Whitespace-separated words with punctuation trimmed from their edges.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().filter(|w| !w.trim_matches(|c: char| !c.is_alphanumeric()).is_empty()).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub iqr: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary { count: 0, mean: 0.0, median: 0.0, iqr: 0.0 };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptStats {
    pub scene: Summary,
    pub region: Summary,
    pub regions_per_tile: Summary,
}

/// Prompt length statistics over a log.
///
/// Each distinct non-empty scene prompt per tile (from `modify_text`
/// payloads) and each distinct region description per tile and region id
/// (from `modify_region` payloads) counts once. Regions per tile is the
/// largest region list seen for each tile.
pub fn prompt_stats(events: &[InteractionEvent]) -> PromptStats {
    let mut scenes: BTreeSet<(Option<String>, String)> = BTreeSet::new();
    let mut regions: BTreeSet<(Option<String>, String, String)> = BTreeSet::new();
    let mut per_tile: BTreeMap<Option<String>, usize> = BTreeMap::new();
    for e in events {
        let tile = e.tile_id.as_ref().map(|t| t.0.clone());
        match e.kind {
            EventKind::ModifyText => {
                if let Some(text) = e.payload.get("scene_prompt").and_then(|v| v.as_str()) {
                    if !text.trim().is_empty() {
                        scenes.insert((tile, text.to_owned()));
                    }
                }
            }
            EventKind::ModifyRegion => {
                let Some(list) = e.payload.get("regions").and_then(|v| v.as_array()) else {
                    continue;
                };
                let slot = per_tile.entry(tile.clone()).or_insert(0);
                *slot = (*slot).max(list.len());
                for r in list {
                    let id = r.get("region_id").and_then(|v| v.as_str()).unwrap_or_default();
                    let desc = r.get("description").and_then(|v| v.as_str()).unwrap_or_default();
                    if !desc.trim().is_empty() {
                        regions.insert((tile.clone(), id.to_owned(), desc.to_owned()));
                    }
                }
            }
            _ => {}
        }
    }
    let scene_words: Vec<f64> = scenes.iter().map(|(_, t)| word_count(t) as f64).collect();
    let region_words: Vec<f64> = regions.iter().map(|(_, _, d)| word_count(d) as f64).collect();
    let counts: Vec<f64> = per_tile.values().map(|&n| n as f64).collect();
    PromptStats { scene: summarize(&scene_words), region: summarize(&region_words), regions_per_tile: summarize(&counts) }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::model::TileId;

    fn ev(kind: EventKind, tile: &str, payload: serde_json::Value) -> InteractionEvent {
        InteractionEvent { event_id: 0, timestamp: 0, session_id: "s".into(), tile_id: Some(TileId::from(tile)), kind, payload }
    }

    use EventKind::{ModifySketch as Sketch, ModifyText as Text, RunDiffusion as Run};

    #[test]
    fn single_transition() {
        let m = transition_matrix_from_sequence([Text, Sketch], &[Text, Sketch], true);
        assert_eq!(m.rows, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn runs_collapse() {
        let m = transition_matrix_from_sequence([Text, Text, Sketch, Text], &[Text, Sketch], true);
        assert_eq!(m.get(Text, Sketch), 1.0);
        assert_eq!(m.get(Sketch, Text), 1.0);
        assert_eq!(m.get(Text, Text), 0.0);
        let raw = transition_matrix_from_sequence([Text, Text, Sketch, Text], &[Text, Sketch], false);
        assert_eq!(raw.get(Text, Text), 0.5);
    }

    #[test]
    fn other_kinds_are_filtered_before_collapsing() {
        let m = transition_matrix_from_sequence([Text, Run, Text, Sketch], &[Text, Sketch], true);
        assert_eq!(m.counts, vec![vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn csv_layout() {
        let m = transition_matrix_from_sequence([Text, Sketch], &[Text, Sketch], true);
        assert_eq!(m.to_csv(), "from,modify_text,modify_sketch\nmodify_text,0,1\nmodify_sketch,0,0\n");
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count("  a castle , on a hill!  "), 5);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("~~ ..."), 0);
    }

    #[test]
    fn single_prompt_stats() {
        let s = prompt_stats(&[ev(Text, "t", json!({ "scene_prompt": "one two three four five" }))]);
        assert_eq!(s.scene, Summary { count: 1, mean: 5.0, median: 5.0, iqr: 0.0 });
    }

    #[test]
    fn median_of_three() {
        let s = summarize(&[19.0, 3.0, 11.0]);
        assert_eq!(s.median, 11.0);
        assert_eq!(s.iqr, 15.0 - 7.0);
    }

    #[test]
    fn region_stats_use_distinct_descriptions() {
        let regions = json!({ "regions": [
            { "region_id": "r0", "description": "a few trees" },
            { "region_id": "r1", "description": "river" },
        ]});
        let events = [ev(EventKind::ModifyRegion, "t", regions.clone()), ev(EventKind::ModifyRegion, "t", regions)];
        let s = prompt_stats(&events);
        assert_eq!(s.region.count, 2);
        assert_eq!(s.region.mean, 2.0);
        assert_eq!(s.regions_per_tile.median, 2.0);
    }
}
