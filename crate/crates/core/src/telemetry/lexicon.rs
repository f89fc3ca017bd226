//! Keyword lexicon for tagging prompts with content codes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Code {
    Size,
    Positional,
    Action,
    Quantifier,
    Style,
    Perspective,
}

impl Code {
    pub const ALL: [Code; 6] = [Code::Size, Code::Positional, Code::Action, Code::Quantifier, Code::Style, Code::Perspective];
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("keyword `{0}` must be lowercase")]
    NotLowercase(String),
    #[error("keyword `{keyword}` appears under both {first:?} and {second:?}")]
    Ambiguous { keyword: String, first: Code, second: Code },
    #[error("empty keyword under {0:?}")]
    Empty(Code),
    #[error("lexicon config: {0}")]
    Config(String),
}

const SIZE: &[&str] = &["large", "small", "high", "giant", "tall", "tiny", "big"];
const POSITIONAL: &[&str] = &[
    "surround", "above", "side by side", "around", "underneath", "middle", "on both sides", "bottom", "left", "corner",
    "north", "south", "next to", "in the carribbean", "contain", "in rome", "between", "split by", "inland", "west",
    "east",
];
const ACTION: &[&str] = &[
    "hunting", "selling", "erupting", "on fire", "sits", "running", "coming", "reach", "wear", "explosion", "smoking",
    "painting", "holding", "extending",
];
const QUANTIFIER: &[&str] = &["many", "few", "dense", "some", "a lot of", "lots of", "singular", "four", "two", "several"];
const STYLE: &[&str] = &[
    "concept art", "map", "anime", "cyberpunk", "1950", "antique", "cartoon", "japanese", "medieval", "fantasy",
    "futuristic", "cartographic", "geographical",
];
const PERSPECTIVE: &[&str] = &["2d", "top down", "horizontal", "skyline view", "view", "isometric", "bird"];

/// Lowercased alphanumeric runs; every other character separates words.
fn match_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingLexicon {
    entries: BTreeMap<Code, Vec<String>>,
    phrases: HashMap<Vec<String>, Code>,
    longest: usize,
}

impl CodingLexicon {
    /// The codebook shipped with the engine.
    pub fn builtin() -> Self {
        let lists = [
            (Code::Size, SIZE),
            (Code::Positional, POSITIONAL),
            (Code::Action, ACTION),
            (Code::Quantifier, QUANTIFIER),
            (Code::Style, STYLE),
            (Code::Perspective, PERSPECTIVE),
        ];
        let map = lists.into_iter().map(|(c, words)| (c, words.iter().map(|w| w.to_string()).collect())).collect();
        Self::new(map).expect("builtin lexicon is valid")
    }

    pub fn new(entries: BTreeMap<Code, Vec<String>>) -> Result<Self, LexiconError> {
        let mut phrases: HashMap<Vec<String>, Code> = HashMap::new();
        for (&code, words) in &entries {
            for word in words {
                if word.trim().is_empty() {
                    return Err(LexiconError::Empty(code));
                }
                if word.to_lowercase() != *word {
                    return Err(LexiconError::NotLowercase(word.clone()));
                }
                let key = match_tokens(word);
                if let Some(&first) = phrases.get(&key) {
                    if first != code {
                        return Err(LexiconError::Ambiguous { keyword: word.clone(), first, second: code });
                    }
                }
                phrases.insert(key, code);
            }
        }
        let longest = phrases.keys().map(Vec::len).max().unwrap_or(0);
        Ok(Self { entries, phrases, longest })
    }

    /// Adds keywords from a JSON object such as `{"Style": ["watercolor"]}`.
    pub fn extend_from_json(&self, json: &str) -> Result<Self, LexiconError> {
        let extra: BTreeMap<Code, Vec<String>> = serde_json::from_str(json).map_err(|e| LexiconError::Config(e.to_string()))?;
        let mut entries = self.entries.clone();
        for (code, words) in extra {
            let list = entries.entry(code).or_default();
            for w in words {
                if !list.contains(&w) {
                    list.push(w);
                }
            }
        }
        Self::new(entries)
    }

    pub fn keywords(&self, code: Code) -> &[String] {
        self.entries.get(&code).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Greedy longest match over word tokens, left to right.
    fn matches(&self, text: &str) -> Vec<Code> {
        let tokens = match_tokens(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let max = self.longest.min(tokens.len() - i);
            let hit = (1..=max).rev().find_map(|n| self.phrases.get(&tokens[i..i + n]).map(|&c| (n, c)));
            match hit {
                Some((n, code)) => {
                    out.push(code);
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

impl Default for CodingLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Codes with at least one keyword hit in `text`.
pub fn code_prompt(text: &str, lexicon: &CodingLexicon) -> BTreeSet<Code> {
    lexicon.matches(text).into_iter().collect()
}

/// Number of keyword hits per code.
pub fn code_counts(text: &str, lexicon: &CodingLexicon) -> BTreeMap<Code, usize> {
    let mut counts = BTreeMap::new();
    for code in lexicon.matches(text) {
        *counts.entry(code).or_insert(0) += 1;
    }
    counts
}
