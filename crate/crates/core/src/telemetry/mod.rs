//! Interaction telemetry: the durable event log and the analyses run on it.

pub mod analysis;
pub mod event;
pub mod lexicon;
pub mod log;

pub use analysis::{prompt_stats, summarize, transition_matrix, transition_matrix_from_sequence, word_count, PromptStats, Summary, TransitionMatrix};
pub use event::{EventDraft, EventKind, InteractionEvent};
pub use lexicon::{code_counts, code_prompt, Code, CodingLexicon, LexiconError};
pub use log::{parse_ndjson, EventLog, EventStore, SyncPolicy, TelemetryError};
