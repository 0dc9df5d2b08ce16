//! History-driven fuzzing orchestrator.
//!
//! The pipeline mines historical bug reports for bug-triggering snippets,
//! labels each snippet with the API it most likely exercises, renders prompts
//! that prime a completion model toward edge-case programs, runs those
//! programs under crash / differential / gradient oracles and summarizes the
//! campaign.
//!
//! ```text
//! reports.ndjson --mine--> snippets.jsonl --annotate--> labeled.jsonl
//!        --fuzz--> RUN/programs.jsonl --exec--> results/verdicts.jsonl --report--> report/
//! ```

pub mod annotator;
pub mod config;
pub mod corpus;
pub mod executor;
pub mod hashing;
pub mod jsonl;
pub mod llmclient;
pub mod metrics;
pub mod promptgen;

pub use annotator::{LabelOrigin, LabeledExample, SeedLabel};
pub use corpus::{BugReport, ReportKind, Snippet};
pub use executor::{CrashSignature, ExecMode, Status, Verdict};
pub use llmclient::{Budget, CompletionBackend, GeneratedProgram};
pub use metrics::CampaignSummary;
pub use promptgen::{Mode, Prompt};
