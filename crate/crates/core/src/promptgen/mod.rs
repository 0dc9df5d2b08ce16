//! Prompt construction for every generation paradigm: few-shot with an
//! intermediate bug description, zero-shot completion and editing,
//! instruction-following chat, and fine-tuned inference. Also emits the
//! fine-tuning dataset, whose records share the few-shot example rendering.

mod render;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use render::{
    build_fewshot_prompt, build_ft_inference_prompt, build_instruct_prompt,
    build_zeroshot_completion_prompt, build_zeroshot_edit_prompt, emit_finetune_dataset,
    render_example_block, strip_descriptions, zeroshot_completion_at, FinetuneRecord,
    InstructStyle, EDIT_COMMENT, FEWSHOT_STOP, REVEAL_COMMENT,
};
pub use select::{jaccard, select_examples, similarity_set, SelectionKind, SelectionStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fs,
    ZsComplete,
    ZsEdit,
    Instruct,
    FtInference,
    /// Buggy-API labeling prompts; never used for fuzzing.
    Annotate,
}

impl Mode {
    pub const FUZZING: [Mode; 5] = [
        Mode::Fs,
        Mode::ZsComplete,
        Mode::ZsEdit,
        Mode::Instruct,
        Mode::FtInference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fs => "fs",
            Mode::ZsComplete => "zs_complete",
            Mode::ZsEdit => "zs_edit",
            Mode::Instruct => "instruct",
            Mode::FtInference => "ft_inference",
            Mode::Annotate => "annotate",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = PromptError;

    /// Accepts both the snake_case names and the CLI spellings
    /// (`zs-complete`, `ft`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fs" => Mode::Fs,
            "zs_complete" | "zs-complete" => Mode::ZsComplete,
            "zs_edit" | "zs-edit" => Mode::ZsEdit,
            "instruct" => Mode::Instruct,
            "ft" | "ft_inference" | "ft-inference" => Mode::FtInference,
            "annotate" => Mode::Annotate,
            other => return Err(PromptError::UnknownMode(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n_samples: u32,
}

impl SamplingParams {
    /// Nucleus sampling used for program generation.
    pub const GENERATION: SamplingParams = SamplingParams {
        temperature: 0.8,
        top_p: 0.95,
        max_tokens: 256,
        n_samples: 10,
    };

    /// Greedy single-sample decoding used for labeling.
    pub const GREEDY: SamplingParams = SamplingParams {
        temperature: 0.0,
        top_p: 1.0,
        max_tokens: 32,
        n_samples: 1,
    };

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(PromptError::InvalidSampling("temperature must be >= 0"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(PromptError::InvalidSampling("top_p must be in (0, 1]"));
        }
        if self.max_tokens == 0 {
            return Err(PromptError::InvalidSampling("max_tokens must be > 0"));
        }
        if self.n_samples == 0 {
            return Err(PromptError::InvalidSampling("n_samples must be > 0"));
        }
        Ok(())
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self::GENERATION
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub mode: Mode,
    pub target_api: String,
    #[serde(default)]
    pub example_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_line_count: Option<usize>,
}

/// A fully rendered prompt. For chat-style prompts `system` carries the
/// system message and `text` the user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub stop_sequences: Vec<String>,
    #[serde(flatten)]
    pub sampling: SamplingParams,
    pub meta: PromptMeta,
}

impl Prompt {
    /// For zero-shot completion prompts, the code prefix that the final
    /// program starts with (everything after the comment line).
    pub fn completion_prefix(&self) -> Option<&str> {
        if self.meta.mode != Mode::ZsComplete {
            return None;
        }
        self.text.split_once('\n').map(|(_, rest)| rest)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("need {need} examples but the dataset has {have}")]
    DatasetTooSmall { need: usize, have: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("example {0} has a single line; nothing to truncate")]
    SingleLine(String),
    #[error("no example has at least two lines")]
    NoMultilineExample,
    #[error("target API is empty")]
    EmptyTargetApi,
    #[error(
        "unknown instruct style `{0}` (expected baseline, unseen, creative or non-conventional)"
    )]
    UnknownStyle(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("invalid sampling parameters: {0}")]
    InvalidSampling(&'static str),
    #[error("mmr_lambda must be in [0, 1], got {0}")]
    InvalidLambda(f64),
}
