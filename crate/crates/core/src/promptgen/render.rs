use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mode, Prompt, PromptError, PromptMeta, SamplingParams};
use crate::annotator::LabeledExample;

/// Stops generation before the model starts a second example.
pub const FEWSHOT_STOP: &str = "API:";
pub const REVEAL_COMMENT: &str = "# The following code reveals a bug in";
pub const EDIT_COMMENT: &str = "# Edit the code to use";

const EXAMPLE_SEPARATOR: &str = "\n\n";
const DESCRIPTION_LABEL: &str = "Bug description:";

/// `API: {api}` / `Bug description: {title}` / code, one per line, with no
/// trailing newline. Used verbatim for few-shot examples and fine-tuning
/// records.
pub fn render_example_block(example: &LabeledExample, cot: bool) -> String {
    if cot {
        format!(
            "API: {}\n{DESCRIPTION_LABEL} {}\n{}",
            example.api, example.title, example.code
        )
    } else {
        format!("API: {}\n{}", example.api, example.code)
    }
}

fn query_header(target_api: &str, cot: bool) -> String {
    if cot {
        format!("API: {target_api}\n{DESCRIPTION_LABEL}")
    } else {
        format!("API: {target_api}\n")
    }
}

/// Removes every line that starts with the bug-description label, keeping
/// line terminators of the remaining lines intact.
pub fn strip_descriptions(text: &str) -> String {
    text.split_inclusive('\n')
        .filter(|l| !l.starts_with(DESCRIPTION_LABEL))
        .collect()
}

fn check_api(target_api: &str) -> Result<(), PromptError> {
    if target_api.trim().is_empty() {
        Err(PromptError::EmptyTargetApi)
    } else {
        Ok(())
    }
}

pub fn build_fewshot_prompt(
    examples: &[&LabeledExample],
    target_api: &str,
    cot: bool,
    sampling: SamplingParams,
) -> Prompt {
    let mut text = String::new();
    for e in examples {
        text.push_str(&render_example_block(e, cot));
        text.push_str(EXAMPLE_SEPARATOR);
    }
    text.push_str(&query_header(target_api, cot));
    Prompt {
        text,
        system: None,
        stop_sequences: vec![FEWSHOT_STOP.to_string()],
        sampling,
        meta: PromptMeta {
            mode: Mode::Fs,
            target_api: target_api.to_string(),
            example_ids: examples.iter().map(|e| e.snippet_id.clone()).collect(),
            prefix_line_count: None,
        },
    }
}

/// Query for a fine-tuned backend: the bare few-shot query header.
pub fn build_ft_inference_prompt(target_api: &str, cot: bool, sampling: SamplingParams) -> Prompt {
    Prompt {
        text: query_header(target_api, cot),
        system: None,
        stop_sequences: vec![FEWSHOT_STOP.to_string()],
        sampling,
        meta: PromptMeta {
            mode: Mode::FtInference,
            target_api: target_api.to_string(),
            example_ids: Vec::new(),
            prefix_line_count: None,
        },
    }
}

/// Keeps the first `j` lines of the example (uniform in `[1, n-1]`) under
/// the reveal comment. The fuzzing program is the kept prefix followed by
/// the completion.
pub fn build_zeroshot_completion_prompt<R: Rng + ?Sized>(
    example: &LabeledExample,
    target_api: &str,
    rng: &mut R,
    sampling: SamplingParams,
) -> Result<Prompt, PromptError> {
    let n = example.code.split_inclusive('\n').count();
    if n < 2 {
        return Err(PromptError::SingleLine(example.snippet_id.clone()));
    }
    let j = rng.gen_range(1..n);
    zeroshot_completion_at(example, target_api, j, sampling)
}

/// Deterministic core of [`build_zeroshot_completion_prompt`].
pub fn zeroshot_completion_at(
    example: &LabeledExample,
    target_api: &str,
    j: usize,
    sampling: SamplingParams,
) -> Result<Prompt, PromptError> {
    check_api(target_api)?;
    let lines: Vec<&str> = example.code.split_inclusive('\n').collect();
    if lines.len() < 2 {
        return Err(PromptError::SingleLine(example.snippet_id.clone()));
    }
    assert!(
        (1..lines.len()).contains(&j),
        "prefix length {j} outside [1, {}]",
        lines.len() - 1
    );
    let prefix: String = lines[..j].concat();
    Ok(Prompt {
        text: format!("{REVEAL_COMMENT} {target_api}\n{prefix}"),
        system: None,
        stop_sequences: Vec::new(),
        sampling,
        meta: PromptMeta {
            mode: Mode::ZsComplete,
            target_api: target_api.to_string(),
            example_ids: vec![example.snippet_id.clone()],
            prefix_line_count: Some(j),
        },
    })
}

pub fn build_zeroshot_edit_prompt(
    example: &LabeledExample,
    target_api: &str,
    sampling: SamplingParams,
) -> Result<Prompt, PromptError> {
    check_api(target_api)?;
    Ok(Prompt {
        text: format!("{EDIT_COMMENT} {target_api}\n{}", example.code),
        system: None,
        stop_sequences: Vec::new(),
        sampling,
        meta: PromptMeta {
            mode: Mode::ZsEdit,
            target_api: target_api.to_string(),
            example_ids: vec![example.snippet_id.clone()],
            prefix_line_count: None,
        },
    })
}

/// Request phrasings for instruction-following models without historical
/// examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructStyle {
    Baseline,
    Unseen,
    Creative,
    NonConventional,
}

impl InstructStyle {
    pub const ALL: [InstructStyle; 4] = [
        InstructStyle::Baseline,
        InstructStyle::Unseen,
        InstructStyle::Creative,
        InstructStyle::NonConventional,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            InstructStyle::Baseline => "to demonstrate the example usage",
            InstructStyle::Unseen => "in a way you have not seen in your training dataset",
            InstructStyle::Creative => "in a very creative way",
            InstructStyle::NonConventional => "in a non-conventional way",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InstructStyle::Baseline => "baseline",
            InstructStyle::Unseen => "unseen",
            InstructStyle::Creative => "creative",
            InstructStyle::NonConventional => "non-conventional",
        }
    }
}

impl fmt::Display for InstructStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstructStyle {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => InstructStyle::Baseline,
            "unseen" => InstructStyle::Unseen,
            "creative" => InstructStyle::Creative,
            "non-conventional" | "non_conventional" | "nonconventional" => {
                InstructStyle::NonConventional
            }
            other => return Err(PromptError::UnknownStyle(other.to_string())),
        })
    }
}

/// Chat prompt: `system` names the fuzzer role for `library`, `text` is the
/// user request.
pub fn build_instruct_prompt(
    target_api: &str,
    style: InstructStyle,
    library: &str,
    sampling: SamplingParams,
) -> Result<Prompt, PromptError> {
    check_api(target_api)?;
    Ok(Prompt {
        text: format!(
            "Please generate a program to use {target_api} {}",
            style.suffix()
        ),
        system: Some(format!("You are a {library} fuzzer.")),
        stop_sequences: Vec::new(),
        sampling,
        meta: PromptMeta {
            mode: Mode::Instruct,
            target_api: target_api.to_string(),
            example_ids: Vec::new(),
            prefix_line_count: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub text: String,
}

pub fn emit_finetune_dataset(
    dataset: &[LabeledExample],
    cot: bool,
) -> Result<Vec<FinetuneRecord>, PromptError> {
    if dataset.is_empty() {
        return Err(PromptError::EmptyDataset);
    }
    Ok(dataset
        .iter()
        .map(|e| FinetuneRecord {
            text: render_example_block(e, cot),
        })
        .collect())
}
