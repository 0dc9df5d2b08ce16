//! Buggy-API labeling by few-shot self-training: a handful of manually
//! labeled seeds prime a completion backend, which then labels every other
//! snippet in the store.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Snippet;
use crate::llmclient::{BackendError, CompletionBackend};
use crate::promptgen::{Mode, Prompt, PromptMeta, SamplingParams};

/// Default number of manually labeled seeds.
pub const DEFAULT_SEED_COUNT: usize = 6;

static DOTTED_API: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)+$").expect("valid regex")
});

/// `ident(.ident)+`
pub fn is_dotted_api(s: &str) -> bool {
    DOTTED_API.is_match(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLabel {
    pub snippet_id: String,
    pub api: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelOrigin {
    Manual,
    Model,
}

/// A snippet paired with the API it is taken to exercise. The unit of
/// few-shot context and of fine-tuning data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub snippet_id: String,
    pub title: String,
    pub code: String,
    pub api: String,
    pub label_origin: LabelOrigin,
}

impl LabeledExample {
    /// Validates the API name; an empty title falls back to the API name.
    pub fn new(
        snippet_id: impl Into<String>,
        title: impl Into<String>,
        code: impl Into<String>,
        api: impl Into<String>,
        label_origin: LabelOrigin,
    ) -> Result<Self, AnnotatorError> {
        let api = api.into();
        if !is_dotted_api(&api) {
            return Err(AnnotatorError::InvalidApi(api));
        }
        let mut title = title.into();
        if title.trim().is_empty() {
            title = api.clone();
        }
        Ok(Self {
            snippet_id: snippet_id.into(),
            title,
            code: code.into(),
            api,
            label_origin,
        })
    }

    pub fn from_snippet(
        snippet: &Snippet,
        api: impl Into<String>,
        origin: LabelOrigin,
    ) -> Result<Self, AnnotatorError> {
        Self::new(
            snippet.snippet_id.clone(),
            snippet.title.clone(),
            snippet.code.clone(),
            api,
            origin,
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotatorError {
    #[error("at least one seed label is required")]
    NoSeeds,
    #[error("`{0}` is not a dotted API name")]
    InvalidApi(String),
    #[error("seed references unknown snippet {0}")]
    UnknownSeedSnippet(String),
    #[error("snippet {0} is seeded more than once")]
    DuplicateSeed(String),
    #[error("unparseable label completion: {raw:?}")]
    Unparseable { raw: String },
}

/// Renders seeds as `code / Title: / Buggy API:` blocks separated by blank
/// lines, then the target with an open `Buggy API:` cue. Greedy decoding,
/// stopping at the end of the line.
pub fn build_annotation_prompt(
    seeds: &[LabeledExample],
    target: &Snippet,
) -> Result<Prompt, AnnotatorError> {
    if seeds.is_empty() {
        return Err(AnnotatorError::NoSeeds);
    }
    let mut text = String::new();
    for s in seeds {
        text.push_str(&format!(
            "{}\nTitle: {}\nBuggy API: {}\n\n",
            s.code, s.title, s.api
        ));
    }
    text.push_str(&format!(
        "{}\nTitle: {}\nBuggy API:",
        target.code, target.title
    ));
    Ok(Prompt {
        text,
        system: None,
        stop_sequences: vec!["\n".to_string()],
        sampling: SamplingParams::GREEDY,
        meta: PromptMeta {
            mode: Mode::Annotate,
            target_api: String::new(),
            example_ids: seeds.iter().map(|s| s.snippet_id.clone()).collect(),
            prefix_line_count: None,
        },
    })
}

/// First line of the completion, trimmed of whitespace and trailing
/// punctuation, if it is a dotted API name.
pub fn parse_api_label(completion: &str) -> Result<String, AnnotatorError> {
    let first = completion.split('\n').next().unwrap_or("");
    let label = first
        .trim()
        .trim_end_matches(|c: char| (c.is_ascii_punctuation() && c != '_') || c.is_whitespace());
    if is_dotted_api(label) {
        Ok(label.to_string())
    } else {
        Err(AnnotatorError::Unparseable {
            raw: completion.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub snippet_id: String,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub snippet_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationOutcome {
    /// In store order.
    pub dataset: Vec<LabeledExample>,
    pub rejects: Vec<RejectRecord>,
    pub skipped: Vec<SkipRecord>,
    pub queries: usize,
}

enum Labeling {
    Labeled(LabeledExample),
    Rejected(RejectRecord),
    Skipped(SkipRecord),
}

/// Resolves seed labels against the store, in seed-file order.
pub fn resolve_seeds(
    store: &[Snippet],
    seeds: &[SeedLabel],
) -> Result<Vec<LabeledExample>, AnnotatorError> {
    let by_id: HashMap<&str, &Snippet> = store.iter().map(|s| (s.snippet_id.as_str(), s)).collect();
    let mut seen = HashSet::new();
    seeds
        .iter()
        .map(|seed| {
            if !seen.insert(seed.snippet_id.as_str()) {
                return Err(AnnotatorError::DuplicateSeed(seed.snippet_id.clone()));
            }
            let snippet = by_id
                .get(seed.snippet_id.as_str())
                .ok_or_else(|| AnnotatorError::UnknownSeedSnippet(seed.snippet_id.clone()))?;
            LabeledExample::from_snippet(snippet, seed.api.clone(), LabelOrigin::Manual)
        })
        .collect()
}

/// Labels every non-seed snippet with one greedy query. Unparseable
/// completions go to `rejects`; backend failures go to `skipped`. Neither
/// aborts the run.
pub fn annotate_all(
    store: &[Snippet],
    seeds: &[SeedLabel],
    backend: &dyn CompletionBackend,
) -> Result<AnnotationOutcome, AnnotatorError> {
    let seed_examples = resolve_seeds(store, seeds)?;
    let seed_ids: HashSet<&str> = seeds.iter().map(|s| s.snippet_id.as_str()).collect();
    let pending: Vec<&Snippet> = store
        .iter()
        .filter(|s| !seed_ids.contains(s.snippet_id.as_str()))
        .collect();
    if pending.is_empty() {
        return Ok(AnnotationOutcome {
            dataset: store
                .iter()
                .filter_map(|s| seed_examples.iter().find(|e| e.snippet_id == s.snippet_id))
                .cloned()
                .collect(),
            ..AnnotationOutcome::default()
        });
    }
    if seed_examples.is_empty() {
        return Err(AnnotatorError::NoSeeds);
    }

    let label_one = |snippet: &Snippet| -> Labeling {
        let prompt = build_annotation_prompt(&seed_examples, snippet).expect("seeds nonempty");
        let skipped = |e: BackendError| {
            Labeling::Skipped(SkipRecord {
                snippet_id: snippet.snippet_id.clone(),
                error: e.to_string(),
            })
        };
        let completion = match backend.complete(&prompt) {
            Ok(mut c) if !c.is_empty() => c.swap_remove(0),
            Ok(_) => return skipped(BackendError::Protocol("no completions returned".into())),
            Err(e) => return skipped(e),
        };
        match parse_api_label(&completion)
            .and_then(|api| LabeledExample::from_snippet(snippet, api, LabelOrigin::Model))
        {
            Ok(ex) => Labeling::Labeled(ex),
            Err(_) => Labeling::Rejected(RejectRecord {
                snippet_id: snippet.snippet_id.clone(),
                completion,
            }),
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(backend.max_in_flight().max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Labeling> =
        pool.install(|| pending.par_iter().map(|s| label_one(s)).collect());

    let mut labeled: HashMap<String, LabeledExample> = HashMap::new();
    let mut out = AnnotationOutcome {
        queries: pending.len(),
        ..AnnotationOutcome::default()
    };
    for r in results {
        match r {
            Labeling::Labeled(ex) => {
                labeled.insert(ex.snippet_id.clone(), ex);
            }
            Labeling::Rejected(r) => out.rejects.push(r),
            Labeling::Skipped(s) => out.skipped.push(s),
        }
    }
    for e in seed_examples {
        labeled.insert(e.snippet_id.clone(), e);
    }
    out.dataset = store
        .iter()
        .filter_map(|s| labeled.remove(&s.snippet_id))
        .collect();
    Ok(out)
}
