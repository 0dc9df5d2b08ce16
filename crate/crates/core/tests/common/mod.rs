#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fuzzgpt::annotator::SeedLabel;
use fuzzgpt::{jsonl, LabeledExample, Snippet};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

pub fn store() -> Vec<Snippet> {
    jsonl::read(&fixture("corpus/golden_snippets.jsonl")).unwrap()
}

pub fn seeds() -> Vec<SeedLabel> {
    jsonl::read(&fixture("annotate/seeds.jsonl")).unwrap()
}

pub fn labeled() -> Vec<LabeledExample> {
    jsonl::read(&fixture("annotate/golden_labeled.jsonl")).unwrap()
}

pub fn campaign_apis() -> Vec<String> {
    fuzzgpt::config::read_api_list(&fixture("campaign/apis.txt")).unwrap()
}

pub fn annotate_completions() -> BTreeMap<String, String> {
    serde_json::from_str(&std::fs::read_to_string(fixture("annotate/completions.json")).unwrap())
        .unwrap()
}

/// api -> prompt index -> samples.
pub fn campaign_completions() -> BTreeMap<String, Vec<Vec<String>>> {
    serde_json::from_str(&std::fs::read_to_string(fixture("campaign/completions.json")).unwrap())
        .unwrap()
}

pub fn stub_shim() -> &'static str {
    env!("CARGO_BIN_EXE_fuzzgpt-stub-shim")
}

pub fn fuzzgpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzgpt"))
        .args(args)
        .env_remove("FUZZGPT_API_KEY")
        .output()
        .expect("spawn fuzzgpt")
}

/// Runs the CLI and panics with its stderr on failure.
pub fn fuzzgpt_ok(args: &[&str]) -> String {
    let out = fuzzgpt(args);
    assert!(
        out.status.success(),
        "fuzzgpt {args:?} failed ({}):\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub mod golden;
pub mod strategies;

use std::sync::atomic::{AtomicUsize, Ordering};

use fuzzgpt::llmclient::BackendError;
use fuzzgpt::{CompletionBackend, Prompt};

/// Answers every prompt with `n_samples` numbered completions and counts
/// requests.
#[derive(Default)]
pub struct CountingBackend {
    pub requests: AtomicUsize,
}

impl CountingBackend {
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl CompletionBackend for CountingBackend {
    fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
        let r = self.requests.fetch_add(1, Ordering::SeqCst);
        Ok((0..prompt.sampling.n_samples)
            .map(|i| format!(" case {r}.{i}\nx = {i}\n"))
            .collect())
    }
}
