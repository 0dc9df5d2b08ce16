//! Bug-report ingestion: extract code blocks, clean them, filter by syntax
//! and length, and deduplicate into a snippet store.

mod admit;
mod clean;
pub mod fetch;
mod markdown;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::num::NonZeroUsize;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use admit::{
    admit_snippet, BalancedDelimiters, CommandSyntaxCheck, PunctuationTokenizer, Rejection,
    SyntaxCheck, Tokenizer, DEFAULT_TOKEN_LIMIT,
};
pub use clean::{clean_snippet, CleanOptions};
pub use markdown::{fence_for, fenced_blocks, FencedBlock};

use crate::hashing::short_hash;
use crate::jsonl::{self, JsonlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Issue,
    PullRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrState {
    Accepted,
    Pending,
    None,
}

/// One issue or pull request from the export. For pull requests `body` holds
/// the commit message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: String,
    pub kind: ReportKind,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub pr_state: Option<PrState>,
}

impl BugReport {
    /// Issues count only when linked to an accepted or pending PR; PRs
    /// always count.
    pub fn is_eligible(&self) -> bool {
        match self.kind {
            ReportKind::PullRequest => true,
            ReportKind::Issue => {
                matches!(self.pr_state, Some(PrState::Accepted | PrState::Pending))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Snippet {
    pub snippet_id: String,
    pub source_id: String,
    pub title: String,
    pub code: String,
    pub token_count: usize,
}

impl Snippet {
    /// Wraps the snippet back into a pull-request report carrying a single
    /// fenced block, so a store can be re-ingested.
    pub fn to_report(&self) -> BugReport {
        let fence = fence_for(&self.code);
        BugReport {
            id: self.source_id.clone(),
            kind: ReportKind::PullRequest,
            title: self.title.clone(),
            body: format!("{fence}python\n{}\n{fence}\n", self.code),
            pr_state: Some(PrState::Accepted),
        }
    }
}

/// Content hash of cleaned code.
pub fn snippet_id(code: &str) -> String {
    short_hash(code.as_bytes(), 16)
}

/// Fenced code blocks of a report in document order.
pub fn extract_code_blocks(report: &BugReport) -> Vec<String> {
    fenced_blocks(&report.body)
        .into_iter()
        .map(|b| b.code)
        .collect()
}

/// Info strings whose blocks are never code in the subject language.
pub const DEFAULT_SKIP_INFO: &[&str] = &[
    "bash", "sh", "shell", "console", "text", "txt", "log", "output", "diff",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub max_tokens: NonZeroUsize,
    pub clean: CleanOptions,
    /// Blocks whose info string (first word, case-insensitive) is listed
    /// here are skipped.
    pub skip_info: Vec<String>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            max_tokens: NonZeroUsize::new(DEFAULT_TOKEN_LIMIT).expect("nonzero"),
            clean: CleanOptions::default(),
            skip_info: DEFAULT_SKIP_INFO.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Per-reason counters for one mining run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MineStats {
    pub reports: usize,
    pub unreadable: usize,
    pub duplicate_ids: usize,
    pub ineligible: usize,
    pub no_code: usize,
    pub empty_after_clean: usize,
    pub rejected_syntax: usize,
    pub rejected_too_long: usize,
    pub duplicates: usize,
    pub admitted: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MineOutcome {
    /// Sorted by `snippet_id`.
    pub snippets: Vec<Snippet>,
    pub stats: MineStats,
}

pub struct Miner {
    config: MinerConfig,
    checker: Box<dyn SyntaxCheck>,
    tokenizer: Box<dyn Tokenizer>,
}

impl Default for Miner {
    fn default() -> Self {
        Self::new(MinerConfig::default())
    }
}

impl Miner {
    /// Uses the built-in delimiter checker and the punctuation tokenizer.
    pub fn new(config: MinerConfig) -> Self {
        Self {
            config,
            checker: Box::new(BalancedDelimiters),
            tokenizer: Box::new(PunctuationTokenizer),
        }
    }

    pub fn with_checker(mut self, checker: Box<dyn SyntaxCheck>) -> Self {
        self.checker = checker;
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: Box<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn config(&self) -> &MinerConfig {
        &self.config
    }

    fn skips(&self, info: &str) -> bool {
        let lang = info.split_whitespace().next().unwrap_or("");
        self.config
            .skip_info
            .iter()
            .any(|s| s.eq_ignore_ascii_case(lang))
    }

    /// Cleaned, concatenated code of one report, or `None` when the report
    /// has no usable block. `Some("")` means blocks existed but nothing
    /// survived cleaning.
    pub fn report_code(&self, report: &BugReport) -> Option<String> {
        let blocks: Vec<FencedBlock> = fenced_blocks(&report.body)
            .into_iter()
            .filter(|b| !self.skips(&b.info))
            .collect();
        if blocks.is_empty() {
            return None;
        }
        let cleaned: Vec<String> = blocks
            .iter()
            .map(|b| clean_snippet(&b.code, &self.config.clean))
            .filter(|c| !c.is_empty())
            .collect();
        Some(cleaned.join("\n"))
    }

    /// Runs the whole pipeline. `Err` items in the stream are unreadable
    /// records; they are counted and skipped.
    pub fn mine<I, E>(&self, reports: I) -> MineOutcome
    where
        I: IntoIterator<Item = Result<BugReport, E>>,
    {
        let mut stats = MineStats::default();
        let mut seen_ids = HashSet::new();
        let mut store: BTreeMap<String, Snippet> = BTreeMap::new();

        for item in reports {
            stats.reports += 1;
            let report = match item {
                Ok(r) if !r.id.is_empty() => r,
                _ => {
                    stats.unreadable += 1;
                    continue;
                }
            };
            if !seen_ids.insert(report.id.clone()) {
                stats.duplicate_ids += 1;
                continue;
            }
            if !report.is_eligible() {
                stats.ineligible += 1;
                continue;
            }
            let Some(code) = self.report_code(&report) else {
                stats.no_code += 1;
                continue;
            };
            if code.is_empty() {
                stats.empty_after_clean += 1;
                continue;
            }
            let token_count = match admit_snippet(
                &code,
                self.config.max_tokens,
                self.checker.as_ref(),
                self.tokenizer.as_ref(),
            ) {
                Ok(n) => n,
                Err(Rejection::Syntax { .. }) => {
                    stats.rejected_syntax += 1;
                    continue;
                }
                Err(Rejection::TooLong { .. }) => {
                    stats.rejected_too_long += 1;
                    continue;
                }
            };
            let snippet = Snippet {
                snippet_id: snippet_id(&code),
                source_id: report.id,
                title: report.title,
                code,
                token_count,
            };
            // Keep the representative with the smallest source id so the
            // store does not depend on input order.
            match store.get_mut(&snippet.snippet_id) {
                Some(existing) => {
                    stats.duplicates += 1;
                    if (&snippet.source_id, &snippet.title) < (&existing.source_id, &existing.title)
                    {
                        *existing = snippet;
                    }
                }
                None => {
                    store.insert(snippet.snippet_id.clone(), snippet);
                }
            }
        }
        stats.admitted = store.len();
        MineOutcome {
            snippets: store.into_values().collect(),
            stats,
        }
    }
}

/// Reads an NDJSON report export. Lines that fail to parse surface as `Err`
/// items so the miner can count them.
pub fn read_reports(
    path: &Path,
) -> std::io::Result<impl Iterator<Item = Result<BugReport, String>>> {
    let file = File::open(path)?;
    Ok(BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            let line = l.map_err(|e| e.to_string())?;
            serde_json::from_str::<BugReport>(&line).map_err(|e| e.to_string())
        }))
}

pub fn read_store(path: &Path) -> Result<Vec<Snippet>, JsonlError> {
    jsonl::read(path)
}

pub fn write_store(path: &Path, snippets: &[Snippet]) -> Result<(), JsonlError> {
    jsonl::write(path, snippets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: &str, kind: ReportKind, pr: Option<PrState>, body: &str) -> BugReport {
        BugReport {
            id: id.into(),
            kind,
            title: format!("title {id}"),
            body: body.into(),
            pr_state: pr,
        }
    }

    fn ok(r: BugReport) -> Result<BugReport, String> {
        Ok(r)
    }

    #[test]
    fn extracts_blocks() {
        let r = report("1", ReportKind::Issue, None, "```\na=1\n```\n```\nb=2\n```");
        assert_eq!(extract_code_blocks(&r), vec!["a=1", "b=2"]);
        let r = report("2", ReportKind::Issue, None, "nothing here");
        assert!(extract_code_blocks(&r).is_empty());
    }

    #[test]
    fn eligibility() {
        assert!(!report("1", ReportKind::Issue, None, "").is_eligible());
        assert!(!report("1", ReportKind::Issue, Some(PrState::None), "").is_eligible());
        assert!(report("1", ReportKind::Issue, Some(PrState::Pending), "").is_eligible());
        assert!(report("1", ReportKind::PullRequest, None, "").is_eligible());
    }

    #[test]
    fn empty_stream() {
        let out = Miner::default().mine(Vec::<Result<BugReport, String>>::new());
        assert!(out.snippets.is_empty());
        assert_eq!(out.stats, MineStats::default());
    }

    #[test]
    fn identical_code_dedups() {
        let body = "```python\nimport m\nm.f(0)\n```";
        let out = Miner::default().mine(vec![
            ok(report("b", ReportKind::PullRequest, None, body)),
            ok(report(
                "a",
                ReportKind::PullRequest,
                None,
                &format!(">>> import m\n{body}"),
            )),
        ]);
        assert_eq!(out.snippets.len(), 1);
        assert_eq!(out.snippets[0].source_id, "a");
        assert_eq!(out.stats.duplicates, 1);
    }

    #[test]
    fn unreadable_and_duplicate_ids_counted() {
        let body = "```\nx=1\n```";
        let out = Miner::default().mine(vec![
            Err("bad json".to_string()),
            ok(report("", ReportKind::PullRequest, None, body)),
            ok(report("a", ReportKind::PullRequest, None, body)),
            ok(report("a", ReportKind::PullRequest, None, "```\ny=2\n```")),
        ]);
        assert_eq!(out.stats.unreadable, 2);
        assert_eq!(out.stats.duplicate_ids, 1);
        assert_eq!(out.stats.admitted, 1);
    }

    #[test]
    fn skipped_info_strings() {
        let body = "```bash\npip install x\n```\n```python\nx = 1\n```";
        let out = Miner::default().mine(vec![ok(report("a", ReportKind::PullRequest, None, body))]);
        assert_eq!(out.snippets[0].code, "x = 1");
    }

    #[test]
    fn reingest_is_identity() {
        let body = "```\n>>> import m\n>>> m.f([1, 2])\n[3]\n```\n```\nm.g()\n```";
        let miner = Miner::default();
        let first = miner.mine(vec![ok(report("7", ReportKind::PullRequest, None, body))]);
        let second = miner.mine(first.snippets.iter().map(|s| ok(s.to_report())));
        assert_eq!(first.snippets, second.snippets);
        assert_eq!(first.snippets[0].code, "import m\nm.f([1, 2])\nm.g()");
    }
}
