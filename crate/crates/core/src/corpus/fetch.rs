//! Optional fetcher that turns a repository's issue tracker into the NDJSON
//! report export consumed by the miner. Uses the hosting platform's REST
//! issues listing, which returns issues and pull requests together.
//!
//! Issue-to-PR linkage is not resolved: issues are exported with
//! `pr_state = none` unless the operator post-processes the export.

use std::time::Duration;

use serde::Deserialize;

use super::{BugReport, PrState, ReportKind};

#[derive(Debug, Deserialize)]
struct RawPullRef {
    #[serde(default)]
    merged_at: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawIssue {
    number: u64,
    title: String,
    #[serde(default)]
    body: Option<String>,
    state: String,
    #[serde(default)]
    pull_request: Option<RawPullRef>,
}

fn to_report(raw: RawIssue) -> BugReport {
    let (kind, pr_state) = match &raw.pull_request {
        Some(pr) if pr.merged_at.is_some() => (ReportKind::PullRequest, PrState::Accepted),
        Some(_) if raw.state == "open" => (ReportKind::PullRequest, PrState::Pending),
        Some(_) => (ReportKind::PullRequest, PrState::None),
        None => (ReportKind::Issue, PrState::None),
    };
    BugReport {
        id: raw.number.to_string(),
        kind,
        title: raw.title,
        body: raw.body.unwrap_or_default(),
        pr_state: Some(pr_state),
    }
}

/// Converts one page of the issues listing into reports.
pub fn parse_issue_page(json: &str) -> Result<Vec<BugReport>, serde_json::Error> {
    let raw: Vec<RawIssue> = serde_json::from_str(json)?;
    Ok(raw.into_iter().map(to_report).collect())
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub api_base: String,
    /// `owner/name`.
    pub repo: String,
    pub max_pages: usize,
    pub token: Option<String>,
}

/// Fetches up to `max_pages` pages of 100 entries each. Stops early at the
/// first empty page.
pub fn fetch_reports(cfg: &FetchConfig) -> Result<Vec<BugReport>, reqwest::Error> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .user_agent("fuzzgpt-fetch")
        .build()?;
    let mut out = Vec::new();
    for page in 1..=cfg.max_pages {
        let url = format!(
            "{}/repos/{}/issues?state=all&per_page=100&page={page}",
            cfg.api_base.trim_end_matches('/'),
            cfg.repo
        );
        let mut req = client
            .get(&url)
            .header("Accept", "application/vnd.github+json");
        if let Some(token) = &cfg.token {
            req = req.bearer_auth(token);
        }
        let text = req.send()?.error_for_status()?.text()?;
        let batch = parse_issue_page(&text).unwrap_or_else(|e| {
            log::warn!("page {page}: unparseable listing: {e}");
            Vec::new()
        });
        if batch.is_empty() {
            break;
        }
        out.extend(batch);
    }
    Ok(out)
}
