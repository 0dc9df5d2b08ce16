//! Campaign metrics and reports.
//!
//! A program is valid when some execution of it finished without an
//! uncaught exception or crash and the target API was invoked. Programs are
//! compared by their canonical text (see [`normalize_program`]).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::executor::{numeric::lenient_f64, AdMode, ExecMode, InconsistencyKind, Status, Verdict};
use crate::hashing::short_hash;
use crate::llmclient::GeneratedProgram;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("verdict for `{program_id}` has no matching program (stores out of sync)")]
    DanglingVerdict { program_id: String },
    #[error("program id `{0}` appears twice in the program store")]
    DuplicateProgram(String),
}

/// Drops comment-only and blank lines and trailing whitespace. Purely
/// lexical.
pub fn normalize_program(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    for line in code.lines() {
        let line = line.trim_end();
        let body = line.trim_start();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Stable identity of a program's canonical text.
pub fn program_fingerprint(code: &str) -> String {
    short_hash(normalize_program(code).as_bytes(), 32)
}

/// Distinct canonical texts, via hashing.
pub fn count_unique<'a>(codes: impl IntoIterator<Item = &'a str>) -> usize {
    codes
        .into_iter()
        .map(program_fingerprint)
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub programs_per_api: usize,
    pub unique_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub apis_targeted: usize,
    pub apis_covered_valid: usize,
    pub apis_covered_all: usize,
    pub unique_programs_all: usize,
    pub unique_programs_valid: usize,
    pub valid_rate: f64,
    pub unique_crash_count: usize,
    pub inconsistency_count: usize,
    pub coverage_trend: Vec<TrendPoint>,
}

impl CampaignSummary {
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.unique_programs_valid > self.unique_programs_all {
            return Err("more valid than total unique programs".into());
        }
        if !(0.0..=1.0).contains(&self.valid_rate) {
            return Err(format!("valid_rate {} out of range", self.valid_rate));
        }
        if self.apis_covered_valid > self.apis_covered_all {
            return Err("valid API coverage exceeds total coverage".into());
        }
        if self
            .coverage_trend
            .windows(2)
            .any(|w| w[1].unique_valid < w[0].unique_valid)
        {
            return Err("coverage trend decreases".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SummaryOptions {
    /// Targeted APIs; when absent, the APIs named in the program store.
    pub targeted_apis: Option<Vec<String>>,
    /// Restricts coverage counts to this public API list.
    pub public_apis: Option<BTreeSet<String>>,
}

struct Index<'a> {
    by_id: HashMap<&'a str, &'a GeneratedProgram>,
    valid: HashSet<&'a str>,
    /// Invoked APIs per program across all its verdicts.
    invoked: HashMap<&'a str, BTreeSet<&'a str>>,
}

fn index<'a>(
    programs: &'a [GeneratedProgram],
    verdicts: &'a [Verdict],
) -> Result<Index<'a>, MetricsError> {
    let mut by_id = HashMap::with_capacity(programs.len());
    for p in programs {
        if by_id.insert(p.program_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicateProgram(p.program_id.clone()));
        }
    }
    let mut valid = HashSet::new();
    let mut invoked: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for v in verdicts {
        let Some((id, _)) = by_id.get_key_value(v.program_id.as_str()) else {
            return Err(MetricsError::DanglingVerdict {
                program_id: v.program_id.clone(),
            });
        };
        invoked
            .entry(id)
            .or_default()
            .extend(v.invoked_apis.iter().map(String::as_str));
        if v.is_valid_run() {
            valid.insert(*id);
        }
    }
    Ok(Index {
        by_id,
        valid,
        invoked,
    })
}

/// Folds a program store and its verdicts into a summary. Independent of
/// the order of either input.
pub fn summarize(
    programs: &[GeneratedProgram],
    verdicts: &[Verdict],
    opts: &SummaryOptions,
) -> Result<CampaignSummary, MetricsError> {
    let idx = index(programs, verdicts)?;
    let fingerprint: HashMap<&str, String> = programs
        .iter()
        .map(|p| (p.program_id.as_str(), program_fingerprint(&p.code)))
        .collect();

    let unique_all: HashSet<&String> = fingerprint.values().collect();
    let unique_valid: HashSet<&String> = idx.valid.iter().map(|id| &fingerprint[id]).collect();

    let public = opts.public_apis.as_ref();
    let covered = |ids: &mut dyn Iterator<Item = &&str>| -> BTreeSet<&str> {
        ids.filter_map(|id| idx.invoked.get(id))
            .flatten()
            .copied()
            .filter(|a| public.is_none_or(|p| p.contains(*a)))
            .collect()
    };
    let covered_all = covered(&mut idx.by_id.keys());
    let covered_valid = covered(&mut idx.valid.iter());

    let apis_targeted = match &opts.targeted_apis {
        Some(t) => t.iter().collect::<BTreeSet<_>>().len(),
        None => programs
            .iter()
            .map(|p| &p.api)
            .collect::<BTreeSet<_>>()
            .len(),
    };

    let crashes: BTreeSet<String> = verdicts
        .iter()
        .filter_map(|v| v.crash_signature.as_ref().map(|s| s.id()))
        .collect();
    let inconsistency_count = verdicts
        .iter()
        .filter(|v| v.status == Status::Inconsistency)
        .count();

    let valid_rate = if unique_all.is_empty() {
        0.0
    } else {
        unique_valid.len() as f64 / unique_all.len() as f64
    };

    Ok(CampaignSummary {
        apis_targeted,
        apis_covered_valid: covered_valid.len(),
        apis_covered_all: covered_all.len(),
        unique_programs_all: unique_all.len(),
        unique_programs_valid: unique_valid.len(),
        valid_rate,
        unique_crash_count: crashes.len(),
        inconsistency_count,
        coverage_trend: coverage_trend(programs, &idx.valid, &fingerprint),
    })
}

/// Cumulative unique valid programs after the first `n` programs of every
/// API, taken in program-id order.
fn coverage_trend(
    programs: &[GeneratedProgram],
    valid: &HashSet<&str>,
    fingerprint: &HashMap<&str, String>,
) -> Vec<TrendPoint> {
    let mut per_api: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in programs {
        per_api.entry(&p.api).or_default().push(&p.program_id);
    }
    for ids in per_api.values_mut() {
        ids.sort_unstable();
    }
    let depth = per_api.values().map(Vec::len).max().unwrap_or(0);
    let mut seen: HashSet<&str> = HashSet::new();
    (0..depth)
        .map(|rank| {
            for ids in per_api.values() {
                if let Some(id) = ids.get(rank).filter(|id| valid.contains(**id)) {
                    seen.insert(&fingerprint[id]);
                }
            }
            TrendPoint {
                programs_per_api: rank + 1,
                unique_valid: seen.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRow {
    pub api: String,
    pub programs: usize,
    pub unique_programs: usize,
    pub unique_valid: usize,
    pub crashes: usize,
    pub inconsistencies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRow {
    pub signature: String,
    pub program_count: usize,
    pub representative: String,
    pub program_ids: Vec<String>,
    pub sample_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyRow {
    pub program_id: String,
    pub api: String,
    pub mode: ExecMode,
    pub kind: InconsistencyKind,
    #[serde(with = "lenient_f64")]
    pub max_rel_err: f64,
    pub deviating_mode: Option<AdMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub summary: CampaignSummary,
    pub status_counts: BTreeMap<Status, usize>,
    pub per_api: Vec<ApiRow>,
    pub crashes: Vec<CrashRow>,
    pub inconsistencies: Vec<InconsistencyRow>,
}

pub fn build_report(
    programs: &[GeneratedProgram],
    verdicts: &[Verdict],
    opts: &SummaryOptions,
) -> Result<Report, MetricsError> {
    let summary = summarize(programs, verdicts, opts)?;
    let idx = index(programs, verdicts)?;

    let mut status_counts = BTreeMap::new();
    for v in verdicts {
        *status_counts.entry(v.status).or_insert(0) += 1;
    }

    let mut apis: BTreeSet<&str> = programs.iter().map(|p| p.api.as_str()).collect();
    if let Some(t) = &opts.targeted_apis {
        apis.extend(t.iter().map(String::as_str));
    }
    let per_api = apis
        .into_iter()
        .map(|api| {
            let mine: Vec<&GeneratedProgram> = programs.iter().filter(|p| p.api == api).collect();
            let unique = mine
                .iter()
                .map(|p| program_fingerprint(&p.code))
                .collect::<HashSet<_>>()
                .len();
            let unique_valid = mine
                .iter()
                .filter(|p| idx.valid.contains(p.program_id.as_str()))
                .map(|p| program_fingerprint(&p.code))
                .collect::<HashSet<_>>()
                .len();
            let of_api = |s: Status| {
                verdicts
                    .iter()
                    .filter(|v| v.status == s && idx.by_id[v.program_id.as_str()].api == api)
                    .count()
            };
            ApiRow {
                api: api.to_string(),
                programs: mine.len(),
                unique_programs: unique,
                unique_valid,
                crashes: of_api(Status::Crash),
                inconsistencies: of_api(Status::Inconsistency),
            }
        })
        .collect();

    let mut crash_groups: BTreeMap<String, (BTreeSet<&str>, Option<&str>)> = BTreeMap::new();
    for v in verdicts {
        if let Some(sig) = &v.crash_signature {
            let entry = crash_groups.entry(sig.id()).or_default();
            entry.0.insert(&v.program_id);
            if entry
                .1
                .is_none_or(|d| v.detail.as_deref().is_some_and(|x| x < d))
            {
                entry.1 = v.detail.as_deref().or(entry.1);
            }
        }
    }
    let crashes = crash_groups
        .into_iter()
        .map(|(signature, (ids, msg))| CrashRow {
            signature,
            program_count: ids.len(),
            representative: ids.first().map(|s| s.to_string()).unwrap_or_default(),
            program_ids: ids.into_iter().map(str::to_string).collect(),
            sample_message: msg.map(str::to_string),
        })
        .collect();

    let mut inconsistencies: Vec<InconsistencyRow> = verdicts
        .iter()
        .filter_map(|v| {
            v.inconsistency.as_ref().map(|i| InconsistencyRow {
                program_id: v.program_id.clone(),
                api: v.api.clone(),
                mode: v.mode,
                kind: i.kind,
                max_rel_err: i.max_rel_err,
                deviating_mode: i.deviating_mode,
            })
        })
        .collect();
    inconsistencies.sort_by(|a, b| (&a.program_id, a.mode).cmp(&(&b.program_id, b.mode)));

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        summary,
        status_counts,
        per_api,
        crashes,
        inconsistencies,
    })
}

fn fmt_err(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4e}")
    } else {
        format!("{x}")
    }
}

fn status_name(s: Status) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Human-readable digest of a report.
pub fn render_markdown(r: &Report) -> String {
    let s = &r.summary;
    let mut md = String::new();
    let _ = writeln!(md, "# Campaign report\n");
    let _ = writeln!(md, "| metric | value |\n|---|---|");
    for (k, v) in [
        ("APIs targeted", s.apis_targeted.to_string()),
        ("APIs covered (valid)", s.apis_covered_valid.to_string()),
        ("APIs covered (all)", s.apis_covered_all.to_string()),
        (
            "unique programs (valid)",
            s.unique_programs_valid.to_string(),
        ),
        ("unique programs (all)", s.unique_programs_all.to_string()),
        ("valid rate", format!("{:.2}%", s.valid_rate * 100.0)),
        ("unique crashes", s.unique_crash_count.to_string()),
        ("inconsistencies", s.inconsistency_count.to_string()),
    ] {
        let _ = writeln!(md, "| {k} | {v} |");
    }

    let _ = writeln!(md, "\n## Verdicts\n\n| status | count |\n|---|---|");
    for (status, n) in &r.status_counts {
        let _ = writeln!(md, "| {} | {n} |", status_name(*status));
    }

    let _ = writeln!(
        md,
        "\n## Per API\n\n| API | programs | unique | unique valid | crashes | inconsistencies |\n|---|---|---|---|---|---|"
    );
    for a in &r.per_api {
        let _ = writeln!(
            md,
            "| `{}` | {} | {} | {} | {} | {} |",
            a.api, a.programs, a.unique_programs, a.unique_valid, a.crashes, a.inconsistencies
        );
    }

    let _ = writeln!(md, "\n## Crashes\n");
    if r.crashes.is_empty() {
        let _ = writeln!(md, "none");
    } else {
        let _ = writeln!(
            md,
            "| signature | programs | representative | message |\n|---|---|---|---|"
        );
        for c in &r.crashes {
            let _ = writeln!(
                md,
                "| `{}` | {} | `{}` | {} |",
                c.signature,
                c.program_count,
                c.representative,
                c.sample_message
                    .as_deref()
                    .unwrap_or("")
                    .replace('|', "\\|")
            );
        }
    }

    let _ = writeln!(md, "\n## Inconsistencies\n");
    if r.inconsistencies.is_empty() {
        let _ = writeln!(md, "none");
    } else {
        let _ = writeln!(md, "| program | API | oracle | kind | max rel. error | deviating |\n|---|---|---|---|---|---|");
        for i in &r.inconsistencies {
            let kind = match i.kind {
                InconsistencyKind::BackendDivergence => "backend_divergence",
                InconsistencyKind::GradientDivergence => "gradient_divergence",
            };
            let dev = match i.deviating_mode {
                Some(AdMode::Reverse) => "reverse",
                Some(AdMode::Forward) => "forward",
                None => "",
            };
            let _ = writeln!(
                md,
                "| `{}` | `{}` | {} | {kind} | {} | {dev} |",
                i.program_id,
                i.api,
                i.mode,
                fmt_err(i.max_rel_err)
            );
        }
    }

    let _ = writeln!(
        md,
        "\n## Coverage trend\n\n| programs per API | unique valid |\n|---|---|"
    );
    for p in &s.coverage_trend {
        let _ = writeln!(md, "| {} | {} |", p.programs_per_api, p.unique_valid);
    }
    md
}
