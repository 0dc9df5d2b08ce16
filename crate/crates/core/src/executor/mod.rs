//! Runs generated programs through an external shim process and turns what
//! happens into verdicts.
//!
//! The shim speaks one JSON object each way over stdio:
//!
//! ```text
//! request:  {"program_path", "mode", "target_api", "backend_pair"?: [a, b], "timeout_s"}
//! response: {"status": "pass" | "exception", "exception"?, "invoked_apis": [...],
//!            "trace_available"?: bool,
//!            "outputs"?: [[value, ...], [value, ...]],      // diff_backend: one list per backend
//!            "grad_rev"?, "grad_fwd"?, "grad_nd"?: [number, ...]}   // ad
//! ```
//!
//! Values are numbers or rectangular nested lists; NaN and infinities are
//! sent as `"NaN"`, `"Infinity"` and `"-Infinity"`. A shim that dies
//! abnormally is the crash channel. Exit status [`SHIM_INTERNAL_EXIT`] marks
//! a fault inside the shim itself.

mod campaign;
pub mod numeric;
mod oracle;
mod runner;
mod signature;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use campaign::{crash_table, execute_campaign, ExecOptions, ExecOutcome};
pub use numeric::NumericArray;
pub use oracle::{
    adjudicate_ad, adjudicate_diff, elements_agree, relative_error, AdMode, AdOutcome, DiffOutcome,
    Tolerances,
};
pub use runner::{
    run_program, verdict_from_response, ExecRequest, ShimCommand, ShimRequest, ShimResponse,
    SHIM_INTERNAL_EXIT,
};
pub use signature::{crash_signature, mask_message, CrashCause, CrashSignature, ExitInfo};

/// Which oracle a run feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Plain,
    DiffBackend,
    Ad,
}

impl ExecMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecMode::Plain => "plain",
            ExecMode::DiffBackend => "diff_backend",
            ExecMode::Ad => "ad",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecMode {
    type Err = String;

    /// Accepts the oracle names used on the command line as well.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" | "crash" => Ok(ExecMode::Plain),
            "diff" | "diff_backend" | "diff-backend" => Ok(ExecMode::DiffBackend),
            "ad" | "grad" => Ok(ExecMode::Ad),
            other => Err(format!(
                "unknown oracle `{other}` (expected plain, diff or ad)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    InvalidException,
    InvalidTargetNotInvoked,
    Crash,
    Inconsistency,
    Timeout,
    /// The shim misbehaved; not a finding about the target.
    ToolError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconsistencyKind {
    BackendDivergence,
    GradientDivergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub kind: InconsistencyKind,
    #[serde(with = "numeric::lenient_f64")]
    pub max_rel_err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviating_mode: Option<AdMode>,
}

/// Annotations on how a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictFlag {
    /// Target invocation was decided by scanning source text.
    StaticScanFallback,
    /// Only reverse-mode vs numerical gradients were compared.
    ForwardModeUnavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub program_id: String,
    pub api: String,
    pub mode: ExecMode,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash_signature: Option<CrashSignature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconsistency: Option<Inconsistency>,
    #[serde(default)]
    pub invoked_apis: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<VerdictFlag>,
}

impl Verdict {
    pub fn new(req: &ExecRequest, status: Status) -> Self {
        Self {
            program_id: req.program_id.clone(),
            api: req.target_api.clone(),
            mode: req.mode,
            status,
            crash_signature: None,
            inconsistency: None,
            invoked_apis: Vec::new(),
            exception: None,
            detail: None,
            flags: Vec::new(),
        }
    }

    /// `crash_signature` iff crash, `inconsistency` iff inconsistency.
    pub fn is_well_formed(&self) -> bool {
        (self.crash_signature.is_some() == (self.status == Status::Crash))
            && (self.inconsistency.is_some() == (self.status == Status::Inconsistency))
    }

    /// Ran to completion and invoked the target API.
    pub fn is_valid_run(&self) -> bool {
        matches!(self.status, Status::Pass | Status::Inconsistency)
            && self.invoked_apis.iter().any(|a| a == &self.api)
    }
}
