use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::hashing::short_hash;

const SIGABRT: i32 = 6;

const INTERNAL_ASSERT_MARKERS: &[&str] = &["INTERNAL ASSERT FAILED", "INTERNAL_ASSERT_FAILED"];
const ABORT_MARKERS: &[&str] = &["Aborted", "abort()", "terminate called"];

/// How an abnormal termination was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrashCause {
    Signal(i32),
    Abort,
    InternalAssert,
    OtherFatal,
}

impl fmt::Display for CrashCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrashCause::Signal(n) => write!(f, "signal({n})"),
            CrashCause::Abort => f.write_str("abort"),
            CrashCause::InternalAssert => f.write_str("internal_assert"),
            CrashCause::OtherFatal => f.write_str("other_fatal"),
        }
    }
}

impl FromStr for CrashCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abort" => Ok(CrashCause::Abort),
            "internal_assert" => Ok(CrashCause::InternalAssert),
            "other_fatal" => Ok(CrashCause::OtherFatal),
            _ => s
                .strip_prefix("signal(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse().ok())
                .map(CrashCause::Signal)
                .ok_or_else(|| format!("unknown crash cause `{s}`")),
        }
    }
}

impl Serialize for CrashCause {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CrashCause {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Identity of a unique crash: cause plus a hash of the masked final fatal
/// line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrashSignature {
    pub cause: CrashCause,
    pub message_key: String,
}

impl CrashSignature {
    pub fn id(&self) -> String {
        format!("{}:{}", self.cause, self.message_key)
    }
}

impl fmt::Display for CrashSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cause, self.message_key)
    }
}

/// Exit information of a process that did not exit cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExitInfo {
    pub signal: Option<i32>,
    pub code: Option<i32>,
}

static HEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"0[xX][0-9a-fA-F]+").expect("regex"));
static PATH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"[^\s:'"()\[\]<>,]*[/\\][^\s:'"()\[\]<>,]*"#).expect("regex"));
static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("regex"));

/// Masks hex addresses, file paths and digit runs, in that order.
pub fn mask_message(line: &str) -> String {
    let s = HEX.replace_all(line.trim(), "<hex>");
    let s = PATH.replace_all(&s, "<path>");
    DIGITS.replace_all(&s, "N").into_owned()
}

pub fn crash_signature(exit: ExitInfo, stderr_tail: &str) -> CrashSignature {
    let has = |markers: &[&str]| markers.iter().any(|m| stderr_tail.contains(m));
    let cause = if has(INTERNAL_ASSERT_MARKERS) {
        CrashCause::InternalAssert
    } else if exit.signal == Some(SIGABRT) || has(ABORT_MARKERS) {
        CrashCause::Abort
    } else if let Some(sig) = exit.signal {
        CrashCause::Signal(sig)
    } else {
        CrashCause::OtherFatal
    };
    let last = stderr_tail
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("");
    CrashSignature {
        cause,
        message_key: short_hash(mask_message(last).as_bytes(), 16),
    }
}
