use std::fs;
use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::LazyLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::numeric::{f64_from_json, NumericArray};
use super::oracle::{adjudicate_ad, adjudicate_diff, DiffOutcome, Tolerances};
use super::signature::{crash_signature, ExitInfo};
use super::{ExecMode, Inconsistency, InconsistencyKind, Status, Verdict, VerdictFlag};
use crate::hashing::short_hash;

/// Exit status a shim uses to report its own internal failure.
pub const SHIM_INTERNAL_EXIT: i32 = 70;

/// Lines of stderr kept for crash signatures and diagnostics.
const STDERR_TAIL_LINES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecRequest {
    pub program_id: String,
    pub code: String,
    pub mode: ExecMode,
    pub target_api: String,
    pub timeout_s: f64,
}

/// What the shim receives on stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShimRequest {
    pub program_path: PathBuf,
    pub mode: ExecMode,
    pub target_api: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_pair: Option<[String; 2]>,
    pub timeout_s: f64,
}

/// What a shim that exits normally prints as its last stdout line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShimResponse {
    pub status: String,
    #[serde(default)]
    pub exception: Option<String>,
    #[serde(default)]
    pub invoked_apis: Vec<String>,
    #[serde(default)]
    pub trace_available: Option<bool>,
    #[serde(default)]
    pub outputs: Option<Vec<Vec<Value>>>,
    #[serde(default)]
    pub grad_rev: Option<Value>,
    #[serde(default)]
    pub grad_fwd: Option<Value>,
    #[serde(default)]
    pub grad_nd: Option<Value>,
}

/// Shim invocation, split into argv with shell quoting rules but executed
/// without a shell so signals reach us unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShimCommand {
    argv: Vec<String>,
}

impl ShimCommand {
    pub fn parse(cmd: &str) -> Result<Self, String> {
        let argv = shell_words::split(cmd).map_err(|e| format!("shim command: {e}"))?;
        if argv.is_empty() {
            return Err("shim command is empty".into());
        }
        Ok(Self { argv })
    }

    pub fn from_argv(argv: Vec<String>) -> Self {
        assert!(!argv.is_empty(), "shim argv must be nonempty");
        Self { argv }
    }

    fn command(&self) -> Command {
        let mut c = Command::new(&self.argv[0]);
        c.args(&self.argv[1..]);
        c
    }
}

fn drain<R: Read + Send + 'static>(r: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let mut r = r;
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

fn kill_group(child: &Child) {
    // SAFETY: kill(2) with a negative pid signals the process group we
    // created for this child; it has no memory-safety preconditions.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

fn wait_with_deadline(child: &mut Child, timeout: Duration) -> std::io::Result<Option<ExitStatus>> {
    let deadline = Instant::now() + timeout;
    let mut nap = Duration::from_millis(1);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if Instant::now() >= deadline {
            return Ok(None);
        }
        thread::sleep(nap);
        nap = (nap * 2).min(Duration::from_millis(25));
    }
}

fn tail(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(STDERR_TAIL_LINES)..].join("\n")
}

/// Wrappers such as `sh` report a child's fatal signal as 128 + n.
fn exit_info(status: ExitStatus) -> ExitInfo {
    match (status.signal(), status.code()) {
        (Some(sig), _) => ExitInfo {
            signal: Some(sig),
            code: None,
        },
        (None, Some(code)) if (129..=192).contains(&code) => ExitInfo {
            signal: Some(code - 128),
            code: Some(code),
        },
        (None, code) => ExitInfo { signal: None, code },
    }
}

/// Executes one program under the shim. Never panics on shim misbehavior:
/// everything becomes a verdict.
pub fn run_program(
    req: &ExecRequest,
    shim: &ShimCommand,
    workdir: &Path,
    backend_pair: &[String; 2],
    tol: &Tolerances,
) -> Verdict {
    let tool_error = |detail: String| {
        let mut v = Verdict::new(req, Status::ToolError);
        v.detail = Some(detail);
        v
    };

    let file = workdir.join(format!(
        "{}-{}.py",
        short_hash(req.program_id.as_bytes(), 16),
        req.mode
    ));
    if let Err(e) = fs::write(&file, &req.code) {
        return tool_error(format!("cannot write program file: {e}"));
    }
    let shim_req = ShimRequest {
        program_path: file.clone(),
        mode: req.mode,
        target_api: req.target_api.clone(),
        backend_pair: (req.mode == ExecMode::DiffBackend).then(|| backend_pair.clone()),
        timeout_s: req.timeout_s,
    };
    let payload = serde_json::to_string(&shim_req).expect("request serializes") + "\n";

    let mut cmd = shim.command();
    cmd.stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            let _ = fs::remove_file(&file);
            return tool_error(format!("cannot spawn shim: {e}"));
        }
    };
    let stdout = drain(child.stdout.take().expect("piped"));
    let stderr = drain(child.stderr.take().expect("piped"));
    if let Some(mut stdin) = child.stdin.take() {
        // The shim may exit before reading; its exit status tells the story.
        let _ = stdin.write_all(payload.as_bytes());
    }

    let timeout = Duration::from_secs_f64(req.timeout_s.max(0.001));
    let status = match wait_with_deadline(&mut child, timeout) {
        Ok(Some(s)) => Some(s),
        Ok(None) => {
            kill_group(&child);
            let _ = child.wait();
            None
        }
        Err(e) => {
            kill_group(&child);
            let _ = child.wait();
            let _ = fs::remove_file(&file);
            return tool_error(format!("waiting for shim: {e}"));
        }
    };
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();
    let _ = fs::remove_file(&file);

    let Some(status) = status else {
        let mut v = Verdict::new(req, Status::Timeout);
        v.detail = Some(format!("killed after {} s", req.timeout_s));
        return v;
    };

    let stderr_tail = tail(&err);
    if status.success() {
        let text = String::from_utf8_lossy(&out);
        let last = text
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("");
        return match serde_json::from_str::<ShimResponse>(last) {
            Ok(resp) => verdict_from_response(req, &resp, tol),
            Err(e) => tool_error(format!("unparseable shim response: {e}")),
        };
    }
    if status.code() == Some(SHIM_INTERNAL_EXIT) {
        return tool_error(format!("shim internal failure: {stderr_tail}"));
    }
    let info = exit_info(status);
    let mut v = Verdict::new(req, Status::Crash);
    v.crash_signature = Some(crash_signature(info, &stderr_tail));
    v.detail = Some(stderr_tail.lines().last().unwrap_or("").to_string());
    v
}

/// True if `code` mentions `api` as a whole dotted name.
fn mentions_api(code: &str, api: &str) -> bool {
    static CACHE: LazyLock<std::sync::Mutex<std::collections::HashMap<String, Regex>>> =
        LazyLock::new(Default::default);
    let mut cache = CACHE.lock().expect("regex cache");
    let re = cache.entry(api.to_string()).or_insert_with(|| {
        Regex::new(&format!(r"(^|[^\w.]){}($|[^\w])", regex::escape(api))).expect("escaped regex")
    });
    re.is_match(code)
}

fn parse_vector(v: &Value) -> Result<Vec<f64>, String> {
    match v {
        Value::Array(_) => NumericArray::from_json(v).map(|a| a.data),
        scalar => f64_from_json(scalar).map(|x| vec![x]),
    }
}

/// Maps a normal shim response onto a verdict for `req`.
pub fn verdict_from_response(req: &ExecRequest, resp: &ShimResponse, tol: &Tolerances) -> Verdict {
    let mut v = Verdict::new(req, Status::Pass);
    v.invoked_apis = resp.invoked_apis.clone();
    let tool_error = |mut v: Verdict, detail: String| {
        v.status = Status::ToolError;
        v.detail = Some(detail);
        v
    };

    match resp.status.as_str() {
        "pass" | "ok" => {}
        "exception" => {
            v.status = Status::InvalidException;
            v.exception = Some(resp.exception.clone().unwrap_or_else(|| "Exception".into()));
            return v;
        }
        other => return tool_error(v, format!("unknown shim status `{other}`")),
    }

    let invoked = if resp.trace_available == Some(false) {
        v.flags.push(VerdictFlag::StaticScanFallback);
        mentions_api(&req.code, &req.target_api)
    } else {
        v.invoked_apis.iter().any(|a| a == &req.target_api)
    };
    if invoked && !v.invoked_apis.contains(&req.target_api) {
        v.invoked_apis.push(req.target_api.clone());
    }

    match req.mode {
        ExecMode::Plain => {}
        ExecMode::DiffBackend => {
            let Some(outputs) = &resp.outputs else {
                return tool_error(v, "diff_backend response without outputs".into());
            };
            if outputs.len() != 2 {
                return tool_error(v, format!("expected 2 output runs, got {}", outputs.len()));
            }
            let parse = |run: &Vec<Value>| -> Result<Vec<NumericArray>, String> {
                run.iter().map(NumericArray::from_json).collect()
            };
            let (a, b) = match (parse(&outputs[0]), parse(&outputs[1])) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return tool_error(v, format!("bad outputs: {e}")),
            };
            if let DiffOutcome::Inconsistent { max_rel_err } = adjudicate_diff(&a, &b, tol) {
                v.status = Status::Inconsistency;
                v.inconsistency = Some(Inconsistency {
                    kind: InconsistencyKind::BackendDivergence,
                    max_rel_err,
                    deviating_mode: None,
                });
                return v;
            }
        }
        ExecMode::Ad => match (&resp.grad_rev, &resp.grad_nd) {
            (None, None) => {}
            (Some(rev), Some(nd)) => {
                let fwd = match resp.grad_fwd.as_ref().filter(|f| !f.is_null()) {
                    Some(f) => match parse_vector(f) {
                        Ok(f) => Some(f),
                        Err(e) => return tool_error(v, format!("bad grad_fwd: {e}")),
                    },
                    None => None,
                };
                let (rev, nd) = match (parse_vector(rev), parse_vector(nd)) {
                    (Ok(r), Ok(n)) => (r, n),
                    (Err(e), _) | (_, Err(e)) => {
                        return tool_error(v, format!("bad gradient: {e}"))
                    }
                };
                let out = adjudicate_ad(&rev, fwd.as_deref(), &nd, tol);
                if out.forward_unavailable {
                    v.flags.push(VerdictFlag::ForwardModeUnavailable);
                }
                if !out.consistent {
                    v.status = Status::Inconsistency;
                    v.inconsistency = Some(Inconsistency {
                        kind: InconsistencyKind::GradientDivergence,
                        max_rel_err: out.max_rel_err,
                        deviating_mode: out.deviating_mode,
                    });
                    return v;
                }
            }
            _ => return tool_error(v, "ad response needs both grad_rev and grad_nd".into()),
        },
    }

    if !invoked {
        v.status = Status::InvalidTargetNotInvoked;
    }
    v
}
