//! Stand-in for a library shim. Instead of running the program it obeys
//! `# stub:` directives embedded in it, so executor behavior can be tested
//! without any target library installed.
//!
//! ```text
//! # stub: invoke m.f m.g                  APIs reported as invoked
//! # stub: exception ValueError: bad       uncaught exception
//! # stub: crash signal=11 stderr=...      die by signal after printing stderr
//! # stub: abort stderr=...                abort(3)
//! # stub: exit code=3 stderr=...          nonzero exit
//! # stub: hang                            never answer
//! # stub: outputs [[1.0], [1.5]]          per-backend outputs (diff_backend)
//! # stub: grads {"rev": [..], "fwd": [..], "nd": [..]}
//! # stub: notrace                         no call trace available
//! # stub: garbage                         unparseable response
//! # stub: internal                        shim-internal failure
//! ```
//!
//! `# stub[MODE]:` restricts a directive to one executor mode.

use std::io::{self, Read, Write};
use std::process::ExitCode;
use std::time::Duration;

use serde_json::{json, Map, Value};

const INTERNAL: u8 = 70;

fn directives<'a>(code: &'a str, mode: &str) -> Vec<(&'a str, &'a str)> {
    code.lines()
        .filter_map(|line| {
            let rest = line.trim().strip_prefix("# stub")?;
            let body = if let Some(r) = rest.strip_prefix(':') {
                r
            } else {
                let (scope, r) = rest.strip_prefix('[')?.split_once("]:")?;
                if scope != mode {
                    return None;
                }
                r
            };
            let body = body.trim();
            Some(body.split_once(' ').unwrap_or((body, "")))
        })
        .collect()
}

/// `key=value` pairs; `stderr=` swallows the rest of the line.
fn kv<'a>(args: &'a str, key: &str) -> Option<&'a str> {
    if key == "stderr" {
        return args.split_once("stderr=").map(|(_, v)| v);
    }
    let head = args.split("stderr=").next().unwrap_or("");
    head.split_whitespace()
        .find_map(|w| w.strip_prefix(key)?.strip_prefix('='))
}

fn die(sig: i32) -> ! {
    // SAFETY: restoring the default disposition and signalling ourselves
    // has no memory-safety preconditions.
    unsafe {
        libc::signal(sig, libc::SIG_DFL);
        libc::raise(sig);
    }
    std::process::exit(128 + sig)
}

fn main() -> ExitCode {
    let mut input = String::new();
    if io::stdin().read_to_string(&mut input).is_err() {
        return ExitCode::from(INTERNAL);
    }
    let req: Value = match serde_json::from_str(input.trim()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("stub shim: bad request: {e}");
            return ExitCode::from(INTERNAL);
        }
    };
    let mode = req["mode"].as_str().unwrap_or("plain");
    let Some(code) = req["program_path"]
        .as_str()
        .and_then(|p| std::fs::read_to_string(p).ok())
    else {
        eprintln!("stub shim: cannot read program");
        return ExitCode::from(INTERNAL);
    };

    let mut resp = Map::new();
    resp.insert("status".into(), json!("pass"));
    resp.insert("invoked_apis".into(), json!([]));
    if mode == "diff_backend" {
        resp.insert("outputs".into(), json!([[], []]));
    }

    for (verb, args) in directives(&code, mode) {
        let stderr = kv(args, "stderr").unwrap_or("");
        match verb {
            "invoke" => {
                let apis: Vec<&str> = args.split_whitespace().collect();
                resp.insert("invoked_apis".into(), json!(apis));
            }
            "exception" => {
                resp.insert("status".into(), json!("exception"));
                resp.insert("exception".into(), json!(args));
            }
            "crash" => {
                eprintln!("{stderr}");
                die(kv(args, "signal")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(libc::SIGSEGV));
            }
            "abort" => {
                eprintln!("{stderr}");
                // SAFETY: abort(3) never returns and touches no Rust state.
                unsafe { libc::abort() }
            }
            "exit" => {
                eprintln!("{stderr}");
                let code = kv(args, "code").and_then(|s| s.parse().ok()).unwrap_or(1u8);
                return ExitCode::from(code);
            }
            "hang" => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            "outputs" => match serde_json::from_str::<Value>(args) {
                Ok(v) => {
                    resp.insert("outputs".into(), v);
                }
                Err(e) => {
                    eprintln!("stub shim: bad outputs directive: {e}");
                    return ExitCode::from(INTERNAL);
                }
            },
            "grads" => match serde_json::from_str::<Map<String, Value>>(args) {
                Ok(g) => {
                    for (k, v) in g {
                        resp.insert(format!("grad_{k}"), v);
                    }
                }
                Err(e) => {
                    eprintln!("stub shim: bad grads directive: {e}");
                    return ExitCode::from(INTERNAL);
                }
            },
            "notrace" => {
                resp.insert("trace_available".into(), json!(false));
            }
            "garbage" => {
                println!("this is not json");
                return ExitCode::SUCCESS;
            }
            "internal" => return ExitCode::from(INTERNAL),
            other => {
                eprintln!("stub shim: unknown directive `{other}`");
                return ExitCode::from(INTERNAL);
            }
        }
    }

    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{}", Value::Object(resp));
    ExitCode::SUCCESS
}
