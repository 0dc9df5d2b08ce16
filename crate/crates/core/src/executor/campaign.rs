use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;

use super::oracle::Tolerances;
use super::runner::{run_program, ExecRequest, ShimCommand};
use super::{ExecMode, Status, Verdict};
use crate::llmclient::GeneratedProgram;

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub jobs: usize,
    pub timeout_s: f64,
    pub tolerances: Tolerances,
    pub backend_pair: [String; 2],
    /// Where program files are written; a fresh temporary directory when
    /// `None`.
    pub workdir: Option<PathBuf>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            timeout_s: 10.0,
            tolerances: Tolerances::default(),
            backend_pair: ["reference".into(), "fast".into()],
            workdir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecOutcome {
    /// Program order, then mode order.
    pub verdicts: Vec<Verdict>,
    /// Crash signature id to the sorted ids of programs that hit it.
    pub crash_table: BTreeMap<String, Vec<String>>,
}

/// Groups crashing programs by signature id.
pub fn crash_table<'a>(
    verdicts: impl IntoIterator<Item = &'a Verdict>,
) -> BTreeMap<String, Vec<String>> {
    let mut table: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for v in verdicts {
        if let (Status::Crash, Some(sig)) = (v.status, &v.crash_signature) {
            table
                .entry(sig.id())
                .or_default()
                .insert(v.program_id.clone());
        }
    }
    table
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Executes every program once per mode on a pool of `jobs` workers.
/// `(program_id, mode)` pairs in `done` are skipped.
pub fn execute_campaign(
    programs: &[GeneratedProgram],
    modes: &[ExecMode],
    shim: &ShimCommand,
    opts: &ExecOptions,
    done: &HashSet<(String, ExecMode)>,
) -> std::io::Result<ExecOutcome> {
    let tmp;
    let workdir = match &opts.workdir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            dir.clone()
        }
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };

    let requests: Vec<ExecRequest> = programs
        .iter()
        .flat_map(|p| modes.iter().map(move |m| (p, *m)))
        .filter(|(p, m)| !done.contains(&(p.program_id.clone(), *m)))
        .map(|(p, mode)| ExecRequest {
            program_id: p.program_id.clone(),
            code: p.code.clone(),
            mode,
            target_api: p.api.clone(),
            timeout_s: opts.timeout_s,
        })
        .collect();

    let table: Mutex<BTreeMap<String, BTreeSet<String>>> = Mutex::new(BTreeMap::new());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .expect("thread pool");
    let verdicts: Vec<Verdict> = pool.install(|| {
        requests
            .par_iter()
            .map(|req| {
                let v = run_program(req, shim, &workdir, &opts.backend_pair, &opts.tolerances);
                if let Some(sig) = &v.crash_signature {
                    table
                        .lock()
                        .expect("crash table lock")
                        .entry(sig.id())
                        .or_default()
                        .insert(v.program_id.clone());
                }
                v
            })
            .collect()
    });

    let crash_table = table
        .into_inner()
        .expect("crash table lock")
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect();
    Ok(ExecOutcome {
        verdicts,
        crash_table,
    })
}
