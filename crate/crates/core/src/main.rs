use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fuzzgpt::annotator::{annotate_all, SeedLabel};
use fuzzgpt::config::{read_api_list, CampaignConfig};
use fuzzgpt::corpus::{self, fetch, CommandSyntaxCheck, Miner, MinerConfig};
use fuzzgpt::executor::{
    crash_table, execute_campaign, ExecMode, ExecOptions, ShimCommand, Verdict,
};
use fuzzgpt::jsonl;
use fuzzgpt::llmclient::{
    run_campaign, BackendSpec, Budget, CampaignPlan, CompletionBackend, GeneratedProgram,
    PromptRecord, RecordingBackend,
};
use fuzzgpt::metrics::{build_report, render_markdown, SummaryOptions};
use fuzzgpt::promptgen::{emit_finetune_dataset, InstructStyle, Mode, SelectionKind};
use fuzzgpt::LabeledExample;

#[derive(Parser)]
#[command(
    name = "fuzzgpt",
    version,
    about = "History-driven LLM fuzzing campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download issues and pull requests as an NDJSON report export.
    Fetch(FetchArgs),
    /// Extract, clean and admit code snippets from a report export.
    Mine(MineArgs),
    /// Label snippets with their buggy API, primed by seed labels.
    Annotate(AnnotateArgs),
    /// Generate programs for a list of target APIs.
    Fuzz(FuzzArgs),
    /// Run generated programs under the oracles.
    Exec(ExecArgs),
    /// Summarize a campaign.
    Report(ReportArgs),
    /// Write the labeled dataset as fine-tuning records.
    EmitFt(EmitFtArgs),
}

#[derive(Args)]
struct FetchArgs {
    /// `owner/name`.
    #[arg(long)]
    repo: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pages: usize,
    #[arg(long, default_value = "https://api.github.com")]
    api_base: String,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    reports: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = NonZeroUsize::new(256).unwrap())]
    max_tokens: NonZeroUsize,
    /// Shell command that receives a snippet on stdin and exits 0 when it
    /// parses. Defaults to a built-in delimiter check.
    #[arg(long)]
    syntax_check_cmd: Option<String>,
    /// Where to write per-reason counts (printed to stdout as well).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    snippets: PathBuf,
    #[arg(long)]
    seeds: PathBuf,
    /// `replay:DIR` or an http(s) completion endpoint.
    #[arg(long)]
    backend: String,
    #[arg(long)]
    out: PathBuf,
    /// Record every response as a replay fixture in this directory.
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// fs | zs-complete | zs-edit | instruct | ft
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    apis: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_api: Option<usize>,
    #[arg(long)]
    prompts: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_cot: bool,
    /// random | mmr
    #[arg(long)]
    selection: Option<String>,
    #[arg(long)]
    mmr_lambda: Option<f64>,
    /// baseline | unseen | creative | non-conventional
    #[arg(long)]
    style: Option<InstructStyle>,
    #[arg(long)]
    library: Option<String>,
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory or a programs JSONL file.
    #[arg(long)]
    programs: PathBuf,
    #[arg(long)]
    shim: Option<String>,
    /// Comma-separated: plain, diff, ad.
    #[arg(long, value_delimiter = ',')]
    oracles: Option<Vec<ExecMode>>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Public API list restricting coverage counts.
    #[arg(long)]
    public_apis: Option<PathBuf>,
}

#[derive(Args)]
struct EmitFtArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_cot: bool,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} file {} does not exist", path.display());
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn build_backend(spec: &BackendSpec, record: Option<&Path>) -> Result<Box<dyn CompletionBackend>> {
    let backend = spec.build()?;
    Ok(match record {
        Some(dir) => Box::new(RecordingBackend::new(backend, dir)),
        None => backend,
    })
}

fn cmd_fetch(a: FetchArgs) -> Result<()> {
    let cfg = fetch::FetchConfig {
        api_base: a.api_base,
        repo: a.repo,
        max_pages: a.pages,
        token: std::env::var("GITHUB_TOKEN").ok(),
    };
    let reports = fetch::fetch_reports(&cfg)?;
    jsonl::write(&a.out, &reports)?;
    eprintln!("fetched {} reports", reports.len());
    Ok(())
}

fn cmd_mine(a: MineArgs) -> Result<()> {
    require(&a.reports, "reports")?;
    let config = MinerConfig {
        max_tokens: a.max_tokens,
        ..MinerConfig::default()
    };
    let mut miner = Miner::new(config);
    if let Some(cmd) = a.syntax_check_cmd {
        miner = miner.with_checker(Box::new(CommandSyntaxCheck::new(cmd)));
    }
    let reports = corpus::read_reports(&a.reports)
        .with_context(|| format!("reading {}", a.reports.display()))?;
    let outcome = miner.mine(reports);
    corpus::write_store(&a.out, &outcome.snippets)?;
    if let Some(path) = &a.stats {
        write_json(path, &outcome.stats)?;
    }
    println!("{}", serde_json::to_string(&outcome.stats)?);
    Ok(())
}

fn cmd_annotate(a: AnnotateArgs) -> Result<()> {
    require(&a.snippets, "snippets")?;
    require(&a.seeds, "seeds")?;
    let store = corpus::read_store(&a.snippets)?;
    let seeds: Vec<SeedLabel> = jsonl::read(&a.seeds)?;
    let backend = build_backend(&BackendSpec::parse(&a.backend)?, a.record_dir.as_deref())?;
    let out = annotate_all(&store, &seeds, backend.as_ref())?;
    jsonl::write(&a.out, &out.dataset)?;
    jsonl::write(&sibling(&a.out, "rejects.jsonl"), &out.rejects)?;
    jsonl::write(&sibling(&a.out, "skipped.jsonl"), &out.skipped)?;
    eprintln!(
        "labeled {} ({} seeds), rejected {}, skipped {}, {} queries",
        out.dataset.len(),
        seeds.len(),
        out.rejects.len(),
        out.skipped.len(),
        out.queries
    );
    Ok(())
}

fn fuzz_config(a: &FuzzArgs) -> Result<CampaignConfig> {
    let mut c = CampaignConfig::load_or_default(a.config.as_deref())?;
    if let Some(m) = a.mode {
        c.mode = m;
    }
    if let Some(b) = &a.backend {
        c.backend = Some(BackendSpec::parse(b)?);
    }
    if let Some(p) = &a.apis {
        c.paths.apis = Some(p.clone());
    }
    if let Some(p) = &a.dataset {
        c.paths.dataset = Some(p.clone());
    }
    if let Some(p) = &a.out {
        c.paths.out_dir = Some(p.clone());
    }
    let prompts = a.prompts.unwrap_or(c.budget.prompts_per_api);
    let samples = a.samples.unwrap_or(c.budget.samples_per_prompt);
    c.budget = match a.per_api {
        Some(per_api) if a.prompts.is_none() && samples > 0 && per_api % samples == 0 => {
            Budget::new(per_api / samples, samples)
        }
        Some(per_api) => Budget {
            programs_per_api: per_api,
            prompts_per_api: prompts,
            samples_per_prompt: samples,
        },
        None => Budget::new(prompts, samples),
    };
    if let Some(k) = a.k {
        c.k_shot = k;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if a.no_cot {
        c.cot = false;
    }
    if let Some(s) = &a.selection {
        c.selection = match s.as_str() {
            "random" => SelectionKind::Random,
            "mmr" => SelectionKind::Mmr,
            other => bail!("--selection: unknown strategy `{other}` (random or mmr)"),
        };
    }
    if let Some(l) = a.mmr_lambda {
        c.mmr_lambda = l;
    }
    if let Some(s) = a.style {
        c.instruct_style = s;
    }
    if let Some(l) = &a.library {
        c.library = Some(l.clone());
    }
    c.validate()?;
    if let Some(p) = &c.paths.apis {
        c.apis = read_api_list(p).with_context(|| format!("reading APIs file {}", p.display()))?;
    }
    Ok(c)
}

fn cmd_fuzz(a: FuzzArgs) -> Result<()> {
    if let Some(p) = &a.apis {
        require(p, "APIs")?;
    }
    let c = fuzz_config(&a)?;
    let Some(out_dir) = c.paths.out_dir.clone() else {
        bail!("--out (or paths.out_dir) is required");
    };
    let Some(spec) = &c.backend else {
        bail!("--backend (or backend) is required");
    };
    let dataset: Vec<LabeledExample> = match &c.paths.dataset {
        Some(p) => jsonl::read(p)?,
        None if matches!(c.mode, Mode::Instruct | Mode::FtInference) => Vec::new(),
        None => bail!("--dataset is required for mode {}", c.mode),
    };

    let plan = CampaignPlan {
        budget: c.budget,
        seed: c.seed,
        k_shot: c.k_shot,
        cot: c.cot,
        selection: c.selection,
        mmr_lambda: c.mmr_lambda,
        instruct_style: c.instruct_style,
        library: c.library.clone(),
        ..CampaignPlan::new(c.mode, c.apis.clone())
    };

    let programs_path = out_dir.join("programs.jsonl");
    let prompts_path = out_dir.join("prompts.jsonl");
    let mut programs: Vec<GeneratedProgram> = jsonl::read_or_empty(&programs_path)?;
    let mut prompts: Vec<PromptRecord> = jsonl::read_or_empty(&prompts_path)?;
    let completed: HashSet<String> = programs.iter().map(|p| p.prompt_id.clone()).collect();

    let backend = build_backend(spec, a.record_dir.as_deref())?;
    let out = run_campaign(&plan, &dataset, backend.as_ref(), &completed)?;

    let known: HashSet<String> = prompts.iter().map(|p| p.prompt_id.clone()).collect();
    prompts.extend(
        out.prompts
            .into_iter()
            .filter(|p| !known.contains(&p.prompt_id)),
    );
    let existing: HashSet<String> = programs.iter().map(|p| p.program_id.clone()).collect();
    let before = programs.len();
    programs.extend(
        out.programs
            .into_iter()
            .filter(|p| !existing.contains(&p.program_id)),
    );

    write_json(&out_dir.join("config.json"), &c)?;
    jsonl::write(&prompts_path, &prompts)?;
    jsonl::write(&programs_path, &programs)?;
    jsonl::write(&out_dir.join("failures.jsonl"), &out.failures)?;
    eprintln!(
        "{} requests, {} new programs ({} total), {} prompts resumed, {} failed",
        out.requests,
        programs.len() - before,
        programs.len(),
        out.resumed,
        out.failures.len()
    );
    Ok(())
}

fn programs_file(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("programs.jsonl")
    } else {
        p.to_path_buf()
    }
}

fn cmd_exec(a: ExecArgs) -> Result<()> {
    let mut c = CampaignConfig::load_or_default(a.config.as_deref())?;
    if let Some(s) = a.shim {
        c.shim = Some(s);
    }
    if let Some(o) = a.oracles {
        c.oracles = o;
    }
    if let Some(t) = a.timeout {
        c.timeout_s = t;
    }
    if let Some(j) = a.jobs {
        c.jobs = j;
    }
    if let Some(r) = a.rtol {
        c.tolerances.rtol = r;
    }
    if let Some(r) = a.atol {
        c.tolerances.atol = r;
    }
    c.validate()?;
    let Some(shim) = &c.shim else {
        bail!("--shim (or shim) is required");
    };
    let shim = ShimCommand::parse(shim).map_err(anyhow::Error::msg)?;

    let path = programs_file(&a.programs);
    require(&path, "programs")?;
    let programs: Vec<GeneratedProgram> = jsonl::read(&path)?;

    let verdicts_path = a.out.join("verdicts.jsonl");
    let mut verdicts: Vec<Verdict> = jsonl::read_or_empty(&verdicts_path)?;
    let done: HashSet<(String, ExecMode)> = verdicts
        .iter()
        .map(|v| (v.program_id.clone(), v.mode))
        .collect();

    let opts = ExecOptions {
        jobs: c.jobs,
        timeout_s: c.timeout_s,
        tolerances: c.tolerances,
        backend_pair: c.backend_pair.clone(),
        workdir: None,
    };
    let outcome = execute_campaign(&programs, &c.oracles, &shim, &opts, &done)?;
    let ran = outcome.verdicts.len();
    verdicts.extend(outcome.verdicts);

    jsonl::write(&verdicts_path, &verdicts)?;
    write_json(&a.out.join("crashes.json"), &crash_table(&verdicts))?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for v in &verdicts {
        *counts
            .entry(
                serde_json::to_value(v.status)?
                    .as_str()
                    .unwrap_or("")
                    .to_string(),
            )
            .or_default() += 1;
    }
    eprintln!("ran {ran} executions ({} skipped); {counts:?}", done.len());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let programs_path = programs_file(&a.run);
    require(&programs_path, "programs")?;
    let programs: Vec<GeneratedProgram> = jsonl::read(&programs_path)?;
    let verdicts: Vec<Verdict> = jsonl::read_or_empty(&a.results.join("verdicts.jsonl"))?;

    let config_path = a.run.join("config.json");
    let targeted_apis = if config_path.is_file() {
        Some(CampaignConfig::load(&config_path)?.apis).filter(|a| !a.is_empty())
    } else {
        None
    };
    let public_apis = match &a.public_apis {
        Some(p) => Some(read_api_list(p)?.into_iter().collect::<BTreeSet<_>>()),
        None => None,
    };
    let opts = SummaryOptions {
        targeted_apis,
        public_apis,
    };
    let report = build_report(&programs, &verdicts, &opts)?;
    write_json(&a.out.join("report.json"), &report)?;
    fs::write(a.out.join("report.md"), render_markdown(&report))?;
    println!("{}", serde_json::to_string(&report.summary)?);
    Ok(())
}

fn cmd_emit_ft(a: EmitFtArgs) -> Result<()> {
    require(&a.dataset, "dataset")?;
    let dataset: Vec<LabeledExample> = jsonl::read(&a.dataset)?;
    let records = emit_finetune_dataset(&dataset, !a.no_cot)?;
    jsonl::write(&a.out, &records)?;
    eprintln!("wrote {} records", records.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fetch(a) => cmd_fetch(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Exec(a) => cmd_exec(a),
        Command::Report(a) => cmd_report(a),
        Command::EmitFt(a) => cmd_emit_ft(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
