use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Budget, CompletionBackend};
use crate::annotator::LabeledExample;
use crate::hashing::derive_seed;
use crate::promptgen::{
    build_fewshot_prompt, build_ft_inference_prompt, build_instruct_prompt,
    build_zeroshot_completion_prompt, build_zeroshot_edit_prompt, select_examples, InstructStyle,
    Mode, Prompt, PromptError, SamplingParams, SelectionKind, SelectionStrategy,
};

/// Everything that determines which prompts a campaign issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub mode: Mode,
    pub apis: Vec<String>,
    pub budget: Budget,
    pub seed: u64,
    pub k_shot: usize,
    pub cot: bool,
    pub selection: SelectionKind,
    pub mmr_lambda: f64,
    pub instruct_style: InstructStyle,
    /// Library named in the instruct system message; defaults to the first
    /// component of each target API.
    pub library: Option<String>,
    /// `n_samples` is overridden by `budget.samples_per_prompt`.
    pub sampling: SamplingParams,
}

impl CampaignPlan {
    pub fn new(mode: Mode, apis: Vec<String>) -> Self {
        Self {
            mode,
            apis,
            budget: Budget::default(),
            seed: 42,
            k_shot: 6,
            cot: true,
            selection: SelectionKind::Random,
            mmr_lambda: 0.5,
            instruct_style: InstructStyle::Baseline,
            library: None,
            sampling: SamplingParams::GENERATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub prompt_index: usize,
    pub prompt: Prompt,
}

/// One completion materialized as a runnable program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeneratedProgram {
    pub program_id: String,
    pub api: String,
    pub mode: Mode,
    pub prompt_id: String,
    pub sample_index: usize,
    pub code: String,
    /// Bug description the model wrote before the code, for prompts that
    /// end in a description header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Splits a completion of a description-headed prompt into the description
/// (its first line) and the code that follows.
pub fn split_description(completion: &str) -> (String, &str) {
    let (first, rest) = completion.split_once('\n').unwrap_or((completion, ""));
    (first.trim().to_string(), rest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptFailure {
    pub prompt_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignOutput {
    pub prompts: Vec<PromptRecord>,
    pub programs: Vec<GeneratedProgram>,
    pub failures: Vec<PromptFailure>,
    /// Completion requests actually issued.
    pub requests: usize,
    /// Prompts skipped because they were already completed.
    pub resumed: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CampaignError {
    #[error("mode {0} cannot drive a fuzzing campaign")]
    UnsupportedMode(Mode),
    #[error("mode {0} needs a nonempty labeled dataset")]
    EmptyDataset(Mode),
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

pub fn prompt_id(api: &str, mode: Mode, index: usize) -> String {
    format!("{api}/{mode}/{index:04}")
}

pub fn program_id(prompt_id: &str, sample: usize) -> String {
    format!("{prompt_id}/{sample:04}")
}

fn library_of(api: &str) -> &str {
    api.split('.').next().unwrap_or(api)
}

/// Picks `count` example indices from `pool` for one API: distinct when the
/// pool is large enough, otherwise with replacement.
fn pick_examples(pool: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    if pool.len() >= count {
        rand::seq::index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        (0..count)
            .map(|_| pool[rng.gen_range(0..pool.len())])
            .collect()
    }
}

/// Every prompt a campaign would issue, in issue order, without contacting
/// a backend.
pub fn plan_prompts(
    plan: &CampaignPlan,
    dataset: &[LabeledExample],
) -> Result<Vec<PromptRecord>, CampaignError> {
    let mut sampling = plan.sampling;
    sampling.n_samples = plan.budget.samples_per_prompt as u32;
    sampling.validate()?;
    let seed = plan.seed.to_string();
    let n = plan.budget.prompts_per_api;

    let multiline: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset[i].code.split_inclusive('\n').count() >= 2)
        .collect();
    let all: Vec<usize> = (0..dataset.len()).collect();

    let mut out = Vec::with_capacity(plan.apis.len() * n);
    for api in &plan.apis {
        let mut api_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[&seed, api, "examples"]));
        let chosen = match plan.mode {
            Mode::ZsComplete => {
                if multiline.is_empty() {
                    return Err(PromptError::NoMultilineExample.into());
                }
                pick_examples(&multiline, n, &mut api_rng)
            }
            Mode::ZsEdit => pick_examples(&all, n, &mut api_rng),
            _ => Vec::new(),
        };
        for index in 0..n {
            let prompt_seed = derive_seed(&[&seed, api, &index.to_string()]);
            let mut rng = ChaCha8Rng::seed_from_u64(prompt_seed);
            let prompt = match plan.mode {
                Mode::Fs => {
                    let strategy = SelectionStrategy {
                        kind: plan.selection,
                        k: plan.k_shot,
                        mmr_lambda: plan.mmr_lambda,
                        seed: prompt_seed,
                    };
                    let examples = select_examples(dataset, api, &strategy)?;
                    build_fewshot_prompt(&examples, api, plan.cot, sampling)
                }
                Mode::ZsComplete => build_zeroshot_completion_prompt(
                    &dataset[chosen[index]],
                    api,
                    &mut rng,
                    sampling,
                )?,
                Mode::ZsEdit => build_zeroshot_edit_prompt(&dataset[chosen[index]], api, sampling)?,
                Mode::Instruct => {
                    let library = plan.library.as_deref().unwrap_or_else(|| library_of(api));
                    build_instruct_prompt(api, plan.instruct_style, library, sampling)?
                }
                Mode::FtInference => build_ft_inference_prompt(api, plan.cot, sampling),
                Mode::Annotate => return Err(CampaignError::UnsupportedMode(plan.mode)),
            };
            out.push(PromptRecord {
                prompt_id: prompt_id(api, plan.mode, index),
                prompt_index: index,
                prompt,
            });
        }
    }
    Ok(out)
}

/// Issues `prompts_per_api` prompts per target API and materializes every
/// returned sample as a program. Prompts listed in `completed` are skipped
/// (resumption). Backend errors are recorded per prompt and never abort the
/// campaign.
pub fn run_campaign(
    plan: &CampaignPlan,
    dataset: &[LabeledExample],
    backend: &dyn CompletionBackend,
    completed: &HashSet<String>,
) -> Result<CampaignOutput, CampaignError> {
    plan.budget.validate().map_err(CampaignError::Budget)?;
    if plan.mode == Mode::Annotate {
        return Err(CampaignError::UnsupportedMode(plan.mode));
    }
    // Few-shot with K = 0 is the only history-driven mode that runs
    // without a dataset.
    let needs_dataset = match plan.mode {
        Mode::Fs => plan.k_shot > 0,
        Mode::ZsComplete | Mode::ZsEdit => true,
        _ => false,
    };
    if needs_dataset && dataset.is_empty() && !plan.apis.is_empty() {
        return Err(CampaignError::EmptyDataset(plan.mode));
    }

    let planned = plan_prompts(plan, dataset)?;
    let (todo, done): (Vec<PromptRecord>, Vec<PromptRecord>) = planned
        .into_iter()
        .partition(|p| !completed.contains(&p.prompt_id));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(backend.max_in_flight().max(1))
        .build()
        .expect("thread pool");
    let responses: Vec<_> = pool.install(|| {
        todo.par_iter()
            .map(|rec| backend.complete(&rec.prompt))
            .collect()
    });

    let mut out = CampaignOutput {
        requests: todo.len(),
        resumed: done.len(),
        ..CampaignOutput::default()
    };
    for (rec, response) in todo.into_iter().zip(responses) {
        match response {
            Ok(completions) => {
                let prefix = rec.prompt.completion_prefix().unwrap_or("");
                let limit = plan.budget.samples_per_prompt;
                let described = plan.cot && matches!(plan.mode, Mode::Fs | Mode::FtInference);
                for (sample_index, completion) in completions.into_iter().take(limit).enumerate() {
                    let (description, body) = if described {
                        let (d, body) = split_description(&completion);
                        (Some(d), body)
                    } else {
                        (None, completion.as_str())
                    };
                    out.programs.push(GeneratedProgram {
                        program_id: program_id(&rec.prompt_id, sample_index),
                        api: rec.prompt.meta.target_api.clone(),
                        mode: plan.mode,
                        prompt_id: rec.prompt_id.clone(),
                        sample_index,
                        code: format!("{prefix}{body}"),
                        description,
                    });
                }
            }
            Err(e) => {
                log::warn!("prompt {}: {e}", rec.prompt_id);
                out.failures.push(PromptFailure {
                    prompt_id: rec.prompt_id.clone(),
                    error: e.to_string(),
                });
            }
        }
        out.prompts.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::annotator::LabelOrigin;
    use crate::llmclient::BackendError;

    struct Echo {
        calls: AtomicUsize,
        fail_api: Option<String>,
    }

    impl CompletionBackend for Echo {
        fn complete(&self, prompt: &Prompt) -> Result<Vec<String>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_api.as_deref() == Some(prompt.meta.target_api.as_str()) {
                return Err(BackendError::Protocol("boom".into()));
            }
            Ok((0..prompt.sampling.n_samples)
                .map(|i| format!("{}({i})", prompt.meta.target_api))
                .collect())
        }

        fn max_in_flight(&self) -> usize {
            3
        }
    }

    fn echo() -> Echo {
        Echo {
            calls: AtomicUsize::new(0),
            fail_api: None,
        }
    }

    fn dataset() -> Vec<LabeledExample> {
        (0..8)
            .map(|i| {
                LabeledExample::new(
                    format!("s{i}"),
                    format!("bug {i}"),
                    format!("import m\nx = m.f{i}({i})\nprint(x)"),
                    format!("m.f{i}"),
                    LabelOrigin::Model,
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn budget_accounting() {
        let backend = echo();
        let plan = CampaignPlan::new(Mode::Fs, vec!["m.a".into()]);
        let out = run_campaign(&plan, &dataset(), &backend, &HashSet::new()).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 10);
        assert_eq!(out.prompts.len(), 10);
        assert_eq!(out.programs.len(), 100);
        let ids: HashSet<_> = out.programs.iter().map(|p| &p.program_id).collect();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn zero_apis() {
        let backend = echo();
        let plan = CampaignPlan::new(Mode::ZsEdit, vec![]);
        let out = run_campaign(&plan, &[], &backend, &HashSet::new()).unwrap();
        assert!(out.programs.is_empty());
        assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn completion_programs_start_with_prefix() {
        let backend = echo();
        let mut plan = CampaignPlan::new(Mode::ZsComplete, vec!["m.z".into()]);
        plan.budget = Budget::new(4, 2);
        let out = run_campaign(&plan, &dataset(), &backend, &HashSet::new()).unwrap();
        for p in &out.programs {
            let rec = out
                .prompts
                .iter()
                .find(|r| r.prompt_id == p.prompt_id)
                .unwrap();
            let prefix = rec.prompt.completion_prefix().unwrap();
            assert!(p.code.starts_with(prefix));
            assert!(p.code.ends_with(&format!("m.z({})", p.sample_index)));
        }
        // Distinct examples per API when the dataset allows it.
        let used: HashSet<_> = out
            .prompts
            .iter()
            .map(|r| &r.prompt.meta.example_ids[0])
            .collect();
        assert_eq!(used.len(), 4);
    }

    #[test]
    fn backend_errors_are_recorded_not_fatal() {
        let backend = Echo {
            calls: AtomicUsize::new(0),
            fail_api: Some("m.bad".into()),
        };
        let mut plan = CampaignPlan::new(Mode::Instruct, vec!["m.ok".into(), "m.bad".into()]);
        plan.budget = Budget::new(2, 3);
        let out = run_campaign(&plan, &[], &backend, &HashSet::new()).unwrap();
        assert_eq!(out.requests, 4);
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.programs.len(), 6);
        assert_eq!(out.prompts.len(), 4);
    }

    #[test]
    fn resume_skips_completed_prompts() {
        let backend = echo();
        let mut plan = CampaignPlan::new(Mode::FtInference, vec!["m.a".into()]);
        plan.budget = Budget::new(3, 1);
        let done: HashSet<String> = [prompt_id("m.a", Mode::FtInference, 1)].into();
        let out = run_campaign(&plan, &[], &backend, &done).unwrap();
        assert_eq!(out.requests, 2);
        assert_eq!(out.resumed, 1);
        assert!(out.programs.iter().all(|p| !p.prompt_id.ends_with("0001")));
    }

    #[test]
    fn fewshot_needs_enough_examples() {
        let backend = echo();
        let mut plan = CampaignPlan::new(Mode::Fs, vec!["m.a".into()]);
        plan.k_shot = 20;
        assert!(matches!(
            run_campaign(&plan, &dataset(), &backend, &HashSet::new()),
            Err(CampaignError::Prompt(PromptError::DatasetTooSmall {
                need: 20,
                have: 8
            }))
        ));
        plan.k_shot = 0;
        let out = run_campaign(&plan, &[], &backend, &HashSet::new()).unwrap();
        assert_eq!(out.prompts[0].prompt.text, "API: m.a\nBug description:");
    }

    #[test]
    fn deterministic_across_runs() {
        let plan = CampaignPlan::new(Mode::Fs, vec!["m.a".into(), "m.b".into()]);
        let a = run_campaign(&plan, &dataset(), &echo(), &HashSet::new()).unwrap();
        let b = run_campaign(&plan, &dataset(), &echo(), &HashSet::new()).unwrap();
        assert_eq!(a, b);
    }
}
