use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::annotator::LabeledExample;
use crate::corpus::PunctuationTokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    #[default]
    Random,
    Mmr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: SelectionKind,
    pub k: usize,
    /// Relevance/diversity trade-off, only read for `Mmr`.
    pub mmr_lambda: f64,
    pub seed: u64,
}

impl SelectionStrategy {
    pub fn random(k: usize, seed: u64) -> Self {
        Self {
            kind: SelectionKind::Random,
            k,
            mmr_lambda: 0.5,
            seed,
        }
    }

    pub fn mmr(k: usize, lambda: f64) -> Self {
        Self {
            kind: SelectionKind::Mmr,
            k,
            mmr_lambda: lambda,
            seed: 0,
        }
    }
}

/// Token set of the code unioned with the API's dotted components.
pub fn similarity_set(code: &str, api: &str) -> BTreeSet<String> {
    PunctuationTokenizer::tokens(code)
        .into_iter()
        .chain(api.split('.'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// |a ∩ b| / |a ∪ b|, with two empty sets scoring 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Picks `strategy.k` distinct examples.
///
/// `Random` draws uniformly without replacement from a ChaCha stream seeded
/// with `strategy.seed`. `Mmr` greedily maximizes
/// `λ·sim(e, target) − (1−λ)·max sim(e, picked)`, where the target's set is
/// the dotted components of `target_api`; ties go to the earlier example.
pub fn select_examples<'a>(
    dataset: &'a [LabeledExample],
    target_api: &str,
    strategy: &SelectionStrategy,
) -> Result<Vec<&'a LabeledExample>, PromptError> {
    let k = strategy.k;
    if dataset.len() < k {
        return Err(PromptError::DatasetTooSmall {
            need: k,
            have: dataset.len(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    match strategy.kind {
        SelectionKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
            Ok(rand::seq::index::sample(&mut rng, dataset.len(), k)
                .into_iter()
                .map(|i| &dataset[i])
                .collect())
        }
        SelectionKind::Mmr => {
            let lambda = strategy.mmr_lambda;
            if !(0.0..=1.0).contains(&lambda) {
                return Err(PromptError::InvalidLambda(lambda));
            }
            let target: BTreeSet<String> = target_api
                .split('.')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
            let sets: Vec<_> = dataset
                .iter()
                .map(|e| similarity_set(&e.code, &e.api))
                .collect();
            let relevance: Vec<f64> = sets.iter().map(|s| jaccard(s, &target)).collect();
            let mut picked: Vec<usize> = Vec::with_capacity(k);
            while picked.len() < k {
                let mut best: Option<(usize, f64)> = None;
                for i in (0..dataset.len()).filter(|i| !picked.contains(i)) {
                    let redundancy = picked
                        .iter()
                        .map(|&j| jaccard(&sets[i], &sets[j]))
                        .fold(0.0, f64::max);
                    let score = lambda * relevance[i] - (1.0 - lambda) * redundancy;
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some((i, score));
                    }
                }
                picked.push(best.expect("k <= dataset.len()").0);
            }
            Ok(picked.into_iter().map(|i| &dataset[i]).collect())
        }
    }
}
