//! Property checks across module boundaries.

mod common;

use std::collections::HashSet;

use fuzzgpt::corpus::{clean_snippet, CleanOptions, Miner, MinerConfig};
use fuzzgpt::executor::{adjudicate_diff, DiffOutcome, NumericArray, Tolerances};
use fuzzgpt::metrics::{count_unique, normalize_program, summarize, SummaryOptions};
use fuzzgpt::{BugReport, ExecMode, GeneratedProgram, Mode, Status, Verdict};
use proptest::prelude::*;

use common::strategies::{code, line, reports};

fn mine(reports: &[BugReport]) -> Vec<fuzzgpt::Snippet> {
    Miner::new(MinerConfig::default())
        .mine(reports.iter().cloned().map(Ok::<_, String>))
        .snippets
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clean_is_a_fixpoint(raw in code()) {
        let opts = CleanOptions::default();
        let once = clean_snippet(&raw, &opts);
        prop_assert_eq!(clean_snippet(&once, &opts), once);
    }

    #[test]
    fn remining_the_store_changes_nothing(rs in reports()) {
        let store = mine(&rs);
        let again = mine(&store.iter().map(|s| s.to_report()).collect::<Vec<_>>());
        prop_assert_eq!(again, store);
    }

    #[test]
    fn mining_ignores_report_order(rs in reports(), seed in any::<u64>()) {
        let mut shuffled = rs.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(mine(&shuffled), mine(&rs));
    }

    #[test]
    fn admitted_snippets_are_within_limit(rs in reports()) {
        for s in mine(&rs) {
            prop_assert!(s.token_count <= 256 && s.token_count > 0);
        }
    }
}

fn brute_force_unique(codes: &[String]) -> usize {
    let normed: Vec<String> = codes.iter().map(|c| normalize_program(c)).collect();
    (0..normed.len())
        .filter(|&i| (0..i).all(|j| normed[j] != normed[i]))
        .count()
}

fn near_duplicates() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        (0usize..8, prop::collection::vec(line(), 1..4), 0usize..4).prop_map(
            |(base, extra, variant)| {
                let body = format!("x = mt.ones({base})\n{}", extra.join("\n"));
                match variant {
                    0 => body,
                    1 => format!("# comment\n{body}\n\n"),
                    2 => body
                        .lines()
                        .map(|l| format!("{l}  "))
                        .collect::<Vec<_>>()
                        .join("\n"),
                    _ => format!("\n{body}"),
                }
            },
        ),
        0..200,
    )
}

fn arrays(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![8 => -1e3f64..1e3, 1 => Just(f64::NAN), 1 => Just(f64::INFINITY)],
        len,
    )
}

fn program(i: usize, api: &str, code: &str) -> GeneratedProgram {
    GeneratedProgram {
        program_id: format!("{api}/fs/0000/{i:04}"),
        api: api.into(),
        mode: Mode::Fs,
        prompt_id: format!("{api}/fs/0000"),
        sample_index: i,
        code: code.into(),
        description: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hash_dedup_matches_pairwise(codes in near_duplicates()) {
        prop_assert_eq!(count_unique(codes.iter().map(String::as_str)), brute_force_unique(&codes));
    }

    #[test]
    fn diff_oracle_is_symmetric((a, b) in (1usize..6).prop_flat_map(|n| (arrays(n), arrays(n)))) {
        let tol = Tolerances::default();
        let x = [NumericArray::vector(a)];
        let y = [NumericArray::vector(b)];
        let ab = adjudicate_diff(&x, &y, &tol);
        let ba = adjudicate_diff(&y, &x, &tol);
        prop_assert_eq!(
            matches!(ab, DiffOutcome::Consistent),
            matches!(ba, DiffOutcome::Consistent)
        );
        prop_assert_eq!(adjudicate_diff(&x, &x, &tol), DiffOutcome::Consistent);
    }

    #[test]
    fn summary_ignores_input_order(
        rows in prop::collection::vec((0usize..3, 0usize..5, 0usize..4), 1..60),
        seed in any::<u64>(),
    ) {
        let apis = ["mt.add", "mt.sum", "mt.max"];
        let statuses = [Status::Pass, Status::InvalidException, Status::Crash, Status::InvalidTargetNotInvoked];
        let mut programs = Vec::new();
        let mut verdicts = Vec::new();
        let mut seen = HashSet::new();
        for (i, &(a, body, s)) in rows.iter().enumerate() {
            let p = program(i, apis[a], &format!("y = {}({body})\n", apis[a]));
            if !seen.insert(p.program_id.clone()) {
                continue;
            }
            let req = fuzzgpt::executor::ExecRequest {
                program_id: p.program_id.clone(),
                code: p.code.clone(),
                mode: ExecMode::Plain,
                target_api: p.api.clone(),
                timeout_s: 1.0,
            };
            let mut v = Verdict::new(&req, statuses[s]);
            if statuses[s] == Status::Pass {
                v.invoked_apis = vec![p.api.clone()];
            }
            if statuses[s] == Status::Crash {
                v.crash_signature = Some(fuzzgpt::executor::crash_signature(
                    fuzzgpt::executor::ExitInfo { signal: Some(11), code: None },
                    &format!("boom {body}"),
                ));
            }
            programs.push(p);
            verdicts.push(v);
        }
        let opts = SummaryOptions::default();
        let base = summarize(&programs, &verdicts, &opts).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(programs.as_mut_slice(), &mut rng);
        rand::seq::SliceRandom::shuffle(verdicts.as_mut_slice(), &mut rng);
        let shuffled = summarize(&programs, &verdicts, &opts).unwrap();
        prop_assert_eq!(base.unique_programs_all, shuffled.unique_programs_all);
        prop_assert_eq!(base.unique_programs_valid, shuffled.unique_programs_valid);
        prop_assert_eq!(base.valid_rate, shuffled.valid_rate);
        prop_assert_eq!(base.unique_crash_count, shuffled.unique_crash_count);
        prop_assert_eq!(base.apis_covered_all, shuffled.apis_covered_all);
    }
}
