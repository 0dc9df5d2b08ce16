//! Byte-exact comparisons against the hand-written prompt files.

use std::collections::BTreeMap;
use std::fs;

use fuzzgpt::annotator::build_annotation_prompt;
use fuzzgpt::promptgen::{
    build_fewshot_prompt, build_instruct_prompt, build_zeroshot_edit_prompt, emit_finetune_dataset,
    render_example_block, zeroshot_completion_at, InstructStyle, SamplingParams,
};
use fuzzgpt::{jsonl, LabeledExample};

use super::fixture;

const TARGET: &str = "mt.max";

fn golden(name: &str) -> String {
    fs::read_to_string(fixture(&format!("prompts/{name}"))).unwrap()
}

fn same(what: &str, got: &str, want: &str) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn examples() -> Vec<LabeledExample> {
    jsonl::read(&fixture("prompts/examples.jsonl")).unwrap()
}

pub fn fewshot() -> Result<(), String> {
    let ex = examples();
    let refs: Vec<&LabeledExample> = ex.iter().collect();
    for (cot, file) in [(true, "fewshot_cot.txt"), (false, "fewshot_nocot.txt")] {
        let p = build_fewshot_prompt(&refs, TARGET, cot, SamplingParams::GENERATION);
        same(file, &p.text, &golden(file))?;
        if p.stop_sequences != ["API:"] {
            return Err(format!("{file}: stop {:?}", p.stop_sequences));
        }
    }
    let s = SamplingParams::GENERATION;
    if (s.temperature, s.top_p, s.max_tokens, s.n_samples) != (0.8, 0.95, 256, 10) {
        return Err(format!("generation sampling {s:?}"));
    }
    let empty = build_fewshot_prompt(&[], TARGET, true, SamplingParams::GENERATION);
    same("k=0 few-shot", &empty.text, "API: mt.max\nBug description:")
}

pub fn zero_shot() -> Result<(), String> {
    let ex = examples();
    let p = zeroshot_completion_at(&ex[0], TARGET, 2, SamplingParams::GENERATION)
        .map_err(|e| e.to_string())?;
    same("zs_complete.txt", &p.text, &golden("zs_complete.txt"))?;
    let p = build_zeroshot_edit_prompt(&ex[1], TARGET, SamplingParams::GENERATION)
        .map_err(|e| e.to_string())?;
    same("zs_edit.txt", &p.text, &golden("zs_edit.txt"))
}

pub fn instruct() -> Result<(), String> {
    let want: BTreeMap<String, String> = serde_json::from_str(&golden("instruct.json")).unwrap();
    for style in InstructStyle::ALL {
        let p = build_instruct_prompt(TARGET, style, "mt", SamplingParams::GENERATION)
            .map_err(|e| e.to_string())?;
        same(style.name(), &p.text, &want[style.name()])?;
        same("system", p.system.as_deref().unwrap_or(""), &want["system"])?;
    }
    Ok(())
}

pub fn annotation() -> Result<(), String> {
    let ex = examples();
    for (seeds, file) in [
        (&ex[..1], "annotation_1seed.txt"),
        (&ex[..2], "annotation_2seed.txt"),
    ] {
        let target = fuzzgpt::Snippet {
            snippet_id: ex[2].snippet_id.clone(),
            source_id: "r".into(),
            title: ex[2].title.clone(),
            code: ex[2].code.clone(),
            token_count: 0,
        };
        let p = build_annotation_prompt(seeds, &target).map_err(|e| e.to_string())?;
        same(file, &p.text, &golden(file))?;
        if p.stop_sequences != ["\n"] || p.sampling.temperature != 0.0 {
            return Err(format!("{file}: not greedy to end of line"));
        }
    }
    Ok(())
}

pub fn finetune() -> Result<(), String> {
    let ex = examples();
    for (cot, file) in [
        (true, "finetune_cot.jsonl"),
        (false, "finetune_nocot.jsonl"),
    ] {
        let records = emit_finetune_dataset(&ex, cot).map_err(|e| e.to_string())?;
        let got: String = records
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        same(file, &got, &golden(file))?;
    }
    Ok(())
}

/// A fine-tune record is exactly the block the same example contributes to
/// a few-shot prompt.
pub fn parity() -> Result<(), String> {
    let ex = examples();
    for cot in [true, false] {
        let records = emit_finetune_dataset(&ex, cot).map_err(|e| e.to_string())?;
        for (e, r) in ex.iter().zip(&records) {
            same("record vs block", &r.text, &render_example_block(e, cot))?;
            let prompt = build_fewshot_prompt(&[e], TARGET, cot, SamplingParams::GENERATION);
            if !prompt.text.starts_with(&format!("{}\n\n", r.text)) {
                return Err(format!(
                    "{}: record is not the prompt's example block",
                    e.snippet_id
                ));
            }
        }
    }
    Ok(())
}

pub type Check = fn() -> Result<(), String>;

pub const ALL: [(&str, Check); 6] = [
    ("few-shot", fewshot),
    ("zero-shot", zero_shot),
    ("instruct", instruct),
    ("annotation", annotation),
    ("fine-tune", finetune),
    ("parity", parity),
];
