use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "fuzzgpt.h"

int main(void) {
    char *out = NULL;
    if (fg_clean_snippet(">>> y = 2\n2", &out) != FG_STATUS_OK) return 1;
    if (strcmp(out, "y = 2") != 0) return 2;
    fg_string_free(out);

    bool ok = true;
    double err = 0.0;
    if (fg_adjudicate_diff("[1.0]", "[1.5]", 1e-2, 1e-3, &ok, &err) != FG_STATUS_OK) return 3;
    if (ok || err < 0.3 || err > 0.4) return 4;

    FgStatus st = fg_parse_api_label(NULL, &out);
    if (st != FG_STATUS_NULL_ARGUMENT || fg_last_error() == NULL) return 5;

    FgDataset *ds = NULL;
    if (fg_dataset_load("/nonexistent.jsonl", &ds) != FG_STATUS_IO || ds != NULL) return 6;
    fg_dataset_free(ds);
    printf("%s\n", fg_version());
    return 0;
}
"#;

fn cc() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .map(str::to_string)
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header_dir().join("fuzzgpt.h")).unwrap();
    for sym in [
        "typedef struct FgDataset FgDataset;",
        "FG_STATUS_OK = 0",
        "fg_last_error",
        "fg_string_free",
        "fg_dataset_load",
        "fg_dataset_len",
        "fg_dataset_free",
        "fg_render_fewshot",
        "fg_render_instruct",
        "fg_clean_snippet",
        "fg_parse_api_label",
        "fg_crash_signature",
        "fg_adjudicate_diff",
        "fg_normalize_program",
        "fg_summarize_files",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_dir())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

/// Links the test program against the shared library cargo builds next to
/// this test binary.
#[test]
fn c_program_runs() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap();
    if !profile_dir.join("libfuzzgpt_ffi.so").exists() {
        eprintln!("libfuzzgpt_ffi.so not built; skipping link test");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-I"])
        .arg(header_dir())
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg("-L")
        .arg(profile_dir)
        .arg("-lfuzzgpt_ffi")
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .env("LD_LIBRARY_PATH", profile_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        env!("CARGO_PKG_VERSION")
    );
}
