//! C ABI over the orchestrator core.
//!
//! Every fallible function returns an [`FgStatus`]; on failure a message is
//! available from [`fg_last_error`] on the same thread. Strings handed out
//! through `out` parameters are owned by the caller and must be released
//! with [`fg_string_free`]. Datasets are opaque handles released with
//! [`fg_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fuzzgpt::annotator::parse_api_label;
use fuzzgpt::corpus::{clean_snippet, CleanOptions};
use fuzzgpt::executor::{
    adjudicate_diff, crash_signature, DiffOutcome, ExitInfo, NumericArray, Tolerances,
};
use fuzzgpt::llmclient::GeneratedProgram;
use fuzzgpt::metrics::{normalize_program, summarize, SummaryOptions};
use fuzzgpt::promptgen::{
    build_fewshot_prompt, build_instruct_prompt, select_examples, InstructStyle, SamplingParams,
    SelectionStrategy,
};
use fuzzgpt::{jsonl, LabeledExample, Verdict};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

/// Labeled examples loaded from a dataset JSONL file.
pub struct FgDataset {
    examples: Vec<LabeledExample>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FgStatus, String);

fn fail(status: FgStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FgStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn input<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FgStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            FgStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

/// # Safety
/// `out` must be null or valid for a pointer write.
unsafe fn emit(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(FgStatus::NullArgument, "`out` is null"));
    }
    let c = CString::new(s).map_err(|_| fail(FgStatus::InvalidArgument, "result contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a labeled dataset (JSONL) into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_load(
    path: *const c_char,
    out: *mut *mut FgDataset,
) -> FgStatus {
    guard(|| {
        let path = input(path, "path")?;
        if out.is_null() {
            return Err(fail(FgStatus::NullArgument, "`out` is null"));
        }
        let examples: Vec<LabeledExample> = jsonl::read(Path::new(path)).map_err(|e| match e {
            jsonl::JsonlError::Io { .. } => fail(FgStatus::Io, e.to_string()),
            jsonl::JsonlError::Parse { .. } => fail(FgStatus::Parse, e.to_string()),
        })?;
        *out = Box::into_raw(Box::new(FgDataset { examples }));
        Ok(())
    })
}

/// Number of examples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle from [`fg_dataset_load`].
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_len(ds: *const FgDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.examples.len())
}

/// # Safety
/// `ds` must be null or a handle from [`fg_dataset_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_free(ds: *mut FgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Renders a few-shot prompt for `target_api` from `k` randomly chosen
/// examples.
///
/// # Safety
/// `ds` must be a live handle; `target_api` a NUL-terminated string; `out`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_render_fewshot(
    ds: *const FgDataset,
    target_api: *const c_char,
    k: usize,
    seed: u64,
    cot: bool,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let ds = ds
            .as_ref()
            .ok_or_else(|| fail(FgStatus::NullArgument, "`ds` is null"))?;
        let api = input(target_api, "target_api")?;
        let examples = select_examples(&ds.examples, api, &SelectionStrategy::random(k, seed))
            .map_err(|e| fail(FgStatus::InvalidArgument, e.to_string()))?;
        let prompt = build_fewshot_prompt(&examples, api, cot, SamplingParams::GENERATION);
        emit(out, prompt.text)
    })
}

/// Renders the user message of an instruct prompt. `style` is one of
/// `baseline`, `unseen`, `creative`, `non-conventional`.
///
/// # Safety
/// All string arguments must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_render_instruct(
    target_api: *const c_char,
    style: *const c_char,
    library: *const c_char,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let api = input(target_api, "target_api")?;
        let style: InstructStyle =
            input(style, "style")?
                .parse()
                .map_err(|e: fuzzgpt::promptgen::PromptError| {
                    fail(FgStatus::InvalidArgument, e.to_string())
                })?;
        let library = input(library, "library")?;
        let prompt = build_instruct_prompt(api, style, library, SamplingParams::GENERATION)
            .map_err(|e| fail(FgStatus::InvalidArgument, e.to_string()))?;
        emit(out, prompt.text)
    })
}

/// # Safety
/// `raw` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_clean_snippet(raw: *const c_char, out: *mut *mut c_char) -> FgStatus {
    guard(|| {
        let raw = input(raw, "raw")?;
        emit(out, clean_snippet(raw, &CleanOptions::default()))
    })
}

/// Parses a labeling completion into a dotted API name.
///
/// # Safety
/// `completion` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_parse_api_label(
    completion: *const c_char,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let completion = input(completion, "completion")?;
        let api = parse_api_label(completion).map_err(|e| fail(FgStatus::Parse, e.to_string()))?;
        emit(out, api)
    })
}

/// Crash signature id (`cause:key`). Pass a negative `signal` or
/// `exit_code` when unknown.
///
/// # Safety
/// `stderr_tail` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_crash_signature(
    signal: i32,
    exit_code: i32,
    stderr_tail: *const c_char,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let tail = input(stderr_tail, "stderr_tail")?;
        let exit = ExitInfo {
            signal: (signal >= 0).then_some(signal),
            code: (exit_code >= 0).then_some(exit_code),
        };
        emit(out, crash_signature(exit, tail).id())
    })
}

fn parse_outputs(json: &str, name: &str) -> Result<Vec<NumericArray>, Failure> {
    let v: serde_json::Value =
        serde_json::from_str(json).map_err(|e| fail(FgStatus::Parse, format!("`{name}`: {e}")))?;
    let items = v.as_array().ok_or_else(|| {
        fail(
            FgStatus::Parse,
            format!("`{name}` must be a JSON array of values"),
        )
    })?;
    items
        .iter()
        .map(NumericArray::from_json)
        .collect::<Result<_, _>>()
        .map_err(|e| fail(FgStatus::Parse, format!("`{name}`: {e}")))
}

/// Compares two backends' outputs, each a JSON array of values. Writes
/// whether they agree and the largest relative error among disagreeing
/// elements (0 when consistent).
///
/// # Safety
/// `a_json` and `b_json` must be NUL-terminated; the out pointers valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_adjudicate_diff(
    a_json: *const c_char,
    b_json: *const c_char,
    rtol: f64,
    atol: f64,
    out_consistent: *mut bool,
    out_max_rel_err: *mut f64,
) -> FgStatus {
    guard(|| {
        let a = parse_outputs(input(a_json, "a_json")?, "a_json")?;
        let b = parse_outputs(input(b_json, "b_json")?, "b_json")?;
        if out_consistent.is_null() || out_max_rel_err.is_null() {
            return Err(fail(FgStatus::NullArgument, "output pointer is null"));
        }
        if !(rtol >= 0.0 && atol >= 0.0) {
            return Err(fail(FgStatus::InvalidArgument, "tolerances must be >= 0"));
        }
        let (ok, err) = match adjudicate_diff(&a, &b, &Tolerances { rtol, atol }) {
            DiffOutcome::Consistent => (true, 0.0),
            DiffOutcome::Inconsistent { max_rel_err } => (false, max_rel_err),
        };
        *out_consistent = ok;
        *out_max_rel_err = err;
        Ok(())
    })
}

/// # Safety
/// `code` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_normalize_program(
    code: *const c_char,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let code = input(code, "code")?;
        emit(out, normalize_program(code))
    })
}

/// Summarizes a campaign from its program and verdict JSONL files; writes
/// the summary as JSON.
///
/// # Safety
/// Both paths must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fg_summarize_files(
    programs_path: *const c_char,
    verdicts_path: *const c_char,
    out: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let load_err = |e: jsonl::JsonlError| match e {
            jsonl::JsonlError::Io { .. } => fail(FgStatus::Io, e.to_string()),
            jsonl::JsonlError::Parse { .. } => fail(FgStatus::Parse, e.to_string()),
        };
        let programs: Vec<GeneratedProgram> =
            jsonl::read(Path::new(input(programs_path, "programs_path")?)).map_err(load_err)?;
        let verdicts: Vec<Verdict> =
            jsonl::read(Path::new(input(verdicts_path, "verdicts_path")?)).map_err(load_err)?;
        let summary = summarize(&programs, &verdicts, &SummaryOptions::default())
            .map_err(|e| fail(FgStatus::InvalidArgument, e.to_string()))?;
        let json =
            serde_json::to_string(&summary).map_err(|e| fail(FgStatus::Parse, e.to_string()))?;
        emit(out, json)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(f: impl FnOnce(*mut *mut c_char) -> FgStatus) -> Result<String, (FgStatus, String)> {
        let mut out: *mut c_char = ptr::null_mut();
        let status = f(&mut out);
        if status != FgStatus::Ok {
            // SAFETY: fg_last_error returns null or a live NUL-terminated string.
            let msg = unsafe { CStr::from_ptr(fg_last_error()) }
                .to_string_lossy()
                .into_owned();
            return Err((status, msg));
        }
        // SAFETY: on success `out` holds a string from this library.
        let s = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
        unsafe { fg_string_free(out) };
        Ok(s)
    }

    #[test]
    fn null_and_utf8_errors() {
        let err = call(|out| unsafe { fg_clean_snippet(ptr::null(), out) }).unwrap_err();
        assert_eq!(err.0, FgStatus::NullArgument);
        assert!(err.1.contains("raw"));
        let bad = [0xffu8, 0];
        let err = call(|out| unsafe { fg_clean_snippet(bad.as_ptr().cast(), out) }).unwrap_err();
        assert_eq!(err.0, FgStatus::InvalidUtf8);
    }

    #[test]
    fn string_functions() {
        let raw = CString::new(">>> x = 1\n1").unwrap();
        assert_eq!(
            call(|o| unsafe { fg_clean_snippet(raw.as_ptr(), o) }).unwrap(),
            "x = 1"
        );
        let label = CString::new(" torch.nn.Fold.\nmore").unwrap();
        assert_eq!(
            call(|o| unsafe { fg_parse_api_label(label.as_ptr(), o) }).unwrap(),
            "torch.nn.Fold"
        );
        let junk = CString::new("no idea").unwrap();
        assert_eq!(
            call(|o| unsafe { fg_parse_api_label(junk.as_ptr(), o) })
                .unwrap_err()
                .0,
            FgStatus::Parse
        );
        let code = CString::new("x=1\n# c\n\nx=1 ").unwrap();
        assert_eq!(
            call(|o| unsafe { fg_normalize_program(code.as_ptr(), o) }).unwrap(),
            "x=1\nx=1\n"
        );
    }

    #[test]
    fn instruct_and_signature() {
        let api = CString::new("torch.add").unwrap();
        let style = CString::new("creative").unwrap();
        let lib = CString::new("PyTorch").unwrap();
        assert_eq!(
            call(|o| unsafe { fg_render_instruct(api.as_ptr(), style.as_ptr(), lib.as_ptr(), o) })
                .unwrap(),
            "Please generate a program to use torch.add in a very creative way"
        );
        let tail = CString::new("segfault at 0x1").unwrap();
        let a = call(|o| unsafe { fg_crash_signature(11, -1, tail.as_ptr(), o) }).unwrap();
        assert!(a.starts_with("signal(11):"), "{a}");
    }

    #[test]
    fn diff() {
        let a = CString::new("[[1.0, 2.0]]").unwrap();
        let b = CString::new(r#"[[1.0, "NaN"]]"#).unwrap();
        let mut ok = true;
        let mut err = 0.0;
        let st =
            unsafe { fg_adjudicate_diff(a.as_ptr(), b.as_ptr(), 1e-2, 1e-3, &mut ok, &mut err) };
        assert_eq!(st, FgStatus::Ok);
        assert!(!ok && err.is_infinite());
    }

    #[test]
    fn dataset_handle() {
        let dir = std::env::temp_dir().join(format!("fg-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.jsonl");
        let rows: Vec<String> = (0..3)
            .map(|i| {
                format!(
                    r#"{{"snippet_id":"s{i}","title":"t{i}","code":"x = m.f{i}()","api":"m.f{i}","label_origin":"manual"}}"#
                )
            })
            .collect();
        std::fs::write(&path, rows.join("\n")).unwrap();
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut ds: *mut FgDataset = ptr::null_mut();
        assert_eq!(
            unsafe { fg_dataset_load(cpath.as_ptr(), &mut ds) },
            FgStatus::Ok
        );
        assert_eq!(unsafe { fg_dataset_len(ds) }, 3);
        let api = CString::new("m.g").unwrap();
        let text = call(|o| unsafe { fg_render_fewshot(ds, api.as_ptr(), 2, 7, true, o) }).unwrap();
        assert!(text.ends_with("API: m.g\nBug description:"), "{text}");
        assert_eq!(text.matches("API: ").count(), 3);
        let too_many = call(|o| unsafe { fg_render_fewshot(ds, api.as_ptr(), 9, 7, true, o) });
        assert_eq!(too_many.unwrap_err().0, FgStatus::InvalidArgument);
        unsafe { fg_dataset_free(ds) };
        std::fs::remove_dir_all(&dir).unwrap();

        let missing = CString::new("/nonexistent/d.jsonl").unwrap();
        let mut ds: *mut FgDataset = ptr::null_mut();
        assert_eq!(
            unsafe { fg_dataset_load(missing.as_ptr(), &mut ds) },
            FgStatus::Io
        );
        assert!(ds.is_null());
    }
}
