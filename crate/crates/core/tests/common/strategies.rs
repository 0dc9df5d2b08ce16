use proptest::prelude::*;

use fuzzgpt::corpus::{PrState, ReportKind};
use fuzzgpt::BugReport;

/// Lines in the style of pasted sessions, tracebacks and plain scripts.
pub fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z]{1,3} = mt\\.[a-z]{2,5}\\([0-9, ]{0,6}\\)",
        2 => "print\\([a-z]{1,3}\\)",
        1 => Just("import mt".to_string()),
        1 => Just("def f(a):".to_string()),
        1 => Just("    return a + 1".to_string()),
        2 => "(>>>|\\.\\.\\.) [a-z]{1,3} = [0-9]{1,3}",
        1 => Just(">>> ".to_string()),
        1 => Just("Traceback (most recent call last):".to_string()),
        1 => Just("  File \"t.py\", line 3, in <module>".to_string()),
        1 => "(Value|Runtime|Index)Error: [a-z ]{0,12}",
        1 => "tensor\\(\\[[0-9., ]{0,10}\\]\\)",
        1 => Just(String::new()),
        1 => Just("   ".to_string()),
        1 => Just("s = '```'".to_string()),
        1 => Just("x = (1,".to_string()),
    ]
}

pub fn code() -> impl Strategy<Value = String> {
    prop::collection::vec(line(), 0..12).prop_map(|ls| ls.join("\n"))
}

fn block() -> impl Strategy<Value = String> {
    (
        prop_oneof![
            Just(""),
            Just("python"),
            Just("py"),
            Just("text"),
            Just("bash")
        ],
        code(),
    )
        .prop_map(|(info, code)| {
            let fence = fuzzgpt::corpus::fence_for(&code);
            format!("{fence}{info}\n{code}\n{fence}\n")
        })
}

fn report_body() -> impl Strategy<Value = (ReportKind, Option<PrState>, String, String)> {
    let kind = prop_oneof![Just(ReportKind::Issue), Just(ReportKind::PullRequest)];
    let state = prop_oneof![
        Just(None),
        Just(Some(PrState::Accepted)),
        Just(Some(PrState::Pending)),
        Just(Some(PrState::None)),
    ];
    let body = prop::collection::vec(
        prop_oneof![block(), "[A-Za-z ]{0,30}\n".prop_map(String::from)],
        0..4,
    )
    .prop_map(|parts| parts.concat());
    (kind, state, "[a-z ]{0,20}", body)
}

/// Reports with distinct ids.
pub fn reports() -> impl Strategy<Value = Vec<BugReport>> {
    prop::collection::vec(report_body(), 0..16).prop_map(|bodies| {
        bodies
            .into_iter()
            .enumerate()
            .map(|(i, (kind, pr_state, title, body))| BugReport {
                id: format!("r{i:03}"),
                kind,
                title,
                body,
                pr_state,
            })
            .collect()
    })
}
