//! Heuristic cleanup of snippets pasted from interactive sessions and error
//! logs.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Each heuristic can be switched off individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanOptions {
    /// Strip `>>> ` and `... ` session prompts, keeping the statement.
    pub strip_prompts: bool,
    /// Drop traceback headers, `File "..."` frames and exception lines.
    pub drop_tracebacks: bool,
    /// Drop lines without a prompt once a session has started.
    pub drop_session_output: bool,
    pub collapse_blank_lines: bool,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            strip_prompts: true,
            drop_tracebacks: true,
            drop_session_output: true,
            collapse_blank_lines: true,
        }
    }
}

static EXCEPTION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[A-Za-z_][A-Za-z0-9_.]*(Error|Exception|Warning|Interrupt|Exit)(:.*)?$")
        .expect("valid regex")
});

const PRIMARY: &str = ">>>";
const CONTINUATION: &str = "...";

fn strip_one<'a>(line: &'a str, prompt: &str) -> Option<&'a str> {
    if line == prompt {
        Some("")
    } else {
        line.strip_prefix(prompt)?.strip_prefix(' ')
    }
}

/// Removes every leading prompt. `...` only counts as a prompt inside a
/// session, since outside one it is a legitimate `Ellipsis` statement.
fn strip_prompts(mut line: &str, in_session: bool) -> (&str, bool) {
    let mut stripped = false;
    loop {
        let next = strip_one(line, PRIMARY).or_else(|| {
            if in_session || stripped {
                strip_one(line, CONTINUATION)
            } else {
                None
            }
        });
        match next {
            Some(rest) => {
                line = rest;
                stripped = true;
            }
            None => return (line, stripped),
        }
    }
}

fn is_exception_line(line: &str) -> bool {
    EXCEPTION_LINE.is_match(line)
}

/// Cleans one raw snippet. Returns an empty string when nothing survives;
/// callers discard such snippets.
pub fn clean_snippet(raw: &str, opts: &CleanOptions) -> String {
    let mut kept: Vec<&str> = Vec::new();
    let mut in_session = false;
    let mut in_traceback = false;

    for raw_line in raw.lines() {
        let line = raw_line.trim_end();
        let starts_session = strip_one(line, PRIMARY).is_some();
        let (stripped, had_prompt) = strip_prompts(line, in_session || starts_session);
        if starts_session {
            in_session = true;
        }
        let line = if opts.strip_prompts {
            stripped.trim_end()
        } else {
            line
        };

        if opts.drop_session_output && in_session && !had_prompt {
            continue;
        }

        if opts.drop_tracebacks {
            if in_traceback {
                if line.is_empty() {
                    in_traceback = false;
                } else {
                    if is_exception_line(line) {
                        in_traceback = false;
                    }
                    continue;
                }
            }
            if line.starts_with("Traceback") {
                in_traceback = true;
                continue;
            }
            if line.trim_start().starts_with("File \"") || is_exception_line(line) {
                continue;
            }
        }
        kept.push(line);
    }

    let mut out: Vec<&str> = Vec::with_capacity(kept.len());
    for line in kept {
        if opts.collapse_blank_lines && line.is_empty() && out.last().is_some_and(|l| l.is_empty())
        {
            continue;
        }
        out.push(line);
    }
    if opts.collapse_blank_lines {
        while out.first().is_some_and(|l| l.is_empty()) {
            out.remove(0);
        }
        while out.last().is_some_and(|l| l.is_empty()) {
            out.pop();
        }
    }
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(s: &str) -> String {
        clean_snippet(s, &CleanOptions::default())
    }

    #[test]
    fn prompt_and_output() {
        assert_eq!(clean(">>> x=1\n1"), "x=1");
    }

    #[test]
    fn traceback_dropped() {
        assert_eq!(
            clean("a=f()\nTraceback (most recent call last):\n  File \"t\""),
            "a=f()"
        );
    }

    #[test]
    fn full_traceback_block() {
        let raw = "import m\nm.g()\nTraceback (most recent call last):\n  File \"x.py\", line 2, in <module>\n    m.g()\nRuntimeError: boom\n\nprint(1)";
        assert_eq!(clean(raw), "import m\nm.g()\n\nprint(1)");
    }

    #[test]
    fn continuation_lines_kept_in_session() {
        let raw = ">>> for i in range(2):\n...     print(i)\n...\n0\n1\n>>> y = 2";
        assert_eq!(clean(raw), "for i in range(2):\n    print(i)\n\ny = 2");
    }

    #[test]
    fn ellipsis_outside_session_is_code() {
        assert_eq!(clean("def f():\n    ...\n..."), "def f():\n    ...\n...");
    }

    #[test]
    fn lines_before_session_survive() {
        assert_eq!(
            clean("import torch\n>>> torch.zeros(1)\ntensor([0.])"),
            "import torch\ntorch.zeros(1)"
        );
    }

    #[test]
    fn blank_runs_collapse() {
        assert_eq!(clean("\n\na=1\n\n\n\nb=2  \n\n"), "a=1\n\nb=2");
    }

    #[test]
    fn exception_line_mid_code() {
        assert_eq!(clean("x = 1\nValueError: bad shape\ny = 2"), "x = 1\ny = 2");
        // Indented or statement forms are code.
        assert_eq!(
            clean("try:\n    pass\nexcept ValueError: pass"),
            "try:\n    pass\nexcept ValueError: pass"
        );
    }

    #[test]
    fn nothing_survives() {
        assert_eq!(
            clean("Traceback (most recent call last):\n  File \"a\"\nKeyError: 1"),
            ""
        );
    }

    #[test]
    fn toggles() {
        let opts = CleanOptions {
            strip_prompts: false,
            drop_session_output: false,
            ..CleanOptions::default()
        };
        assert_eq!(clean_snippet(">>> x=1\n1", &opts), ">>> x=1\n1");
        let opts = CleanOptions {
            drop_tracebacks: false,
            ..CleanOptions::default()
        };
        assert_eq!(clean_snippet("a\nKeyError: 1", &opts), "a\nKeyError: 1");
    }

    #[test]
    fn nested_prompts_fully_stripped() {
        assert_eq!(clean(">>> >>> x"), "x");
        assert_eq!(clean(clean(">>> >>> x").as_str()), "x");
    }
}
