//! Admission filters: syntax validity and a token-length limit.

use std::io::Write;
use std::num::NonZeroUsize;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

/// Default token limit for admitted snippets.
pub const DEFAULT_TOKEN_LIMIT: usize = 256;

pub trait Tokenizer: Send + Sync {
    fn count(&self, code: &str) -> usize;
}

/// Splits on whitespace and on punctuation. Every ASCII punctuation
/// character except `_` is its own token; maximal runs of other
/// non-whitespace characters form one token.
#[derive(Debug, Default, Clone, Copy)]
pub struct PunctuationTokenizer;

impl PunctuationTokenizer {
    pub fn tokens(code: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, c) in code.char_indices() {
            let punct = c.is_ascii_punctuation() && c != '_';
            if c.is_whitespace() || punct {
                if let Some(s) = start.take() {
                    out.push(&code[s..i]);
                }
                if punct {
                    out.push(&code[i..i + c.len_utf8()]);
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            out.push(&code[s..]);
        }
        out
    }
}

impl Tokenizer for PunctuationTokenizer {
    fn count(&self, code: &str) -> usize {
        Self::tokens(code).len()
    }
}

pub trait SyntaxCheck: Send + Sync {
    /// `Err` carries the checker's diagnostics.
    fn check(&self, code: &str) -> Result<(), String>;
}

/// Runs an external command through `sh -c`, feeding the program on stdin.
/// Exit status 0 means valid.
#[derive(Debug, Clone)]
pub struct CommandSyntaxCheck {
    pub cmd: String,
}

impl CommandSyntaxCheck {
    pub fn new(cmd: impl Into<String>) -> Self {
        Self { cmd: cmd.into() }
    }
}

impl SyntaxCheck for CommandSyntaxCheck {
    fn check(&self, code: &str) -> Result<(), String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot spawn syntax checker `{}`: {e}", self.cmd))?;
        if let Some(mut stdin) = child.stdin.take() {
            // A checker that exits early closes the pipe; its status decides.
            let _ = stdin.write_all(code.as_bytes());
        }
        let out = child
            .wait_with_output()
            .map_err(|e| format!("syntax checker failed: {e}"))?;
        if out.status.success() {
            Ok(())
        } else {
            let diag = String::from_utf8_lossy(&out.stderr).trim().to_string();
            Err(if diag.is_empty() {
                format!("checker exited with {}", out.status)
            } else {
                diag
            })
        }
    }
}

/// Built-in fallback for Python-like code: brackets must balance and string
/// literals (including triple-quoted ones) must terminate. Comments are
/// skipped.
#[derive(Debug, Default, Clone, Copy)]
pub struct BalancedDelimiters;

impl SyntaxCheck for BalancedDelimiters {
    fn check(&self, code: &str) -> Result<(), String> {
        let chars: Vec<char> = code.chars().collect();
        let mut stack: Vec<(char, usize)> = Vec::new();
        let mut line = 1;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                '\n' => line += 1,
                '#' => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                    }
                    continue;
                }
                '\'' | '"' => {
                    let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                    let start_line = line;
                    i += if triple { 3 } else { 1 };
                    let mut closed = false;
                    while i < chars.len() {
                        match chars[i] {
                            '\\' => {
                                if chars.get(i + 1) == Some(&'\n') {
                                    line += 1;
                                }
                                i += 2;
                                continue;
                            }
                            '\n' if !triple => break,
                            '\n' => line += 1,
                            ch if ch == c => {
                                if !triple {
                                    closed = true;
                                    i += 1;
                                    break;
                                }
                                if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                                    closed = true;
                                    i += 3;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        i += 1;
                    }
                    if !closed {
                        return Err(format!("line {start_line}: unterminated string literal"));
                    }
                    continue;
                }
                '(' | '[' | '{' => stack.push((c, line)),
                ')' | ']' | '}' => {
                    let want = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    match stack.pop() {
                        Some((open, _)) if open == want => {}
                        Some((open, l)) => {
                            return Err(format!(
                                "line {line}: '{c}' does not match '{open}' opened on line {l}"
                            ))
                        }
                        None => return Err(format!("line {line}: unmatched '{c}'")),
                    }
                }
                _ => {}
            }
            i += 1;
        }
        match stack.pop() {
            Some((open, l)) => Err(format!("line {l}: '{open}' was never closed")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("syntax check failed: {diagnostics}")]
    Syntax { diagnostics: String },
    #[error("{count} tokens exceeds the limit of {limit}")]
    TooLong { count: usize, limit: usize },
}

/// Admits `cleaned` iff it passes `checker` and has at most `limit` tokens.
/// Returns the token count on success.
pub fn admit_snippet(
    cleaned: &str,
    limit: NonZeroUsize,
    checker: &dyn SyntaxCheck,
    tokenizer: &dyn Tokenizer,
) -> Result<usize, Rejection> {
    checker
        .check(cleaned)
        .map_err(|diagnostics| Rejection::Syntax { diagnostics })?;
    let count = tokenizer.count(cleaned);
    if count > limit.get() {
        return Err(Rejection::TooLong {
            count,
            limit: limit.get(),
        });
    }
    Ok(count)
}
