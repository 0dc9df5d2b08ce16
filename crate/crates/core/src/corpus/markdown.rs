//! Fenced code block extraction.
//!
//! Only fenced blocks (backtick or tilde, three or more) are recognized.
//! Indented code blocks are ignored because bug reports rarely use them and
//! they are indistinguishable from indented prose in list items.

/// A fenced block with its info string (the text after the opening fence).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    pub info: String,
    pub code: String,
}

struct Fence {
    ch: char,
    len: usize,
}

/// Parses an opening fence: up to three spaces of indent, then a run of at
/// least three '`' or '~'.
fn opening_fence(line: &str) -> Option<(Fence, &str)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let ch = rest.chars().next().filter(|c| *c == '`' || *c == '~')?;
    let len = rest.chars().take_while(|c| *c == ch).count();
    if len < 3 {
        return None;
    }
    let info = rest[len..].trim();
    if ch == '`' && info.contains('`') {
        // Inline code span such as ```x```, not a fence.
        return None;
    }
    Some((Fence { ch, len }, info))
}

fn closes(line: &str, fence: &Fence) -> bool {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return false;
    }
    let rest = &line[indent..];
    let len = rest.chars().take_while(|c| *c == fence.ch).count();
    len >= fence.len && rest[len..].trim().is_empty()
}

/// All fenced blocks of `body` in document order, including their info
/// strings. An unterminated fence runs to the end of the body. Blocks whose
/// content is only whitespace are omitted.
pub fn fenced_blocks(body: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(Fence, String, Vec<&str>)> = None;
    for raw in body.split('\n') {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        match open.take() {
            None => {
                if let Some((fence, info)) = opening_fence(line) {
                    open = Some((fence, info.to_string(), Vec::new()));
                }
            }
            Some((fence, info, mut lines)) => {
                if closes(line, &fence) {
                    push_block(&mut blocks, info, &lines);
                } else {
                    lines.push(line);
                    open = Some((fence, info, lines));
                }
            }
        }
    }
    if let Some((_, info, lines)) = open {
        push_block(&mut blocks, info, &lines);
    }
    blocks
}

fn push_block(blocks: &mut Vec<FencedBlock>, info: String, lines: &[&str]) {
    let code = lines.join("\n");
    if !code.trim().is_empty() {
        blocks.push(FencedBlock { info, code });
    }
}

/// Picks a fence long enough that no line of `code` can close it.
pub fn fence_for(code: &str) -> String {
    let longest = code
        .lines()
        .map(|l| l.trim_start().chars().take_while(|c| *c == '`').count())
        .max()
        .unwrap_or(0);
    "`".repeat(longest.max(2) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(body: &str) -> Vec<String> {
        fenced_blocks(body).into_iter().map(|b| b.code).collect()
    }

    #[test]
    fn two_blocks_in_order() {
        let body = "text\n```\na=1\n```\nmore\n```python\nb=2\n```\n";
        assert_eq!(codes(body), vec!["a=1", "b=2"]);
        assert_eq!(fenced_blocks(body)[1].info, "python");
    }

    #[test]
    fn no_fences() {
        assert!(codes("just prose\n\n    indented").is_empty());
    }

    #[test]
    fn unterminated_fence_runs_to_end() {
        assert_eq!(codes("```\nx = 1\ny = 2"), vec!["x = 1\ny = 2"]);
    }

    #[test]
    fn tilde_and_longer_fences() {
        let body = "~~~~\n```\ninner\n```\n~~~~\n";
        assert_eq!(codes(body), vec!["```\ninner\n```"]);
    }

    #[test]
    fn inline_triple_backticks_are_not_fences() {
        assert!(codes("use ```x=1``` inline").is_empty());
    }

    #[test]
    fn crlf_bodies() {
        assert_eq!(codes("```\r\na=1\r\n```\r\n"), vec!["a=1"]);
    }

    #[test]
    fn closing_fence_needs_same_char_and_length() {
        assert_eq!(codes("````\na\n```\nb\n````"), vec!["a\n```\nb"]);
    }

    #[test]
    fn fence_for_outlasts_content() {
        let code = "a\n````\nb";
        let f = fence_for(code);
        let body = format!("{f}\n{code}\n{f}\n");
        assert_eq!(codes(&body), vec![code]);
    }
}
