//! Marks which bytes of a source file are code, as opposed to comments,
//! string or character literals and (for C-like files) preprocessor lines.
//!
//! This is a lexical state machine. Raw string literals, digit separators
//! and macro tricks are not understood.

use crate::catalog::LanguageClass;

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    LineComment,
    BlockComment,
    Quoted(u8),
    /// Python triple-quoted string with the given quote byte.
    Triple(u8),
    Preprocessor,
}

/// `mask[i]` is true when byte `i` is code.
pub fn code_mask(text: &[u8], lang: LanguageClass) -> Vec<bool> {
    match lang {
        LanguageClass::CLike => c_mask(text),
        LanguageClass::Python => python_mask(text),
    }
}

fn at_line_start(text: &[u8], i: usize) -> bool {
    text[..i]
        .iter()
        .rev()
        .take_while(|&&b| b != b'\n')
        .all(|&b| b == b' ' || b == b'\t')
}

fn c_mask(text: &[u8]) -> Vec<bool> {
    let mut mask = vec![false; text.len()];
    let mut state = State::Code;
    let mut i = 0;
    while i < text.len() {
        let b = text[i];
        let next = text.get(i + 1).copied();
        match state {
            State::Code => match b {
                b'/' if next == Some(b'/') => {
                    state = State::LineComment;
                    i += 2;
                    continue;
                }
                b'/' if next == Some(b'*') => {
                    state = State::BlockComment;
                    i += 2;
                    continue;
                }
                b'"' | b'\'' => state = State::Quoted(b),
                b'#' if at_line_start(text, i) => state = State::Preprocessor,
                _ => mask[i] = true,
            },
            State::LineComment => {
                if b == b'\\' && next == Some(b'\n') {
                    i += 2;
                    continue;
                }
                if b == b'\n' {
                    state = State::Code;
                    mask[i] = true;
                }
            }
            State::BlockComment => {
                if b == b'*' && next == Some(b'/') {
                    state = State::Code;
                    i += 2;
                    continue;
                }
            }
            State::Quoted(q) => {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                // an unterminated literal ends at the line break
                if b == q || b == b'\n' {
                    state = State::Code;
                }
            }
            State::Preprocessor => {
                if b == b'\\' && next == Some(b'\n') {
                    i += 2;
                    continue;
                }
                if b == b'/' && next == Some(b'*') {
                    // a block comment may carry the directive over lines
                    let end = find(text, i + 2, b"*/").map_or(text.len(), |e| e + 2);
                    i = end;
                    continue;
                }
                if b == b'\n' {
                    state = State::Code;
                    mask[i] = true;
                }
            }
            State::Triple(_) => unreachable!("python only"),
        }
        i += 1;
    }
    mask
}

fn find(text: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    text.get(from..)?
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

fn python_mask(text: &[u8]) -> Vec<bool> {
    let mut mask = vec![false; text.len()];
    let mut state = State::Code;
    let mut i = 0;
    while i < text.len() {
        let b = text[i];
        match state {
            State::Code => match b {
                b'#' => state = State::LineComment,
                b'"' | b'\'' => {
                    if text.get(i + 1) == Some(&b) && text.get(i + 2) == Some(&b) {
                        state = State::Triple(b);
                        i += 3;
                        continue;
                    }
                    state = State::Quoted(b);
                }
                _ => mask[i] = true,
            },
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                    mask[i] = true;
                }
            }
            State::Quoted(q) => {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                if b == q || b == b'\n' {
                    state = State::Code;
                }
            }
            State::Triple(q) => {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                if b == q && text.get(i + 1) == Some(&q) && text.get(i + 2) == Some(&q) {
                    state = State::Code;
                    i += 3;
                    continue;
                }
            }
            State::BlockComment | State::Preprocessor => unreachable!("c only"),
        }
        i += 1;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(text: &str, lang: LanguageClass) -> String {
        let mask = code_mask(text.as_bytes(), lang);
        text.bytes()
            .zip(mask)
            .map(|(b, m)| if m { b as char } else { '~' })
            .collect()
    }

    #[test]
    fn c_literals_and_comments() {
        assert_eq!(
            code("f(\"(\") // )\nx", LanguageClass::CLike),
            "f(~~~) ~~~~\nx"
        );
        assert_eq!(code("a /* ( */ b", LanguageClass::CLike), "a ~~~~~~~ b");
        assert_eq!(code("c = '(';", LanguageClass::CLike), "c = ~~~;");
        assert_eq!(code("s = \"\\\"(\";", LanguageClass::CLike), "s = ~~~~~;");
    }

    #[test]
    fn c_preprocessor_lines() {
        let text = "#define F(x) \\\n  g(x)\nF(1);\n  # if A\n";
        assert_eq!(
            code(text, LanguageClass::CLike),
            "~~~~~~~~~~~~~~~~~~~~~\nF(1);\n  ~~~~~~\n"
        );
        assert_eq!(code("a # b", LanguageClass::CLike), "a # b");
    }

    #[test]
    fn python_strings_and_comments() {
        assert_eq!(
            code("x = '(' # )\ny", LanguageClass::Python),
            "x = ~~~ ~~~\ny"
        );
        assert_eq!(
            code("s = \"\"\"a\n(\"\"\"\nz", LanguageClass::Python),
            "s = ~~~~~~~~~\nz"
        );
    }
}
