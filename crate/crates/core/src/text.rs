//! Shared helpers for the line-oriented input formats.

use crate::expr::{parse_with, Expr, ParseError, VarNames};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: ParseError },
}

impl FormatError {
    pub fn syntax(line: usize, msg: impl Into<String>) -> Self {
        FormatError::Syntax {
            line,
            msg: msg.into(),
        }
    }

    pub fn line(&self) -> usize {
        match self {
            FormatError::Syntax { line, .. } | FormatError::Expr { line, .. } => *line,
        }
    }
}

/// Non-blank lines with `#` comments removed, paired with 1-based line numbers.
pub fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

/// Split `head rest` at the first whitespace.
pub fn keyword(line: &str) -> (&str, &str) {
    match line.split_once(char::is_whitespace) {
        Some((k, rest)) => (k, rest.trim()),
        None => (line, ""),
    }
}

/// Split `lhs = rhs` at the first `=`.
pub fn assignment(line: &str, lineno: usize) -> Result<(&str, &str), FormatError> {
    line.split_once('=')
        .map(|(l, r)| (l.trim(), r.trim()))
        .ok_or_else(|| FormatError::syntax(lineno, "expected '='"))
}

pub fn expr_at(src: &str, names: &VarNames, line: usize) -> Result<Expr, FormatError> {
    parse_with(src, names).map_err(|source| FormatError::Expr { line, source })
}

/// Split on commas that are not nested inside parentheses or brackets.
pub fn split_top_level(src: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in src.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(src[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = src[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_comments_and_blanks() {
        let src = "a b # note\n\n  # only comment\nc = d\n";
        let lines: Vec<_> = content_lines(src).collect();
        assert_eq!(lines, vec![(1, "a b"), (4, "c = d")]);
    }

    #[test]
    fn top_level_commas() {
        assert_eq!(
            split_top_level("x[n], (x[n]^2 - 1)*ln((x[n] + 1)/(x[n] - 1)), 1"),
            vec!["x[n]", "(x[n]^2 - 1)*ln((x[n] + 1)/(x[n] - 1))", "1"]
        );
    }
}
