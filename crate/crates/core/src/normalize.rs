//! Canonical string comparison for exact-match scoring.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::model::{Document, Mention, Span};

/// Whether exact match folds case. Case-insensitive is the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMode {
    #[default]
    Insensitive,
    Sensitive,
}

impl CaseMode {
    pub fn from_sensitive_flag(case_sensitive: bool) -> Self {
        if case_sensitive {
            CaseMode::Sensitive
        } else {
            CaseMode::Insensitive
        }
    }
}

/// Default (case-insensitive) normalization.
pub fn normalize(text: &str) -> String {
    normalize_with(text, CaseMode::Insensitive)
}

/// NFC, trim, collapse internal whitespace runs to a single space and
/// optionally case-fold.
pub fn normalize_with(text: &str, case: CaseMode) -> String {
    let composed: String = text.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        match case {
            CaseMode::Insensitive => out.extend(word.chars().flat_map(char::to_lowercase)),
            CaseMode::Sensitive => out.push_str(word),
        }
    }
    out
}

/// Exact match ignores spans.
pub fn exact_match(a: &Mention, b: &Mention) -> bool {
    exact_match_with(a, b, CaseMode::Insensitive)
}

pub fn exact_match_with(a: &Mention, b: &Mention, case: CaseMode) -> bool {
    normalize_with(&a.text, case) == normalize_with(&b.text, case)
}

/// Fills in a missing span with the first normalized occurrence of the
/// mention text in the document. A mention that cannot be located keeps a
/// null span. Mentions that already carry a span are returned unchanged.
pub fn resolve_span(mention: &Mention, doc: &Document) -> Mention {
    resolve_span_in(mention, &doc.text, CaseMode::Insensitive)
}

pub fn resolve_span_in(mention: &Mention, text: &str, case: CaseMode) -> Mention {
    if mention.span.is_some() {
        return mention.clone();
    }
    Mention {
        text: mention.text.clone(),
        span: find_normalized(text, &mention.text, case),
    }
}

/// Char-offset span of the first occurrence of `needle` in `haystack`, both
/// compared in normalized form. The haystack is folded character by
/// character (whitespace runs collapse, case folds) with a map back to the
/// original char offsets.
pub fn find_normalized(haystack: &str, needle: &str, case: CaseMode) -> Option<Span> {
    let needle: Vec<char> = normalize_with(needle, case).chars().collect();
    if needle.is_empty() {
        return None;
    }

    // folded[i] came from original char index origin[i]
    let mut folded: Vec<char> = Vec::new();
    let mut origin: Vec<usize> = Vec::new();
    let mut in_space = false;
    for (idx, ch) in haystack.chars().enumerate() {
        if ch.is_whitespace() {
            if !in_space {
                folded.push(' ');
                origin.push(idx);
            }
            in_space = true;
            continue;
        }
        in_space = false;
        match case {
            CaseMode::Insensitive => {
                for lower in ch.to_lowercase() {
                    folded.push(lower);
                    origin.push(idx);
                }
            }
            CaseMode::Sensitive => {
                folded.push(ch);
                origin.push(idx);
            }
        }
    }

    let n = needle.len();
    if n > folded.len() {
        return None;
    }
    (0..=folded.len() - n).find_map(|start| {
        if folded[start..start + n] != needle[..] {
            return None;
        }
        let first = origin[start];
        let last = origin[start + n - 1];
        Some(Span::new(first, last + 1))
    })
}

/// Char-indexed substring; `None` when the span falls outside the text.
pub fn substring(text: &str, span: Span) -> Option<String> {
    if span.start > span.end {
        return None;
    }
    let mut chars = text.chars();
    let prefix = chars.by_ref().take(span.start).count();
    if prefix < span.start {
        return None;
    }
    let out: String = chars.by_ref().take(span.len()).collect();
    if out.chars().count() < span.len() {
        return None;
    }
    Some(out)
}
