//! Requirement text: tokenization, normalization and the slot vocabulary.
//!
//! Offsets are counted in user-perceived characters (extended grapheme
//! clusters) so that a span computed here means the same thing to any
//! client rendering the text.
//!
//! Tokenization rules:
//!
//! * **T-1** split on whitespace;
//! * **T-2** strip punctuation (`, . ; : ! ? " ' ( ) [ ]` and typographic
//!   quotes) from both edges of each chunk, which removes sentence-final
//!   punctuation;
//! * **T-3** keep compounds intact: interior punctuation never splits a chunk
//!   (`mg/m3`, `0.25`, `2pm`), and a number followed by a separate `am`/`pm`
//!   chunk is merged into one token (`7 am`).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("empty input")]
    EmptyInput,
}

/// Where a requirement came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Interactive,
    Batch,
}

/// One English requirement sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub raw_text: String,
    pub source: Source,
}

impl Requirement {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, source: Source) -> Result<Self, TextError> {
        let raw_text = raw_text.into();
        if raw_text.trim().is_empty() {
            return Err(TextError::EmptyInput);
        }
        Ok(Self { id: id.into(), raw_text, source })
    }

    pub fn interactive(raw_text: impl Into<String>) -> Result<Self, TextError> {
        Self::new(uuid::Uuid::new_v4().to_string(), raw_text, Source::Interactive)
    }
}

/// The five keyword kinds. Declaration order is the tie-break order used by
/// the labeler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Entity,
    #[serde(alias = "description")]
    Quantifier,
    Location,
    Time,
    Condition,
}

impl SlotKind {
    pub const ALL: [SlotKind; 5] = [
        SlotKind::Entity,
        SlotKind::Quantifier,
        SlotKind::Location,
        SlotKind::Time,
        SlotKind::Condition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SlotKind::Entity => "entity",
            SlotKind::Quantifier => "quantifier",
            SlotKind::Location => "location",
            SlotKind::Time => "time",
            SlotKind::Condition => "condition",
        }
    }

    /// Placeholder tag used when printing patterns, e.g. `LOCATION`.
    pub fn tag(self) -> &'static str {
        match self {
            SlotKind::Entity => "ENTITY",
            SlotKind::Quantifier => "QUANTIFIER",
            SlotKind::Location => "LOCATION",
            SlotKind::Time => "TIME",
            SlotKind::Condition => "CONDITION",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown slot kind `{0}`")]
pub struct UnknownSlotKind(pub String);

impl FromStr for SlotKind {
    type Err = UnknownSlotKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "entity" => Ok(SlotKind::Entity),
            "quantifier" | "description" => Ok(SlotKind::Quantifier),
            "location" => Ok(SlotKind::Location),
            "time" => Ok(SlotKind::Time),
            "condition" => Ok(SlotKind::Condition),
            _ => Err(UnknownSlotKind(s.to_string())),
        }
    }
}

/// A token with grapheme offsets into the text it was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    #[serde(skip)]
    pub(crate) bytes: Range<usize>,
    /// A clause separator (`,`, `;` or `:`) occurs between the previous
    /// token (or the start of the text) and this one.
    #[serde(skip)]
    pub(crate) clause_break: bool,
}

impl Token {
    pub fn lower(&self) -> String {
        self.surface.to_lowercase()
    }
}

/// Maps grapheme offsets to byte offsets for one string.
#[derive(Debug, Clone)]
pub struct GraphemeIndex {
    /// Byte offset of every grapheme boundary, including the final one.
    bounds: Vec<usize>,
}

impl GraphemeIndex {
    pub fn new(text: &str) -> Self {
        let mut bounds: Vec<usize> = text.grapheme_indices(true).map(|(b, _)| b).collect();
        bounds.push(text.len());
        Self { bounds }
    }

    /// Number of graphemes.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_range(&self, start: usize, end: usize) -> Option<Range<usize>> {
        if start > end || end > self.len() {
            return None;
        }
        Some(self.bounds[start]..self.bounds[end])
    }

    pub fn slice<'a>(&self, text: &'a str, start: usize, end: usize) -> Option<&'a str> {
        self.byte_range(start, end).map(|r| &text[r])
    }
}

/// Number of user-perceived characters in `text`.
pub fn grapheme_len(text: &str) -> usize {
    text.graphemes(true).count()
}

fn is_edge_punct(g: &str) -> bool {
    matches!(
        g,
        "," | "." | ";" | ":" | "!" | "?" | "\"" | "'" | "(" | ")" | "[" | "]" | "{" | "}" | "“" | "”" | "‘" | "’"
    )
}

fn is_space(g: &str) -> bool {
    g.chars().all(char::is_whitespace)
}

pub(crate) const CLAUSE_PUNCT: [char; 3] = [',', ';', ':'];

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+(?:[.:]\d+)?$").unwrap());

fn is_meridiem(lower: &str) -> bool {
    matches!(lower, "am" | "pm" | "a.m" | "p.m")
}

/// Splits `text` into tokens following rules T-1..T-3.
pub fn tokenize(text: &str) -> Result<Vec<Token>, TextError> {
    if text.trim().is_empty() {
        return Err(TextError::EmptyInput);
    }
    let graphemes: Vec<(usize, &str)> = text.grapheme_indices(true).collect();
    let byte_at = |g: usize| graphemes.get(g).map_or(text.len(), |(b, _)| *b);

    // T-1: whitespace chunks as grapheme ranges.
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < graphemes.len() {
        if is_space(graphemes[i].1) {
            i += 1;
            continue;
        }
        let start = i;
        while i < graphemes.len() && !is_space(graphemes[i].1) {
            i += 1;
        }
        chunks.push((start, i));
    }

    // T-2: strip edge punctuation.
    let mut tokens: Vec<Token> = Vec::with_capacity(chunks.len());
    for (mut s, mut e) in chunks {
        while s < e && is_edge_punct(graphemes[s].1) {
            s += 1;
        }
        while e > s && is_edge_punct(graphemes[e - 1].1) {
            e -= 1;
        }
        if s == e {
            continue;
        }
        let bytes = byte_at(s)..byte_at(e);
        let gap_start = tokens.last().map_or(0, |t: &Token| t.bytes.end);
        let clause_break = text[gap_start..bytes.start].contains(CLAUSE_PUNCT);
        tokens.push(Token { surface: text[bytes.clone()].to_string(), start: s, end: e, bytes, clause_break });
    }

    // T-3: merge "<number> am|pm".
    let mut merged: Vec<Token> = Vec::with_capacity(tokens.len());
    for tok in tokens {
        if let Some(prev) = merged.last_mut() {
            if NUMBER.is_match(&prev.surface) && is_meridiem(&tok.lower()) {
                prev.end = tok.end;
                prev.bytes = prev.bytes.start..tok.bytes.end;
                prev.surface = text[prev.bytes.clone()].to_string();
                continue;
            }
        }
        merged.push(tok);
    }
    Ok(merged)
}

/// Lowercases, collapses whitespace and drops trailing periods.
pub fn normalize(text: &str) -> String {
    let mut out = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let trimmed = out.trim_end_matches('.').trim_end();
        if trimmed.len() == out.len() {
            return out;
        }
        out = trimmed.to_string();
    }
}

/// Lookup key for a phrase: its lowercased token surfaces joined by single
/// spaces. Vocabulary phrases and candidate spans are compared by this key.
pub fn phrase_key(text: &str) -> String {
    match tokenize(text) {
        Ok(tokens) => tokens.iter().map(Token::lower).collect::<Vec<_>>().join(" "),
        Err(_) => String::new(),
    }
}
