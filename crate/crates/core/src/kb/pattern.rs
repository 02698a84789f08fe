//! Syntactic patterns: a requirement with each labeled span replaced by a
//! kind-tagged placeholder.
//!
//! Every placeholder carries its own elision rule: the run of function words
//! immediately before it (for example `in all the ` before a location) that
//! the synthesizer removes together with the placeholder when it drops the
//! slot.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotatedRecord, KbError};
use crate::text::{tokenize, GraphemeIndex, SlotKind, CLAUSE_PUNCT};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternElement {
    Text {
        text: String,
    },
    Slot {
        slot: SlotKind,
        /// Suffix of the preceding text removed when the slot is dropped.
        #[serde(default, skip_serializing_if = "String::is_empty")]
        elide: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    #[serde(rename = "template")]
    pub elements: Vec<PatternElement>,
    pub frequency: u64,
}

impl Pattern {
    pub fn slots(&self) -> impl Iterator<Item = SlotKind> + '_ {
        self.elements.iter().filter_map(|e| match e {
            PatternElement::Slot { slot, .. } => Some(*slot),
            PatternElement::Text { .. } => None,
        })
    }

    pub fn has_slot(&self, kind: SlotKind) -> bool {
        self.slots().any(|k| k == kind)
    }

    /// Word/clause-break/slot items used to align the pattern with a
    /// tokenized sentence.
    pub(crate) fn items(&self) -> Vec<PatternItem> {
        let mut items = Vec::new();
        let mut pending_break = false;
        let push = |items: &mut Vec<PatternItem>, item: PatternItem, pending: &mut bool| {
            if *pending && !items.is_empty() && items.last() != Some(&PatternItem::Break) {
                items.push(PatternItem::Break);
            }
            *pending = false;
            items.push(item);
        };
        for element in &self.elements {
            match element {
                PatternElement::Slot { slot, .. } => push(&mut items, PatternItem::Slot(*slot), &mut pending_break),
                PatternElement::Text { text } => {
                    let tokens = tokenize(text).unwrap_or_default();
                    for tok in &tokens {
                        if tok.clause_break {
                            pending_break = true;
                        }
                        push(&mut items, PatternItem::Word(tok.lower()), &mut pending_break);
                    }
                    let tail = tokens.last().map_or(text.as_str(), |t| &text[t.bytes.end..]);
                    if tail.contains(CLAUSE_PUNCT) {
                        pending_break = true;
                    }
                }
            }
        }
        items
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PatternItem {
    Word(String),
    Break,
    Slot(SlotKind),
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.elements {
            match e {
                PatternElement::Text { text } => f.write_str(text)?,
                PatternElement::Slot { slot, .. } => write!(f, "[{}]", slot.tag())?,
            }
        }
        Ok(())
    }
}

const ELIDABLE: &[&str] = &[
    "in", "at", "on", "of", "for", "during", "within", "from", "to", "the", "a", "an", "all", "any", "every", "each",
    "over", "across", "throughout", "by", "near", "with", "and", "no", "not", "more", "less", "than", "most",
    "least", "better", "worse", "above", "below", "under", "equal", "exactly", "greater", "fewer", "lower", "higher",
    "up",
];

/// The trailing run of function words in `text`, starting at the first
/// elided word and running to the end of `text`.
pub(crate) fn elidable_suffix(text: &str) -> &str {
    let mut cut = text.len();
    let mut rest = text.trim_end();
    loop {
        let word_start = rest.rfind(char::is_whitespace).map_or(0, |i| i + 1);
        let word = &rest[word_start..];
        if word.is_empty() || !ELIDABLE.contains(&word.to_lowercase().as_str()) {
            break;
        }
        cut = word_start;
        rest = rest[..word_start].trim_end();
    }
    &text[cut..]
}

/// Replaces each labeled span with a placeholder, keeping all other text
/// verbatim.
pub fn abstract_pattern(record: &AnnotatedRecord) -> Result<Pattern, KbError> {
    if record.spans.is_empty() {
        return Err(KbError::NoPlaceholders);
    }
    let index = GraphemeIndex::new(&record.text);
    let mut spans = record.spans.clone();
    spans.sort_by_key(|s| s.start);
    let mut elements = Vec::new();
    let mut cursor = 0;
    for span in spans {
        let bytes = index
            .byte_range(span.start, span.end)
            .ok_or_else(|| KbError::MalformedCorpus { line: 0, reason: "span out of range".into() })?;
        if bytes.start < cursor {
            return Err(KbError::MalformedCorpus { line: 0, reason: "overlapping spans".into() });
        }
        let before = &record.text[cursor..bytes.start];
        if !before.is_empty() {
            elements.push(PatternElement::Text { text: before.to_string() });
        }
        elements.push(PatternElement::Slot { slot: span.kind, elide: elidable_suffix(before).to_string() });
        cursor = bytes.end;
    }
    if cursor < record.text.len() {
        elements.push(PatternElement::Text { text: record.text[cursor..].to_string() });
    }
    Ok(Pattern { elements, frequency: 1 })
}
