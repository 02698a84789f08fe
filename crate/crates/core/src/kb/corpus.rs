//! Annotated-corpus records, one JSON object per line:
//! `{"text": "...", "spans": [{"kind": "location", "start": 11, "end": 20}]}`.
//! Offsets are grapheme offsets into `text`, end exclusive.

use serde::{Deserialize, Serialize};

use super::KbError;
use crate::text::{GraphemeIndex, SlotKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub kind: SlotKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedRecord {
    pub text: String,
    pub spans: Vec<SpanAnnotation>,
}

impl AnnotatedRecord {
    /// Checks that spans are non-empty, in range and pairwise disjoint.
    pub fn validate(&self) -> Result<(), String> {
        let len = GraphemeIndex::new(&self.text).len();
        let mut sorted = self.spans.clone();
        sorted.sort_by_key(|s| (s.start, s.end));
        let mut prev_end = 0;
        for s in &sorted {
            if s.start >= s.end {
                return Err(format!("empty span {}..{}", s.start, s.end));
            }
            if s.end > len {
                return Err(format!("span {}..{} exceeds text length {len}", s.start, s.end));
            }
            if s.start < prev_end {
                return Err(format!("span {}..{} overlaps a previous span", s.start, s.end));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    /// Text covered by each span, in span order.
    pub fn span_texts(&self) -> Vec<(SlotKind, &str)> {
        let index = GraphemeIndex::new(&self.text);
        self.spans
            .iter()
            .filter_map(|s| index.slice(&self.text, s.start, s.end).map(|t| (s.kind, t)))
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Parses JSONL, skipping blank lines. Errors carry the 1-based line number.
pub fn parse_corpus(input: &str) -> Result<Vec<AnnotatedRecord>, KbError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotatedRecord = serde_json::from_str(line)
            .map_err(|e| KbError::MalformedCorpus { line: i + 1, reason: e.to_string() })?;
        record.validate().map_err(|reason| KbError::MalformedCorpus { line: i + 1, reason })?;
        records.push(record);
    }
    Ok(records)
}
