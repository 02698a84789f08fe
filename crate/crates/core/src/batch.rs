//! Non-interactive conversion, one requirement per line.

use serde::{Deserialize, Serialize};

use crate::formula::{build_formula, render_formal, render_friendly};
use crate::frame::{extract_frame, KeywordFrame};
use crate::kb::KnowledgeBase;
use crate::text::{Requirement, SlotKind, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchOutcome {
    Ok { line: usize, requirement: String, frame: KeywordFrame, formal: String, friendly: String },
    NeedsClarification { line: usize, requirement: String, frame: KeywordFrame, missing: Vec<SlotKind> },
    Error { line: usize, requirement: String, message: String },
}

impl BatchOutcome {
    pub fn line(&self) -> usize {
        match self {
            BatchOutcome::Ok { line, .. }
            | BatchOutcome::NeedsClarification { line, .. }
            | BatchOutcome::Error { line, .. } => *line,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, BatchOutcome::Ok { .. })
    }
}

/// Converts one requirement. `line` is 1-based.
pub fn convert_line(line: usize, text: &str, kb: &KnowledgeBase) -> BatchOutcome {
    let requirement = text.trim().to_string();
    let req = match Requirement::new(format!("line-{line}"), requirement.clone(), Source::Batch) {
        Ok(r) => r,
        Err(e) => return BatchOutcome::Error { line, requirement, message: e.to_string() },
    };
    let (frame, missing) = match extract_frame(&req, kb) {
        Ok(x) => x,
        Err(e) => return BatchOutcome::Error { line, requirement, message: e.to_string() },
    };
    if !missing.is_empty() {
        return BatchOutcome::NeedsClarification { line, requirement, frame, missing };
    }
    match (build_formula(&frame), render_friendly(&frame)) {
        (Ok(f), Ok(friendly)) => BatchOutcome::Ok { line, requirement, frame, formal: render_formal(&f), friendly },
        (Err(e), _) | (_, Err(e)) => BatchOutcome::Error { line, requirement, message: e.to_string() },
    }
}

/// One outcome per non-blank line, in input order.
pub fn convert_batch(input: &str, kb: &KnowledgeBase) -> Vec<BatchOutcome> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| convert_line(i + 1, l, kb))
        .collect()
}
