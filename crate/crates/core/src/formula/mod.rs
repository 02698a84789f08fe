//! The output specification dialect.
//!
//! Grammar (whitespace is significant, `SP` is one space):
//!
//! ```text
//! formula  := "G" [interval] SP "(" body ")"
//! interval := "[" nat "," nat "]"
//! body     := guard | npred
//! guard    := "in_window(" days "," nat "," nat ")" SP "->" SP "(" npred ")"
//! npred    := pred | "!(" pred ")"
//! pred     := ident ["{" ident "}"] "@" ident SP cmp SP value
//! cmp      := "<=" | ">=" | "<" | ">" | "=="
//! value    := decimal [SP unit] | "level(" ident "," nat ")"
//! days     := run { "+" run }
//! run      := day ["-" day]
//! day      := "Mon" | "Tue" | "Wed" | "Thu" | "Fri" | "Sat" | "Sun"
//! ```
//!
//! Identifiers are runs of alphanumerics and `_ - . / ' % + & # : °`.
//! Units run to the closing parenthesis and may contain spaces.

mod friendly;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use friendly::render_friendly;
pub use parse::{parse_formula, SyntaxError};

use crate::condition::{CmpOp, ConditionValue};
use crate::frame::KeywordFrame;
use crate::text::{normalize, SlotKind};
use crate::time::{Recurrence, TimeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundValue {
    Number { magnitude: f64, unit: String },
    Level { scale: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub op: CmpOp,
    pub value: BoundValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub entity: String,
    pub quantifier: Option<String>,
    pub location: String,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecFormula {
    Globally { interval: Option<Interval>, body: Box<SpecFormula> },
    Guard { recurrence: Recurrence, body: Box<SpecFormula> },
    Predicate(Predicate),
    Not(Box<SpecFormula>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("frame is missing {}", list(.0))]
    IncompleteFrame(Vec<SlotKind>),
    #[error("time `{0}` has no formal reading")]
    UnknownTime(String),
}

fn list(kinds: &[SlotKind]) -> String {
    kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || "_-./'%+&#:°".contains(c)
}

/// Slot text as an identifier: normalized, spaces to underscores, any
/// other character outside the identifier set to an underscore.
pub fn identifier(text: &str) -> String {
    let id: String = normalize(text).chars().map(|c| if is_ident_char(c) { c } else { '_' }).collect();
    if id.is_empty() {
        "_".into()
    } else {
        id
    }
}

/// Compiles a complete frame (rules M-1..M-6).
pub fn build_formula(frame: &KeywordFrame) -> Result<SpecFormula, FormulaError> {
    let missing = frame.missing();
    if let Some(time) = &frame.time {
        if let TimeSpec::Unknown { raw } = &time.spec {
            if missing.iter().all(|k| *k == SlotKind::Time) {
                return Err(FormulaError::UnknownTime(raw.clone()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(FormulaError::IncompleteFrame(missing));
    }
    let (Some(entity), Some(location), Some(time), Some(condition)) =
        (&frame.entity, &frame.location, &frame.time, &frame.condition)
    else {
        unreachable!("complete frames hold every required slot")
    };
    let comparison = condition.comparison.as_ref().expect("complete frames hold a comparison");
    let value = match &comparison.value {
        ConditionValue::Number { magnitude, unit } => BoundValue::Number { magnitude: *magnitude, unit: unit.clone() },
        ConditionValue::Ordinal { scale, index, .. } => BoundValue::Level { scale: identifier(scale), index: *index },
    };
    let mut body = SpecFormula::Predicate(Predicate {
        entity: identifier(&entity.text),
        quantifier: frame.quantifier.as_ref().map(|q| identifier(&q.text)),
        location: identifier(&location.text),
        bound: Bound { op: comparison.op, value },
    });
    if condition.polarity.is_some_and(|p| p.negated) {
        body = SpecFormula::Not(Box::new(body));
    }
    Ok(match &time.spec {
        TimeSpec::Always => SpecFormula::Globally { interval: None, body: Box::new(body) },
        TimeSpec::Window { duration } | TimeSpec::Horizon { duration } => {
            SpecFormula::Globally { interval: Some(Interval { lo: 0, hi: *duration }), body: Box::new(body) }
        }
        TimeSpec::Recurrence(r) => SpecFormula::Globally {
            interval: None,
            body: Box::new(SpecFormula::Guard { recurrence: *r, body: Box::new(body) }),
        },
        TimeSpec::Unknown { raw } => return Err(FormulaError::UnknownTime(raw.clone())),
    })
}

/// Canonical text of a formula.
pub fn render_formal(f: &SpecFormula) -> String {
    f.to_string()
}

impl fmt::Display for SpecFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecFormula::Globally { interval, body } => {
                f.write_str("G")?;
                if let Some(i) = interval {
                    write!(f, "[{},{}]", i.lo, i.hi)?;
                }
                write!(f, " ({body})")
            }
            SpecFormula::Guard { recurrence: r, body } => {
                write!(f, "in_window({},{},{}) -> ({body})", r.days, r.start, r.end)
            }
            SpecFormula::Not(body) => write!(f, "!({body})"),
            SpecFormula::Predicate(p) => {
                f.write_str(&p.entity)?;
                if let Some(q) = &p.quantifier {
                    write!(f, "{{{q}}}")?;
                }
                write!(f, "@{} {} ", p.location, p.bound.op)?;
                match &p.bound.value {
                    BoundValue::Number { magnitude, unit } if unit.is_empty() => write!(f, "{magnitude}"),
                    BoundValue::Number { magnitude, unit } => write!(f, "{magnitude} {unit}"),
                    BoundValue::Level { scale, index } => write!(f, "level({scale},{index})"),
                }
            }
        }
    }
}
