//! Comparison cues, negation handling and condition parsing.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::kb::KnowledgeBase;
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
}

impl CmpOp {
    pub const ALL: [CmpOp; 5] = [CmpOp::Le, CmpOp::Ge, CmpOp::Lt, CmpOp::Gt, CmpOp::Eq];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Eq => "==",
        }
    }

    /// Logical complement, except `Eq` which has no complement in this
    /// dialect and is returned unchanged.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Eq => CmpOp::Eq,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionValue {
    Number {
        magnitude: f64,
        /// Carried verbatim, may be empty.
        unit: String,
    },
    Ordinal {
        level: String,
        scale: String,
        /// Position of `level` in the scale, resolved at parse time.
        index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub op: CmpOp,
    pub value: ConditionValue,
}

/// Operator detected from the words around a condition. `negated` is only
/// ever set for `Eq`, since the other operators absorb negation by flipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polarity {
    pub op: CmpOp,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
}

impl Polarity {
    pub fn new(op: CmpOp) -> Self {
        Self { op, negated: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConditionError {
    #[error("no comparison cue found before the condition")]
    AmbiguousPolarity,
    #[error("cannot read `{0}` as a number or a known level")]
    UnparseableCondition(String),
}

/// Cue phrases, matched longest first against the words right before the
/// condition value.
const CUES: &[(&[&str], CmpOp)] = &[
    (&["no", "more", "than"], CmpOp::Le),
    (&["not", "more", "than"], CmpOp::Le),
    (&["no", "greater", "than"], CmpOp::Le),
    (&["no", "higher", "than"], CmpOp::Le),
    (&["less", "than", "or", "equal", "to"], CmpOp::Le),
    (&["no", "less", "than"], CmpOp::Ge),
    (&["not", "less", "than"], CmpOp::Ge),
    (&["no", "lower", "than"], CmpOp::Ge),
    (&["greater", "than", "or", "equal", "to"], CmpOp::Ge),
    (&["at", "most"], CmpOp::Le),
    (&["up", "to"], CmpOp::Le),
    (&["a", "maximum", "of"], CmpOp::Le),
    (&["maximum", "of"], CmpOp::Le),
    (&["at", "least"], CmpOp::Ge),
    (&["a", "minimum", "of"], CmpOp::Ge),
    (&["minimum", "of"], CmpOp::Ge),
    (&["less", "than"], CmpOp::Lt),
    (&["fewer", "than"], CmpOp::Lt),
    (&["lower", "than"], CmpOp::Lt),
    (&["worse", "than"], CmpOp::Lt),
    (&["below"], CmpOp::Lt),
    (&["under"], CmpOp::Lt),
    (&["more", "than"], CmpOp::Gt),
    (&["greater", "than"], CmpOp::Gt),
    (&["higher", "than"], CmpOp::Gt),
    (&["better", "than"], CmpOp::Gt),
    (&["above"], CmpOp::Gt),
    (&["over"], CmpOp::Gt),
    (&["exceed"], CmpOp::Gt),
    (&["exceeds"], CmpOp::Gt),
    (&["equal", "to"], CmpOp::Eq),
    (&["equals"], CmpOp::Eq),
    (&["exactly"], CmpOp::Eq),
    (&["be"], CmpOp::Eq),
    (&["is"], CmpOp::Eq),
    (&["are"], CmpOp::Eq),
    (&["of"], CmpOp::Eq),
    (&["="], CmpOp::Eq),
];

/// Words that may sit between a negation and the cue it negates.
const AUXILIARIES: &[&str] = &[
    "be", "been", "is", "are", "was", "were", "should", "must", "shall", "will", "would", "ever", "have", "has",
    "to", "always", "allowed",
];

fn is_negator(word: &str) -> bool {
    matches!(word, "not" | "never" | "cannot") || word.ends_with("n't")
}

fn longest_cue_suffix(words: &[String]) -> Option<(usize, CmpOp)> {
    CUES.iter()
        .filter(|(cue, _)| {
            cue.len() <= words.len() && words[words.len() - cue.len()..].iter().zip(cue.iter()).all(|(w, c)| w == c)
        })
        .max_by_key(|(cue, _)| cue.len())
        .map(|(cue, op)| (cue.len(), *op))
}

/// Reads the comparison operator from the words immediately preceding a
/// condition value (in sentence order, any case).
pub fn detect_polarity<S: AsRef<str>>(context: &[S]) -> Result<Polarity, ConditionError> {
    let words: Vec<String> = context.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let (cue_len, op) = longest_cue_suffix(&words).ok_or(ConditionError::AmbiguousPolarity)?;
    let before = &words[..words.len() - cue_len];
    let negated = before
        .iter()
        .rev()
        .take_while(|w| AUXILIARIES.contains(&w.as_str()) || is_negator(w))
        .any(|w| is_negator(w));
    Ok(match (negated, op) {
        (false, op) => Polarity::new(op),
        (true, CmpOp::Eq) => Polarity { op: CmpOp::Eq, negated: true },
        (true, op) => Polarity::new(op.negate()),
    })
}

/// Splits a leading cue off a user-typed condition such as
/// `"no more than 5 ppm"`. Returns the polarity and the remaining value text.
pub fn split_leading_cue(text: &str) -> Option<(Polarity, &str)> {
    let mut offsets = Vec::new();
    let mut words = Vec::new();
    for (i, w) in text.split_whitespace().enumerate() {
        if i >= 7 {
            break;
        }
        let start = w.as_ptr() as usize - text.as_ptr() as usize;
        offsets.push(start + w.len());
        words.push(w.to_lowercase());
    }
    // Longest prefix that ends in a cue, keeping at least one value word.
    for n in (1..words.len()).rev() {
        if let Ok(p) = detect_polarity(&words[..n]) {
            let (cue_len, _) = longest_cue_suffix(&words[..n]).unwrap();
            // The whole prefix must be cue plus negation/auxiliaries.
            let lead = &words[..n - cue_len];
            if lead.iter().all(|w| AUXILIARIES.contains(&w.as_str()) || is_negator(w)) {
                return Some((p, text[offsets[n - 1]..].trim()));
            }
        }
    }
    None
}

static NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([+-]?(?:\d+(?:\.\d+)?|\.\d+))\s*([^\s()].*)?$").unwrap());

/// Parses a condition value into a [`Comparison`]: a number with an optional
/// unit, or a level of one of the knowledge base's ordinal scales.
pub fn parse_condition(raw: &str, op: CmpOp, kb: &KnowledgeBase) -> Result<Comparison, ConditionError> {
    let unparseable = || ConditionError::UnparseableCondition(raw.to_string());
    let trimmed = raw.trim().trim_end_matches('.').trim();
    let cleaned = trimmed.replace(',', "");
    if let Some(caps) = NUMERIC.captures(&cleaned) {
        let magnitude: f64 = caps[1].parse().map_err(|_| unparseable())?;
        if !magnitude.is_finite() {
            return Err(unparseable());
        }
        let unit = caps.get(2).map_or(String::new(), |m| m.as_str().split_whitespace().collect::<Vec<_>>().join(" "));
        if unit.contains(['(', ')']) {
            return Err(unparseable());
        }
        return Ok(Comparison { op, value: ConditionValue::Number { magnitude, unit } });
    }
    let level = normalize(trimmed);
    kb.find_level(&level)
        .map(|(scale, index)| Comparison {
            op,
            value: ConditionValue::Ordinal { level: level.clone(), scale: scale.to_string(), index },
        })
        .ok_or_else(unparseable)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn cue_phrases() {
        assert_eq!(detect_polarity(&words("should be no more than")).unwrap(), Polarity::new(CmpOp::Le));
        assert_eq!(detect_polarity(&words("no less than")).unwrap(), Polarity::new(CmpOp::Ge));
        assert_eq!(detect_polarity(&words("should not be less than")).unwrap(), Polarity::new(CmpOp::Ge));
        assert_eq!(detect_polarity(&words("should always be better than")).unwrap(), Polarity::new(CmpOp::Gt));
        assert_eq!(detect_polarity(&words("must not exceed")).unwrap(), Polarity::new(CmpOp::Le));
        assert_eq!(detect_polarity(&words("Power Factor of")).unwrap(), Polarity::new(CmpOp::Eq));
    }

    #[test]
    fn negated_equality_keeps_flag() {
        assert_eq!(
            detect_polarity(&words("should not be")).unwrap(),
            Polarity { op: CmpOp::Eq, negated: true }
        );
    }

    #[test]
    fn no_cue_is_ambiguous() {
        assert_eq!(detect_polarity(&words("the school")), Err(ConditionError::AmbiguousPolarity));
        assert_eq!(detect_polarity::<&str>(&[]), Err(ConditionError::AmbiguousPolarity));
    }

    #[test]
    fn leading_cue_split() {
        let (p, rest) = split_leading_cue("no more than 5 ppm").unwrap();
        assert_eq!((p.op, rest), (CmpOp::Le, "5 ppm"));
        let (p, rest) = split_leading_cue("at least  0.9").unwrap();
        assert_eq!((p.op, rest), (CmpOp::Ge, "0.9"));
        assert!(split_leading_cue("5 ppm").is_none());
        assert!(split_leading_cue("below").is_none());
    }

    #[test]
    fn numbers_and_units() {
        let kb = KnowledgeBase::seed();
        let c = parse_condition("7 mg/m3", CmpOp::Le, &kb).unwrap();
        assert_eq!(c.value, ConditionValue::Number { magnitude: 7.0, unit: "mg/m3".into() });
        let c = parse_condition("0.70", CmpOp::Ge, &kb).unwrap();
        assert_eq!(c.value, ConditionValue::Number { magnitude: 0.7, unit: String::new() });
        let c = parse_condition("2,500 cfu/m3", CmpOp::Le, &kb).unwrap();
        assert_eq!(c.value, ConditionValue::Number { magnitude: 2500.0, unit: "cfu/m3".into() });
    }

    #[test]
    fn ordinal_levels() {
        let kb = KnowledgeBase::seed();
        let c = parse_condition("moderate", CmpOp::Gt, &kb).unwrap();
        assert_eq!(
            c.value,
            ConditionValue::Ordinal { level: "moderate".into(), scale: "air-quality".into(), index: 4 }
        );
    }

    #[test]
    fn vague_condition_is_unparseable() {
        let kb = KnowledgeBase::seed();
        assert_eq!(
            parse_condition("close to the school", CmpOp::Le, &kb),
            Err(ConditionError::UnparseableCondition("close to the school".into()))
        );
    }
}
