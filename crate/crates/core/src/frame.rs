//! Keyword frames: the five slots read off a labeled requirement.

use serde::{Deserialize, Serialize};

use crate::condition::{detect_polarity, parse_condition, Comparison, Polarity};
use crate::kb::KnowledgeBase;
use crate::labeler::label;
use crate::text::{tokenize, Requirement, SlotKind, TextError, Token};
use crate::time::{refine_time, TimeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Extracted,
    Clarified,
    Corrected,
    Defaulted,
}

/// Grapheme offsets into the requirement text, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotValue {
    pub text: String,
    /// Present for extracted slots only.
    pub span: Option<TextSpan>,
    pub provenance: Provenance,
}

impl SlotValue {
    pub fn new(text: impl Into<String>, provenance: Provenance) -> Self {
        Self { text: text.into(), span: None, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlot {
    #[serde(flatten)]
    pub value: SlotValue,
    pub spec: TimeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSlot {
    #[serde(flatten)]
    pub value: SlotValue,
    /// `None` when no comparison cue was found.
    pub polarity: Option<Polarity>,
    /// `None` when the value could not be read.
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordFrame {
    pub entity: Option<SlotValue>,
    pub quantifier: Option<SlotValue>,
    pub location: Option<SlotValue>,
    pub time: Option<TimeSlot>,
    pub condition: Option<ConditionSlot>,
}

/// Slots a frame must hold before it can be confirmed.
pub const REQUIRED_SLOTS: [SlotKind; 4] = [SlotKind::Entity, SlotKind::Location, SlotKind::Time, SlotKind::Condition];

/// Order in which missing slots are asked for.
pub const CLARIFICATION_ORDER: [SlotKind; 5] =
    [SlotKind::Location, SlotKind::Time, SlotKind::Condition, SlotKind::Entity, SlotKind::Quantifier];

impl KeywordFrame {
    pub fn has(&self, kind: SlotKind) -> bool {
        match kind {
            SlotKind::Entity => self.entity.is_some(),
            SlotKind::Quantifier => self.quantifier.is_some(),
            SlotKind::Location => self.location.is_some(),
            SlotKind::Time => self.time.as_ref().is_some_and(|t| t.spec.is_known()),
            SlotKind::Condition => self.condition.as_ref().is_some_and(|c| c.comparison.is_some()),
        }
    }

    /// Required slots that are absent or unreadable, in kind order.
    pub fn missing(&self) -> Vec<SlotKind> {
        REQUIRED_SLOTS.into_iter().filter(|k| !self.has(*k)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// The first missing slot in clarification order.
    pub fn next_missing(&self) -> Option<SlotKind> {
        let missing = self.missing();
        CLARIFICATION_ORDER.into_iter().find(|k| missing.contains(k))
    }

    pub fn text_of(&self, kind: SlotKind) -> Option<&str> {
        match kind {
            SlotKind::Entity => self.entity.as_ref().map(|s| s.text.as_str()),
            SlotKind::Quantifier => self.quantifier.as_ref().map(|s| s.text.as_str()),
            SlotKind::Location => self.location.as_ref().map(|s| s.text.as_str()),
            SlotKind::Time => self.time.as_ref().map(|s| s.value.text.as_str()),
            SlotKind::Condition => self.condition.as_ref().map(|s| s.value.text.as_str()),
        }
    }
}

const TIME_CUES: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "mon", "tue", "tues", "wed",
    "thu", "thur", "thurs", "fri", "sat", "sun", "mondays", "tuesdays", "wednesdays", "thursdays", "fridays",
    "saturdays", "sundays", "weekday", "weekdays", "weekend", "weekends", "during", "noon", "midnight", "morning",
    "mornings", "afternoon", "afternoons", "evening", "evenings", "night", "nights", "overnight", "daytime",
    "hour", "hours", "hourly", "minute", "minutes", "day", "days", "daily", "week", "weeks", "weekly", "month",
    "months", "monthly", "today", "tonight", "tomorrow", "until", "between",
];

fn is_time_cue(lower: &str) -> bool {
    if TIME_CUES.contains(&lower) {
        return true;
    }
    let digits = lower.trim_start_matches(|c: char| c.is_ascii_digit() || c == ':' || c == '.');
    let had_digits = digits.len() < lower.len();
    had_digits && (matches!(digits.trim(), "am" | "pm" | "a.m" | "p.m" | "h" | "hr" | "hrs") || lower.contains(':'))
}

/// Labels `req` and reads the five slots. Returns the frame and its missing
/// required slots (kind order).
pub fn extract_frame(req: &Requirement, kb: &KnowledgeBase) -> Result<(KeywordFrame, Vec<SlotKind>), TextError> {
    let text = &req.raw_text;
    let tokens = tokenize(text)?;
    let seq = label(&tokens, kb);
    let spans = seq.spans();
    let first = |kind: SlotKind| spans.iter().find(|s| s.kind == kind);
    let slot = |first_tok: usize, last_tok: usize| -> SlotValue {
        let a: &Token = &tokens[first_tok];
        let b: &Token = &tokens[last_tok - 1];
        SlotValue {
            text: text[a.bytes.start..b.bytes.end].to_string(),
            span: Some(TextSpan { start: a.start, end: b.end }),
            provenance: Provenance::Extracted,
        }
    };

    let mut frame = KeywordFrame {
        entity: first(SlotKind::Entity).map(|s| slot(s.first, s.last)),
        quantifier: first(SlotKind::Quantifier).map(|s| slot(s.first, s.last)),
        location: first(SlotKind::Location).map(|s| slot(s.first, s.last)),
        ..KeywordFrame::default()
    };

    frame.time = match first(SlotKind::Time) {
        Some(s) => {
            let value = slot(s.first, s.last);
            let spec = refine_time(&value.text);
            Some(TimeSlot { value, spec })
        }
        None => {
            let tagged = seq.tags();
            let cue = tokens
                .iter()
                .zip(tagged)
                .any(|(t, tag)| *tag == crate::labeler::Tag::O && is_time_cue(&t.lower()));
            (!cue).then(|| TimeSlot { value: SlotValue::new("always", Provenance::Defaulted), spec: TimeSpec::Always })
        }
    };

    frame.condition = first(SlotKind::Condition).map(|s| {
        let value = slot(s.first, s.last);
        let context: Vec<&str> = tokens[..s.first].iter().map(|t| t.surface.as_str()).collect();
        let polarity = detect_polarity(&context).ok();
        let comparison = polarity.and_then(|p| parse_condition(&value.text, p.op, kb).ok());
        ConditionSlot { value, polarity, comparison }
    });

    let missing = frame.missing();
    Ok((frame, missing))
}
