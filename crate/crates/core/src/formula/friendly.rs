//! Plain-English restatement of a complete frame (template F-1):
//!
//! `Entity '<entity>'[ of '<quantifier>'] at '<location>' must [not ]be
//! <comparison> <time>.`
//!
//! Entity, quantifier, location and condition texts appear verbatim. The
//! time is restated from its parsed form so that the sentence reads the
//! same whatever phrasing the requirement used.

use super::FormulaError;
use crate::condition::{CmpOp, ConditionValue};
use crate::frame::KeywordFrame;
use crate::time::{DaySet, TimeSpec};

fn number_words(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Le => "at most",
        CmpOp::Ge => "at least",
        CmpOp::Lt => "less than",
        CmpOp::Gt => "more than",
        CmpOp::Eq => "exactly",
    }
}

fn level_words(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Le => "at or below",
        CmpOp::Ge => "at or above",
        CmpOp::Lt => "below",
        CmpOp::Gt => "above",
        CmpOp::Eq => "at",
    }
}

fn duration_adjective(seconds: u64) -> String {
    if seconds.is_multiple_of(3600) {
        format!("{}-hour", seconds / 3600)
    } else if seconds.is_multiple_of(60) {
        format!("{}-minute", seconds / 60)
    } else {
        format!("{seconds}-second")
    }
}

fn duration_noun(seconds: u64) -> String {
    let (n, unit) = if seconds.is_multiple_of(3600) {
        (seconds / 3600, "hour")
    } else if seconds.is_multiple_of(60) {
        (seconds / 60, "minute")
    } else {
        (seconds, "second")
    };
    if n == 1 {
        format!("1 {unit}")
    } else {
        format!("{n} {unit}s")
    }
}

fn clock(seconds: u32) -> String {
    let (h, m, s) = (seconds / 3600, seconds % 3600 / 60, seconds % 60);
    if s == 0 {
        format!("{h:02}:{m:02}")
    } else {
        format!("{h:02}:{m:02}:{s:02}")
    }
}

fn time_phrase(spec: &TimeSpec) -> String {
    match spec {
        TimeSpec::Always => "at all times".into(),
        TimeSpec::Window { duration } => format!("over any {} window", duration_adjective(*duration)),
        TimeSpec::Horizon { duration } => format!("for the next {}", duration_noun(*duration)),
        TimeSpec::Recurrence(r) => {
            let days = if r.days == DaySet::ALL { "every day".to_string() } else { format!("on {}", r.days.describe()) };
            format!("{days} from {} to {}", clock(r.start), clock(r.end))
        }
        TimeSpec::Unknown { raw } => format!("during '{raw}'"),
    }
}

pub fn render_friendly(frame: &KeywordFrame) -> Result<String, FormulaError> {
    let missing = frame.missing();
    if !missing.is_empty() {
        return Err(FormulaError::IncompleteFrame(missing));
    }
    let (Some(entity), Some(location), Some(time), Some(condition)) =
        (&frame.entity, &frame.location, &frame.time, &frame.condition)
    else {
        unreachable!("complete frames hold every required slot")
    };
    let comparison = condition.comparison.as_ref().expect("complete frames hold a comparison");
    let mut out = format!("Entity '{}'", entity.text);
    if let Some(q) = &frame.quantifier {
        out.push_str(&format!(" of '{}'", q.text));
    }
    out.push_str(&format!(" at '{}' must ", location.text));
    if condition.polarity.is_some_and(|p| p.negated) {
        out.push_str("not ");
    }
    out.push_str("be ");
    match &comparison.value {
        ConditionValue::Number { .. } => {
            out.push_str(&format!("{} {}", number_words(comparison.op), condition.value.text))
        }
        ConditionValue::Ordinal { scale, .. } => out.push_str(&format!(
            "{} the '{}' level of the {scale} scale",
            level_words(comparison.op),
            condition.value.text
        )),
    }
    out.push(' ');
    out.push_str(&time_phrase(&time.spec));
    out.push('.');
    Ok(out)
}
