//! Validation gate and long-term flush for user clarifications.
//!
//! Rules, applied in order:
//!
//! * **V-1** the value occurs in the requirement (token-aligned, after
//!   normalization) or parses as the slot's structured form;
//! * **V-2** the value is not already a frequent vocabulary phrase of a
//!   different kind;
//! * **V-3** the submitting user is within the per-window quota;
//! * **V-4** the value is at most `max_tokens` tokens long.

use std::collections::{BTreeMap, HashMap};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{KnowledgeBase, VocabEntry, VocabProvenance};
use crate::condition::{parse_condition, split_leading_cue, CmpOp};
use crate::text::{normalize, phrase_key, SlotKind};
use crate::time::refine_time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectionReason {
    SpanNotFoundAndUnparseable,
    KindConflict,
    QuotaExceeded,
    TooLong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum SampleStatus {
    Pending,
    Accepted,
    Rejected(RejectionReason),
}

/// A clarification or correction typed by a user, queued for validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedSample {
    pub requirement_text: String,
    pub slot_kind: SlotKind,
    pub clarified_value: String,
    pub user: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub status: SampleStatus,
}

impl LearnedSample {
    pub fn pending(
        requirement_text: impl Into<String>,
        slot_kind: SlotKind,
        clarified_value: impl Into<String>,
        user: impl Into<String>,
    ) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            requirement_text: requirement_text.into(),
            slot_kind,
            clarified_value: clarified_value.into(),
            user: user.into(),
            timestamp,
            status: SampleStatus::Pending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    /// V-2 rejects a value already known under another kind with a
    /// frequency above this.
    pub conflict_threshold: u64,
    /// V-3 pending samples allowed per user per flush window.
    pub user_quota: usize,
    /// V-4 maximum value length in tokens.
    pub max_tokens: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { conflict_threshold: 3, user_quota: 100, max_tokens: 10 }
    }
}

/// Applies V-1..V-4. Holds the per-user quota ledger for one flush window.
#[derive(Debug, Clone, Default)]
pub struct Validator {
    config: ValidationConfig,
    ledger: HashMap<String, usize>,
}

impl Validator {
    pub fn new(config: ValidationConfig) -> Self {
        Self { config, ledger: HashMap::new() }
    }

    pub fn validate(&mut self, sample: &LearnedSample, kb: &KnowledgeBase) -> Result<(), RejectionReason> {
        let value_key = phrase_key(&sample.clarified_value);

        // V-1
        let haystack = format!(" {} ", phrase_key(&sample.requirement_text));
        let in_text = !value_key.is_empty() && haystack.contains(&format!(" {value_key} "));
        if !in_text && !parses_as(sample.slot_kind, &sample.clarified_value, kb) {
            return Err(RejectionReason::SpanNotFoundAndUnparseable);
        }

        // V-2
        let phrase = normalize(&sample.clarified_value);
        let conflict = kb.vocabulary().iter().any(|e| {
            e.phrase == phrase && e.kind != sample.slot_kind && e.frequency > self.config.conflict_threshold
        });
        if conflict {
            return Err(RejectionReason::KindConflict);
        }

        // V-3
        let used = self.ledger.entry(sample.user.clone()).or_default();
        *used += 1;
        if *used > self.config.user_quota {
            return Err(RejectionReason::QuotaExceeded);
        }

        // V-4
        if value_key.split(' ').count() > self.config.max_tokens {
            return Err(RejectionReason::TooLong);
        }
        Ok(())
    }
}

fn parses_as(kind: SlotKind, value: &str, kb: &KnowledgeBase) -> bool {
    match kind {
        SlotKind::Time => refine_time(value).is_known(),
        SlotKind::Condition => {
            let (op, rest) = split_leading_cue(value).map_or((CmpOp::Eq, value), |(p, r)| (p.op, r));
            parse_condition(rest, op, kb).is_ok()
        }
        SlotKind::Entity | SlotKind::Quantifier | SlotKind::Location => false,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlushReport {
    pub new_version: u64,
    pub accepted: usize,
    pub rejected: usize,
}

pub(super) fn flush(kb: &KnowledgeBase, samples: &[LearnedSample], config: &ValidationConfig) -> (KnowledgeBase, FlushReport) {
    let mut validator = Validator::new(config.clone());
    let mut vocab: BTreeMap<(String, SlotKind), VocabEntry> =
        kb.vocabulary.iter().map(|e| ((e.phrase.clone(), e.kind), e.clone())).collect();
    let mut rejection_log = kb.rejection_log.clone();
    let mut report = FlushReport { new_version: kb.version + 1, ..FlushReport::default() };

    for sample in samples.iter().filter(|s| s.status == SampleStatus::Pending) {
        match validator.validate(sample, kb) {
            Ok(()) => {
                report.accepted += 1;
                let phrase = normalize(&sample.clarified_value);
                vocab
                    .entry((phrase.clone(), sample.slot_kind))
                    .and_modify(|e| {
                        e.frequency += 1;
                        e.validated = true;
                    })
                    .or_insert(VocabEntry {
                        phrase,
                        kind: sample.slot_kind,
                        frequency: 1,
                        provenance: VocabProvenance::Learned,
                        validated: true,
                    });
            }
            Err(reason) => {
                report.rejected += 1;
                rejection_log.push(LearnedSample { status: SampleStatus::Rejected(reason), ..sample.clone() });
            }
        }
    }

    let next = KnowledgeBase::from_parts(
        kb.version + 1,
        vocab.into_values().collect(),
        kb.patterns.clone(),
        kb.ordinal_scales.clone(),
        rejection_log,
    );
    (next, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const IVC: &str = "In all the buildings, during weekdays from 2pm to 5pm, the average concentration of tetrachloroethylene should be no more than 0.25 mg/m3.";

    fn sample(kind: SlotKind, value: &str) -> LearnedSample {
        LearnedSample::pending(IVC, kind, value, "alice")
    }

    #[test]
    fn substring_clarification_accepted() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        assert_eq!(v.validate(&sample(SlotKind::Time, "weekdays from 2pm to 5pm"), &kb), Ok(()));
    }

    #[test]
    fn nonsense_rejected_by_v1() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        assert_eq!(
            v.validate(&sample(SlotKind::Time, "purple elephants"), &kb),
            Err(RejectionReason::SpanNotFoundAndUnparseable)
        );
    }

    #[test]
    fn structured_value_passes_v1_without_substring() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        assert_eq!(v.validate(&sample(SlotKind::Time, "between 7 am to 8 am"), &kb), Ok(()));
        assert_eq!(v.validate(&sample(SlotKind::Condition, "at most 3 ppm"), &kb), Ok(()));
        assert_eq!(
            v.validate(&sample(SlotKind::Location, "the moon"), &kb),
            Err(RejectionReason::SpanNotFoundAndUnparseable)
        );
    }

    #[test]
    fn kind_conflict() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        // "buildings" is a location with frequency 4 > 3.
        assert_eq!(v.validate(&sample(SlotKind::Entity, "buildings"), &kb), Err(RejectionReason::KindConflict));
        // "tetrachloroethylene" has frequency 1, below the threshold.
        assert_eq!(v.validate(&sample(SlotKind::Entity, "tetrachloroethylene"), &kb), Ok(()));
    }

    #[test]
    fn quota_per_user() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        for _ in 0..100 {
            assert_eq!(v.validate(&sample(SlotKind::Time, "weekdays from 2pm to 5pm"), &kb), Ok(()));
        }
        assert_eq!(
            v.validate(&sample(SlotKind::Time, "weekdays from 2pm to 5pm"), &kb),
            Err(RejectionReason::QuotaExceeded)
        );
        let other = LearnedSample::pending(IVC, SlotKind::Time, "weekdays from 2pm to 5pm", "bob");
        assert_eq!(v.validate(&other, &kb), Ok(()));
    }

    #[test]
    fn too_long() {
        let kb = KnowledgeBase::seed();
        let mut v = Validator::default();
        let long = "In all the buildings, during weekdays from 2pm to 5pm, the average";
        assert_eq!(v.validate(&sample(SlotKind::Location, long), &kb), Err(RejectionReason::TooLong));
    }

    #[test]
    fn flush_accepts_and_bumps_version() {
        let kb = KnowledgeBase::seed();
        let before = kb.clone();
        let (next, report) = kb.flush_learned(&[sample(SlotKind::Time, "weekdays from 2pm to 5pm")], &Default::default());
        assert_eq!(kb, before, "input snapshot unchanged");
        assert_eq!(report, FlushReport { new_version: 2, accepted: 1, rejected: 0 });
        assert_eq!(next.version(), 2);
        let e = next.entry("weekdays from 2pm to 5pm", SlotKind::Time).unwrap();
        assert_eq!(e.provenance, VocabProvenance::Learned);
        assert!(e.validated);
    }

    #[test]
    fn empty_flush_is_a_version_bump() {
        let kb = KnowledgeBase::seed();
        let (next, report) = kb.flush_learned(&[], &Default::default());
        assert_eq!(next.version(), 2);
        assert_eq!(next.vocabulary(), kb.vocabulary());
        assert_eq!(report.accepted, 0);
    }

    #[test]
    fn rejected_batch_leaves_vocabulary() {
        let kb = KnowledgeBase::seed();
        let batch = [sample(SlotKind::Time, "purple elephants"), sample(SlotKind::Location, "the moon")];
        let (next, report) = kb.flush_learned(&batch, &Default::default());
        assert_eq!(next.vocabulary(), kb.vocabulary());
        assert_eq!(report.rejected, 2);
        assert_eq!(next.rejection_log().len(), 2);
        assert!(next
            .rejection_log()
            .iter()
            .all(|s| matches!(s.status, SampleStatus::Rejected(_))));
    }

    #[test]
    fn duplicates_merge_frequency() {
        let kb = KnowledgeBase::seed();
        let batch = [sample(SlotKind::Location, "buildings"), sample(SlotKind::Time, "weekdays from 2pm to 5pm")];
        let (next, _) = kb.flush_learned(&batch, &Default::default());
        let e = next.entry("buildings", SlotKind::Location).unwrap();
        assert_eq!(e.frequency, 5);
        assert_eq!(e.provenance, VocabProvenance::Seed);
    }
}
