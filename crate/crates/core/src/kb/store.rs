//! JSON store for knowledge-base snapshots.
//!
//! Layout: `{format_version, version, vocabulary[], patterns[],
//! ordinal_scales{}, rejection_log[]}`. Every field is required.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{KbError, KnowledgeBase, LearnedSample, Pattern, SampleStatus, VocabEntry};
use crate::text::normalize;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct StoreRef<'a> {
    format_version: u32,
    version: u64,
    vocabulary: &'a [VocabEntry],
    patterns: &'a [Pattern],
    ordinal_scales: &'a BTreeMap<String, Vec<String>>,
    rejection_log: &'a [LearnedSample],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreOwned {
    format_version: u32,
    version: u64,
    vocabulary: Vec<VocabEntry>,
    patterns: Vec<Pattern>,
    ordinal_scales: BTreeMap<String, Vec<String>>,
    rejection_log: Vec<LearnedSample>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

impl KnowledgeBase {
    pub fn save(&self) -> Vec<u8> {
        let doc = StoreRef {
            format_version: FORMAT_VERSION,
            version: self.version,
            vocabulary: &self.vocabulary,
            patterns: &self.patterns,
            ordinal_scales: &self.ordinal_scales,
            rejection_log: &self.rejection_log,
        };
        serde_json::to_vec_pretty(&doc).expect("knowledge base serializes")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, KbError> {
        let corrupt = |m: String| KbError::CorruptStore(m);
        if let Ok(VersionProbe { format_version: Some(v) }) = serde_json::from_slice::<VersionProbe>(bytes) {
            if v > FORMAT_VERSION {
                return Err(corrupt(format!(
                    "format_version {v} is newer than the supported version {FORMAT_VERSION}"
                )));
            }
        }
        let doc: StoreOwned = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        if doc.format_version == 0 {
            return Err(corrupt("format_version 0 is not a valid version".into()));
        }
        if doc.version == 0 {
            return Err(corrupt("version must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for e in &doc.vocabulary {
            if e.phrase.is_empty() || normalize(&e.phrase) != e.phrase {
                return Err(corrupt(format!("vocabulary phrase {:?} is not normalized", e.phrase)));
            }
            if !seen.insert((e.phrase.as_str(), e.kind)) {
                return Err(corrupt(format!("duplicate vocabulary entry {:?} ({})", e.phrase, e.kind)));
            }
        }
        if let Some(i) = doc.patterns.iter().position(|p| p.slots().next().is_none()) {
            return Err(corrupt(format!("pattern {i} has no placeholders")));
        }
        if doc.rejection_log.iter().any(|s| !matches!(s.status, SampleStatus::Rejected(_))) {
            return Err(corrupt("rejection log holds a sample that is not rejected".into()));
        }
        Ok(Self::from_parts(doc.version, doc.vocabulary, doc.patterns, doc.ordinal_scales, doc.rejection_log))
    }
}
