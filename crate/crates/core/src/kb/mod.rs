//! The knowledge base: a versioned vocabulary (phrase → slot kind) plus the
//! syntactic patterns abstracted from annotated requirements.
//!
//! Values are immutable snapshots. Every mutating operation
//! ([`KnowledgeBase::flush_learned`]) returns a new snapshot and leaves the
//! receiver untouched.

mod corpus;
mod learning;
mod pattern;
mod store;
mod synth;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use corpus::{parse_corpus, AnnotatedRecord, SpanAnnotation};
pub use learning::{FlushReport, LearnedSample, RejectionReason, SampleStatus, ValidationConfig, Validator};
pub use pattern::{abstract_pattern, Pattern, PatternElement};
pub(crate) use pattern::PatternItem;
pub use store::FORMAT_VERSION;
pub use synth::{SynthesisControls, DEFAULT_MISSING_RATES};

use crate::text::{normalize, phrase_key, GraphemeIndex, SlotKind};

const SEED_CORPUS: &str = include_str!("../../data/seed_corpus.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KbError {
    #[error("malformed corpus at line {line}: {reason}")]
    MalformedCorpus { line: usize, reason: String },
    #[error("record has no labeled spans")]
    NoPlaceholders,
    #[error("no vocabulary for slot kind `{0}`")]
    InsufficientVocabulary(SlotKind),
    #[error("knowledge base has no patterns")]
    NoPatterns,
    #[error("invalid synthesis controls: {0}")]
    InvalidControls(String),
    #[error("corrupt knowledge-base store: {0}")]
    CorruptStore(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabProvenance {
    Seed,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    /// Normalized phrase.
    pub phrase: String,
    pub kind: SlotKind,
    pub frequency: u64,
    pub provenance: VocabProvenance,
    pub validated: bool,
}

impl VocabEntry {
    /// Seed entries and validated learned entries are visible to the labeler.
    pub fn is_visible(&self) -> bool {
        self.provenance == VocabProvenance::Seed || self.validated
    }
}

/// Default ordinal scales, each listed from worst to best so that
/// "better than" compares as greater-than on the level index.
pub fn default_ordinal_scales() -> BTreeMap<String, Vec<String>> {
    let mut scales = BTreeMap::new();
    scales.insert(
        "air-quality".to_string(),
        ["hazardous", "very unhealthy", "unhealthy", "unhealthy for sensitive groups", "moderate", "good"]
            .into_iter()
            .map(String::from)
            .collect(),
    );
    scales.insert(
        "noise-level".to_string(),
        ["very loud", "loud", "moderate noise", "quiet", "very quiet"].into_iter().map(String::from).collect(),
    );
    scales
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    version: u64,
    vocabulary: Vec<VocabEntry>,
    patterns: Vec<Pattern>,
    ordinal_scales: BTreeMap<String, Vec<String>>,
    rejection_log: Vec<LearnedSample>,
    /// phrase key → visible kinds, in `SlotKind` order.
    index: HashMap<String, Vec<SlotKind>>,
    max_phrase_tokens: usize,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.vocabulary == other.vocabulary
            && self.patterns == other.patterns
            && self.ordinal_scales == other.ordinal_scales
            && self.rejection_log == other.rejection_log
    }
}

impl KnowledgeBase {
    pub(crate) fn from_parts(
        version: u64,
        mut vocabulary: Vec<VocabEntry>,
        patterns: Vec<Pattern>,
        ordinal_scales: BTreeMap<String, Vec<String>>,
        rejection_log: Vec<LearnedSample>,
    ) -> Self {
        vocabulary.sort_by(|a, b| (&a.phrase, a.kind).cmp(&(&b.phrase, b.kind)));
        let mut index: HashMap<String, Vec<SlotKind>> = HashMap::new();
        let mut max_phrase_tokens = 0;
        for entry in vocabulary.iter().filter(|e| e.is_visible()) {
            let key = phrase_key(&entry.phrase);
            if key.is_empty() {
                continue;
            }
            max_phrase_tokens = max_phrase_tokens.max(key.split(' ').count());
            let kinds = index.entry(key).or_default();
            if !kinds.contains(&entry.kind) {
                kinds.push(entry.kind);
                kinds.sort();
            }
        }
        Self { version, vocabulary, patterns, ordinal_scales, rejection_log, index, max_phrase_tokens }
    }

    /// A version-1 knowledge base with no vocabulary or patterns.
    pub fn empty() -> Self {
        Self::from_parts(1, Vec::new(), Vec::new(), default_ordinal_scales(), Vec::new())
    }

    /// The knowledge base built from the bundled annotated corpus of six
    /// example requirements.
    pub fn seed() -> Self {
        let records = parse_corpus(SEED_CORPUS).expect("bundled seed corpus is well formed");
        Self::build(&records).expect("bundled seed corpus is well formed")
    }

    pub fn seed_records() -> Vec<AnnotatedRecord> {
        parse_corpus(SEED_CORPUS).expect("bundled seed corpus is well formed")
    }

    /// Builds a version-1 knowledge base from annotated records. Vocabulary
    /// holds every normalized span with its frequency; each record with at
    /// least one span contributes a pattern (duplicates merge frequencies).
    pub fn build(records: &[AnnotatedRecord]) -> Result<Self, KbError> {
        let mut vocab: BTreeMap<(String, SlotKind), u64> = BTreeMap::new();
        let mut patterns: Vec<Pattern> = Vec::new();
        for (i, record) in records.iter().enumerate() {
            record.validate().map_err(|reason| KbError::MalformedCorpus { line: i + 1, reason })?;
            let index = GraphemeIndex::new(&record.text);
            for span in &record.spans {
                let text = index.slice(&record.text, span.start, span.end).unwrap_or_default();
                let phrase = normalize(text);
                if phrase.is_empty() {
                    continue;
                }
                *vocab.entry((phrase, span.kind)).or_default() += 1;
            }
            match abstract_pattern(record) {
                Ok(p) => match patterns.iter_mut().find(|q| q.elements == p.elements) {
                    Some(q) => q.frequency += 1,
                    None => patterns.push(p),
                },
                Err(KbError::NoPlaceholders) => {}
                Err(e) => return Err(e),
            }
        }
        let vocabulary = vocab
            .into_iter()
            .map(|((phrase, kind), frequency)| VocabEntry {
                phrase,
                kind,
                frequency,
                provenance: VocabProvenance::Seed,
                validated: true,
            })
            .collect();
        Ok(Self::from_parts(1, vocabulary, patterns, default_ordinal_scales(), Vec::new()))
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn vocabulary(&self) -> &[VocabEntry] {
        &self.vocabulary
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn ordinal_scales(&self) -> &BTreeMap<String, Vec<String>> {
        &self.ordinal_scales
    }

    pub fn rejection_log(&self) -> &[LearnedSample] {
        &self.rejection_log
    }

    pub fn entry(&self, phrase: &str, kind: SlotKind) -> Option<&VocabEntry> {
        self.vocabulary.iter().find(|e| e.phrase == phrase && e.kind == kind)
    }

    /// Visible kinds for a phrase key (see [`phrase_key`]).
    pub fn lookup(&self, key: &str) -> &[SlotKind] {
        self.index.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn max_phrase_tokens(&self) -> usize {
        self.max_phrase_tokens
    }

    /// Visible entries of one kind, sorted by phrase.
    pub fn entries_of(&self, kind: SlotKind) -> Vec<&VocabEntry> {
        self.vocabulary.iter().filter(|e| e.kind == kind && e.is_visible()).collect()
    }

    /// Finds a normalized level name in the ordinal scales (scales in name
    /// order). Returns the scale id and the level's index.
    pub fn find_level(&self, level: &str) -> Option<(&str, usize)> {
        self.ordinal_scales
            .iter()
            .find_map(|(name, levels)| levels.iter().position(|l| l == level).map(|i| (name.as_str(), i)))
    }

    /// Returns a copy with the given ordinal scales, same version.
    pub fn with_ordinal_scales(&self, scales: BTreeMap<String, Vec<String>>) -> Self {
        Self::from_parts(
            self.version,
            self.vocabulary.clone(),
            self.patterns.clone(),
            scales,
            self.rejection_log.clone(),
        )
    }

    /// Validates every pending sample against this snapshot and returns the
    /// next snapshot (version + 1) with accepted samples merged into the
    /// vocabulary as learned entries and rejected ones appended to the
    /// rejection log.
    pub fn flush_learned(&self, samples: &[LearnedSample], config: &ValidationConfig) -> (Self, FlushReport) {
        learning::flush(self, samples, config)
    }
}
