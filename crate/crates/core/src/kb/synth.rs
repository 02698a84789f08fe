//! Controllable synthesis of annotated requirements from patterns and
//! vocabulary.
//!
//! Sampling order for each record, from a ChaCha8 stream seeded with
//! `rng_seed`:
//!
//! 1. a pattern index, uniform over the knowledge base's patterns;
//! 2. one uniform draw in `[0, 1)` per slot kind present in the pattern, in
//!    kind order, deciding whether every placeholder of that kind is dropped;
//! 3. for each kept placeholder in template order, a vocabulary index,
//!    uniform over the visible entries of that kind (sorted by phrase).
//!
//! Missing rates are corpus-level targets: the fraction of records without a
//! slot of kind `k`. Patterns that have no `k` placeholder already contribute
//! records missing `k`, so the per-placeholder drop probability is
//! `(rate - q) / (1 - q)` where `q` is the fraction of patterns lacking `k`.
//! Targets below `q` cannot be reached with uniform pattern sampling and are
//! clamped to a drop probability of zero.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AnnotatedRecord, KbError, KnowledgeBase, PatternElement, SpanAnnotation};
use crate::text::{grapheme_len, SlotKind};

/// Missing-slot rates observed in real city requirements.
pub const DEFAULT_MISSING_RATES: [(SlotKind, f64); 3] =
    [(SlotKind::Location, 0.276), (SlotKind::Quantifier, 0.291), (SlotKind::Time, 0.90)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisControls {
    pub count: usize,
    pub missing_rates: BTreeMap<SlotKind, f64>,
    pub rng_seed: u64,
}

impl SynthesisControls {
    pub fn new(count: usize, rng_seed: u64) -> Self {
        Self { count, missing_rates: BTreeMap::new(), rng_seed }
    }

    pub fn with_default_rates(count: usize, rng_seed: u64) -> Self {
        Self { count, missing_rates: DEFAULT_MISSING_RATES.into_iter().collect(), rng_seed }
    }

    pub fn rate(&self, kind: SlotKind) -> f64 {
        self.missing_rates.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), KbError> {
        if self.count == 0 {
            return Err(KbError::InvalidControls("count must be at least 1".into()));
        }
        for (kind, rate) in &self.missing_rates {
            if !(0.0..=1.0).contains(rate) {
                return Err(KbError::InvalidControls(format!("missing rate for {kind} must be in [0, 1], got {rate}")));
            }
        }
        Ok(())
    }
}

enum Piece {
    Lit(String),
    Fill(SlotKind, String),
}

static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());
static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+([,.;:!?])").unwrap());
static REPEATED_COMMA: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",(\s*,)+").unwrap());
static COMMA_BEFORE_STOP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r",\s*([.;:!?])").unwrap());

fn tidy(lit: &str, first: bool) -> String {
    let s = SPACES.replace_all(lit, " ");
    let s = SPACE_BEFORE_PUNCT.replace_all(&s, "$1");
    let s = REPEATED_COMMA.replace_all(&s, ",");
    let s = COMMA_BEFORE_STOP.replace_all(&s, "$1");
    if first {
        s.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':')).to_string()
    } else {
        s.into_owned()
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl KnowledgeBase {
    /// Generates `controls.count` annotated records. Deterministic for a
    /// given knowledge base and controls.
    pub fn synthesize(&self, controls: &SynthesisControls) -> Result<Vec<AnnotatedRecord>, KbError> {
        controls.validate()?;
        if self.patterns.is_empty() {
            return Err(KbError::NoPatterns);
        }
        let n_patterns = self.patterns.len() as f64;
        let drop_prob: BTreeMap<SlotKind, f64> = SlotKind::ALL
            .into_iter()
            .map(|kind| {
                let lacking = self.patterns.iter().filter(|p| !p.has_slot(kind)).count() as f64 / n_patterns;
                let rate = controls.rate(kind);
                let p = if lacking >= 1.0 { 0.0 } else { ((rate - lacking) / (1.0 - lacking)).clamp(0.0, 1.0) };
                (kind, p)
            })
            .collect();

        let fillers: BTreeMap<SlotKind, Vec<&str>> = SlotKind::ALL
            .into_iter()
            .map(|k| (k, self.entries_of(k).into_iter().map(|e| e.phrase.as_str()).collect()))
            .collect();
        for kind in SlotKind::ALL {
            let used = self.patterns.iter().any(|p| p.has_slot(kind));
            if used && drop_prob[&kind] < 1.0 && fillers[&kind].is_empty() {
                return Err(KbError::InsufficientVocabulary(kind));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(controls.rng_seed);
        let mut records = Vec::with_capacity(controls.count);
        for _ in 0..controls.count {
            let pattern = &self.patterns[rng.random_range(0..self.patterns.len())];
            let mut dropped = [false; 5];
            for kind in SlotKind::ALL {
                if pattern.has_slot(kind) {
                    dropped[kind.index()] = rng.random::<f64>() < drop_prob[&kind];
                }
            }

            let mut pieces: Vec<Piece> = Vec::new();
            for element in &pattern.elements {
                match element {
                    PatternElement::Text { text } => match pieces.last_mut() {
                        Some(Piece::Lit(prev)) => prev.push_str(text),
                        _ => pieces.push(Piece::Lit(text.clone())),
                    },
                    PatternElement::Slot { slot, elide } if dropped[slot.index()] => {
                        if let Some(Piece::Lit(prev)) = pieces.last_mut() {
                            if prev.ends_with(elide.as_str()) {
                                prev.truncate(prev.len() - elide.len());
                            }
                        }
                    }
                    PatternElement::Slot { slot, .. } => {
                        let pool = &fillers[slot];
                        let phrase = pool[rng.random_range(0..pool.len())];
                        pieces.push(Piece::Fill(*slot, phrase.to_string()));
                    }
                }
            }
            records.push(assemble(pieces));
        }
        Ok(records)
    }
}

fn assemble(pieces: Vec<Piece>) -> AnnotatedRecord {
    let last = pieces.len().saturating_sub(1);
    let mut text = String::new();
    let mut spans = Vec::new();
    for (i, piece) in pieces.into_iter().enumerate() {
        match piece {
            Piece::Lit(lit) => {
                let mut lit = tidy(&lit, text.is_empty());
                if text.is_empty() {
                    lit = capitalize(&lit);
                }
                if lit.is_empty() && !text.is_empty() && i != last {
                    lit = " ".into();
                }
                text.push_str(&lit);
            }
            Piece::Fill(kind, phrase) => {
                let start = grapheme_len(&text);
                text.push_str(&phrase);
                spans.push(SpanAnnotation { kind, start, end: grapheme_len(&text) });
            }
        }
    }
    AnnotatedRecord { text, spans }
}
