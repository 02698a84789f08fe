//! Deterministic BIO labeler over a knowledge-base snapshot.
//!
//! Stages:
//!
//! 1. gazetteer: every token window whose phrase key is a visible
//!    vocabulary phrase is a candidate; candidates are taken greedily by
//!    (longer span, earlier start, kind order) without overlap;
//! 2. patterns, for kinds the gazetteer left unresolved: the first pattern
//!    (by frequency, then insertion order) that aligns with the whole
//!    sentence assigns its all-`O` placeholder ranges;
//! 3. a local rule for a still-unresolved condition: a number (with an
//!    optional unit) or an ordinal level right after a comparison cue.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Serialize, Serializer};

use crate::condition::detect_polarity;
use crate::kb::KnowledgeBase;
use crate::kb::PatternItem;
use crate::text::{phrase_key, SlotKind, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(SlotKind),
    I(SlotKind),
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(k) => write!(f, "B-{}", k.tag()),
            Tag::I(k) => write!(f, "I-{}", k.tag()),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A labeled span in token indices, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LabeledSpan {
    pub kind: SlotKind,
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LabelSeq {
    tags: Vec<Tag>,
}

impl LabelSeq {
    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Every `I` tag follows a `B` or `I` tag of the same kind.
    pub fn is_well_formed(&self) -> bool {
        self.tags.iter().enumerate().all(|(i, t)| match t {
            Tag::I(k) => i > 0 && matches!(self.tags[i - 1], Tag::B(p) | Tag::I(p) if p == *k),
            _ => true,
        })
    }

    pub fn spans(&self) -> Vec<LabeledSpan> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < self.tags.len() {
            match self.tags[i] {
                Tag::B(kind) => {
                    let first = i;
                    i += 1;
                    while i < self.tags.len() && self.tags[i] == Tag::I(kind) {
                        i += 1;
                    }
                    spans.push(LabeledSpan { kind, first, last: i });
                }
                _ => i += 1,
            }
        }
        spans
    }

    fn from_spans(len: usize, spans: &[LabeledSpan]) -> Self {
        let mut tags = vec![Tag::O; len];
        for s in spans {
            tags[s.first] = Tag::B(s.kind);
            for t in &mut tags[s.first + 1..s.last] {
                *t = Tag::I(s.kind);
            }
        }
        Self { tags }
    }
}

pub fn label(tokens: &[Token], kb: &KnowledgeBase) -> LabelSeq {
    let lower: Vec<String> = tokens.iter().map(Token::lower).collect();
    let mut owner: Vec<Option<SlotKind>> = vec![None; tokens.len()];
    let mut spans = gazetteer(tokens, &lower, kb);
    for s in &spans {
        owner[s.first..s.last].fill(Some(s.kind));
    }

    let unresolved = |spans: &[LabeledSpan], k: SlotKind| spans.iter().all(|s| s.kind != k);
    if SlotKind::ALL.iter().any(|k| unresolved(&spans, *k)) {
        for s in pattern_spans(tokens, &lower, &owner, kb) {
            if unresolved(&spans, s.kind) && owner[s.first..s.last].iter().all(Option::is_none) {
                owner[s.first..s.last].fill(Some(s.kind));
                spans.push(s);
            }
        }
    }

    if unresolved(&spans, SlotKind::Condition) {
        if let Some(s) = local_condition(&lower, &owner, kb) {
            spans.push(s);
        }
    }
    LabelSeq::from_spans(tokens.len(), &spans)
}

fn gazetteer(tokens: &[Token], lower: &[String], kb: &KnowledgeBase) -> Vec<LabeledSpan> {
    let mut candidates = Vec::new();
    for start in 0..tokens.len() {
        let mut key = String::new();
        for end in start + 1..=(start + kb.max_phrase_tokens()).min(tokens.len()) {
            if end - 1 > start && tokens[end - 1].clause_break {
                break;
            }
            if !key.is_empty() {
                key.push(' ');
            }
            key.push_str(&lower[end - 1]);
            for &kind in kb.lookup(&key) {
                candidates.push(LabeledSpan { kind, first: start, last: end });
            }
        }
    }
    candidates.sort_by_key(|c| (std::cmp::Reverse(c.last - c.first), c.first, c.kind));
    let mut taken = vec![false; tokens.len()];
    let mut chosen = Vec::new();
    for c in candidates {
        if taken[c.first..c.last].iter().any(|t| *t) {
            continue;
        }
        taken[c.first..c.last].fill(true);
        chosen.push(c);
    }
    chosen.sort_by_key(|s| s.first);
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sym {
    Tok(usize),
    Break,
}

fn pattern_spans(
    tokens: &[Token],
    lower: &[String],
    owner: &[Option<SlotKind>],
    kb: &KnowledgeBase,
) -> Vec<LabeledSpan> {
    let mut stream = Vec::with_capacity(tokens.len() + 4);
    for (i, t) in tokens.iter().enumerate() {
        if t.clause_break && i > 0 {
            stream.push(Sym::Break);
        }
        stream.push(Sym::Tok(i));
    }
    let mut order: Vec<usize> = (0..kb.patterns().len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(kb.patterns()[i].frequency));
    for i in order {
        let items = kb.patterns()[i].items();
        let mut bound = Vec::new();
        if align(&items, &stream, lower, owner, &mut bound) {
            return bound.into_iter().filter(|s| owner[s.first..s.last].iter().all(Option::is_none)).collect();
        }
    }
    Vec::new()
}

/// Aligns pattern items with the whole symbol stream; slots take the
/// shortest token run that lets the rest align.
fn align(
    items: &[PatternItem],
    stream: &[Sym],
    lower: &[String],
    owner: &[Option<SlotKind>],
    bound: &mut Vec<LabeledSpan>,
) -> bool {
    let Some((item, rest)) = items.split_first() else {
        return stream.is_empty();
    };
    match item {
        PatternItem::Word(w) => match stream.first() {
            Some(Sym::Tok(t)) if lower[*t] == *w => align(rest, &stream[1..], lower, owner, bound),
            _ => false,
        },
        PatternItem::Break => match stream.first() {
            Some(Sym::Break) => align(rest, &stream[1..], lower, owner, bound),
            _ => false,
        },
        PatternItem::Slot(kind) => {
            let mut n = 0;
            while let Some(Sym::Tok(t)) = stream.get(n) {
                if owner[*t].is_some_and(|k| k != *kind) {
                    break;
                }
                n += 1;
                let Sym::Tok(first) = stream[0] else { unreachable!() };
                bound.push(LabeledSpan { kind: *kind, first, last: t + 1 });
                if align(rest, &stream[n..], lower, owner, bound) {
                    return true;
                }
                bound.pop();
            }
            false
        }
    }
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)$").unwrap());
static UNIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-zµμ°%][\w/%°µμ^.·-]*$").unwrap());

const NOT_UNITS: &[&str] = &[
    "in", "at", "on", "of", "for", "during", "within", "from", "to", "the", "a", "an", "all", "any", "every", "each",
    "over", "across", "by", "near", "and", "or", "per", "when", "while", "if", "than", "between", "throughout",
    "everywhere", "always", "daily",
];

fn local_condition(lower: &[String], owner: &[Option<SlotKind>], kb: &KnowledgeBase) -> Option<LabeledSpan> {
    for i in 1..lower.len() {
        if owner[i].is_some() || detect_polarity(&lower[..i]).is_err() {
            continue;
        }
        if NUMBER.is_match(&lower[i]) {
            let unit = lower.get(i + 1).is_some_and(|w| {
                owner[i + 1].is_none() && UNIT.is_match(w) && !NOT_UNITS.contains(&w.as_str())
            });
            let last = if unit { i + 2 } else { i + 1 };
            return Some(LabeledSpan { kind: SlotKind::Condition, first: i, last });
        }
        for levels in kb.ordinal_scales().values() {
            for level in levels {
                let key = phrase_key(level);
                let n = key.split(' ').count();
                if i + n <= lower.len()
                    && owner[i..i + n].iter().all(Option::is_none)
                    && lower[i..i + n].join(" ") == key
                {
                    return Some(LabeledSpan { kind: SlotKind::Condition, first: i, last: i + n });
                }
            }
        }
    }
    None
}
