//! Turns English smart-city requirements into formal specifications.
//!
//! The pipeline is [`tokenize`] → [`label`] → [`extract_frame`] →
//! [`build_formula`] → [`render_formal`] / [`render_friendly`], driven either
//! interactively through a [`Session`] or in bulk through [`convert_batch`].
//! All of it reads an immutable [`KnowledgeBase`] snapshot.

pub mod batch;
pub mod condition;
pub mod dialogue;
pub mod formula;
pub mod frame;
pub mod kb;
pub mod labeler;
pub mod text;
pub mod time;

pub use condition::{detect_polarity, parse_condition, CmpOp, Comparison, ConditionError, ConditionValue, Polarity};
pub use formula::{
    build_formula, identifier, parse_formula, render_formal, render_friendly, FormulaError, SpecFormula, SyntaxError,
};
pub use frame::{extract_frame, ConditionSlot, KeywordFrame, Provenance, SlotValue, TextSpan, TimeSlot};
pub use kb::{KbError, KnowledgeBase, LearnedSample, SynthesisControls, ValidationConfig};
pub use labeler::{label, LabelSeq, Tag};
pub use text::{normalize, tokenize, Requirement, SlotKind, Source, TextError, Token};
pub use time::{refine_time, DaySet, Recurrence, TimeSpec};
pub use batch::{convert_batch, convert_line, BatchOutcome};
pub use dialogue::{parse_correction, DialogueError, OutputRecord, Reply, Session, SessionState, SpecView};
