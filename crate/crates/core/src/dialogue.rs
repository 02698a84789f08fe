//! Session state machine: extraction, clarification, correction,
//! confirmation and short-term memory.
//!
//! ```text
//! AwaitingRequirement --requirement, complete------> AwaitingConfirmation
//! AwaitingRequirement --requirement, incomplete----> AwaitingClarification{slot}
//! AwaitingClarification --value / correction-------> next missing slot or AwaitingConfirmation
//! AwaitingConfirmation --correction----------------> AwaitingConfirmation
//! AwaitingConfirmation --affirmative---------------> Finalized
//! any state --start_new_requirement----------------> AwaitingRequirement
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::condition::{parse_condition, split_leading_cue, CmpOp, Polarity};
use crate::formula::{build_formula, render_formal, render_friendly};
use crate::frame::{extract_frame, ConditionSlot, KeywordFrame, Provenance, SlotValue, TimeSlot};
use crate::kb::{KnowledgeBase, LearnedSample};
use crate::text::{normalize, Requirement, SlotKind, TextError};
use crate::time::{refine_time, TimeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    AwaitingRequirement,
    AwaitingClarification { slot: SlotKind },
    AwaitingConfirmation,
    Finalized,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::AwaitingRequirement => "awaiting_requirement",
            SessionState::AwaitingClarification { .. } => "awaiting_clarification",
            SessionState::AwaitingConfirmation => "awaiting_confirmation",
            SessionState::Finalized => "finalized",
        }
    }

    pub fn slot(self) -> Option<SlotKind> {
        match self {
            SessionState::AwaitingClarification { slot } => Some(slot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecView {
    pub formal: String,
    pub friendly: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub text: String,
    pub frame_view: Option<KeywordFrame>,
    /// Present exactly when `state_after` is `Finalized`.
    pub spec_view: Option<SpecView>,
    pub state_after: SessionState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    pub speaker: Speaker,
    pub text: String,
    pub state_after: String,
}

/// One finalized requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub requirement: String,
    pub frame: KeywordFrame,
    pub formal: String,
    pub friendly: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("message is empty")]
    EmptyMessage,
    #[error("session is finalized; start a new requirement")]
    Finalized,
}

const AFFIRMATIVE: [&str; 5] = ["yes", "y", "confirm", "correct", "ok"];

pub fn is_affirmative(text: &str) -> bool {
    let n = normalize(text);
    AFFIRMATIVE.contains(&n.trim_end_matches(['!', '.']))
}

/// Reads `"<slot name> <value>"`. `description` names the quantifier.
pub fn parse_correction(text: &str) -> Option<(SlotKind, String)> {
    let text = text.trim();
    let split = text.find(char::is_whitespace)?;
    let kind = match text[..split].to_lowercase().as_str() {
        "entity" => SlotKind::Entity,
        "quantifier" | "description" => SlotKind::Quantifier,
        "location" => SlotKind::Location,
        "time" => SlotKind::Time,
        "condition" => SlotKind::Condition,
        _ => return None,
    };
    let value = text[split..].trim();
    (!value.is_empty()).then(|| (kind, value.to_string()))
}

/// Sets one slot from user text. Returns the stored slot text, or the reason
/// the value could not be read.
fn apply_value(
    frame: &mut KeywordFrame,
    kind: SlotKind,
    value: &str,
    provenance: Provenance,
    kb: &KnowledgeBase,
) -> Result<String, String> {
    match kind {
        SlotKind::Entity => frame.entity = Some(SlotValue::new(value, provenance)),
        SlotKind::Quantifier => frame.quantifier = Some(SlotValue::new(value, provenance)),
        SlotKind::Location => frame.location = Some(SlotValue::new(value, provenance)),
        SlotKind::Time => {
            let spec = refine_time(value);
            if let TimeSpec::Unknown { .. } = spec {
                return Err(format!(
                    "I could not read \"{value}\" as a time. Try a phrase such as \"weekdays from 2pm to 5pm\", \"in any 24 hours period\" or \"always\"."
                ));
            }
            frame.time = Some(TimeSlot { value: SlotValue::new(value, provenance), spec });
        }
        SlotKind::Condition => {
            let previous = frame.condition.as_ref().and_then(|c| c.polarity);
            let (polarity, rest) = match split_leading_cue(value) {
                Some((p, rest)) => (p, rest),
                None => (previous.unwrap_or(Polarity::new(CmpOp::Eq)), value),
            };
            let comparison = parse_condition(rest, polarity.op, kb).map_err(|_| {
                format!(
                    "I could not read \"{value}\" as a condition. Give a number with an optional unit, or a known level, for example \"no more than 5 ppm\"."
                )
            })?;
            frame.condition = Some(ConditionSlot {
                value: SlotValue::new(rest, provenance),
                polarity: Some(polarity),
                comparison: Some(comparison),
            });
            return Ok(rest.to_string());
        }
    }
    Ok(value.to_string())
}

fn ask_for(kind: SlotKind) -> &'static str {
    match kind {
        SlotKind::Location => "Where does this requirement apply? Please give the location.",
        SlotKind::Time => {
            "When is this requirement in effect? Please give the time, for example \"weekdays from 2pm to 5pm\"."
        }
        SlotKind::Condition => "What limit applies? Please give the condition, for example \"no more than 5 ppm\".",
        SlotKind::Entity => "What is being measured? Please give the entity.",
        SlotKind::Quantifier => "What does the entity refer to? Please give the quantifier.",
    }
}

fn describe_frame(frame: &KeywordFrame) -> String {
    SlotKind::ALL
        .into_iter()
        .map(|k| {
            let text = frame.text_of(k).unwrap_or("(none)");
            let defaulted = frame.time.as_ref().is_some_and(|t| t.value.provenance == Provenance::Defaulted);
            if k == SlotKind::Time && defaulted {
                format!("{k}: {text} (default)")
            } else {
                format!("{k}: {text}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const CONFIRM_PROMPT: &str = "Reply \"yes\" to confirm, or correct a slot by typing its name and the new value, for example \"location all the buildings\".";

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    user: String,
    state: SessionState,
    current: Option<(Requirement, KeywordFrame)>,
    memory: HashMap<String, KeywordFrame>,
    transcript: Vec<TranscriptEntry>,
    pending_learned: Vec<LearnedSample>,
    kb_version: Option<u64>,
    outputs: Vec<OutputRecord>,
    turn: usize,
}

impl Session {
    pub fn open(user: impl Into<String>) -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string(), user)
    }

    pub fn with_id(id: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            user: user.into(),
            state: SessionState::AwaitingRequirement,
            current: None,
            memory: HashMap::new(),
            transcript: Vec::new(),
            pending_learned: Vec::new(),
            kb_version: None,
            outputs: Vec::new(),
            turn: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn current(&self) -> Option<&(Requirement, KeywordFrame)> {
        self.current.as_ref()
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn pending_learned(&self) -> &[LearnedSample] {
        &self.pending_learned
    }

    /// Version of the knowledge base used for the latest extraction.
    pub fn kb_version(&self) -> Option<u64> {
        self.kb_version
    }

    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }

    /// Drops the current requirement and waits for a new one. Memory and
    /// queued samples are kept.
    pub fn start_new_requirement(&mut self) {
        self.state = SessionState::AwaitingRequirement;
        self.current = None;
    }

    /// Ends the session, handing its queued samples to the learning pipeline.
    pub fn close_session(self) -> Vec<LearnedSample> {
        self.pending_learned
    }

    pub fn transcript_jsonl(&self) -> String {
        self.transcript.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }

    pub fn handle_message(&mut self, text: &str, kb: &KnowledgeBase) -> Result<Reply, DialogueError> {
        if self.state == SessionState::Finalized {
            return Err(DialogueError::Finalized);
        }
        if text.trim().is_empty() {
            return Err(DialogueError::EmptyMessage);
        }
        let reply = match self.state {
            SessionState::AwaitingRequirement => self.on_requirement(text, kb),
            SessionState::AwaitingClarification { slot } => self.on_clarification(slot, text, kb),
            SessionState::AwaitingConfirmation => self.on_confirmation(text, kb),
            SessionState::Finalized => unreachable!(),
        };
        self.turn += 1;
        let state_after = reply.state_after.name().to_string();
        self.transcript.push(TranscriptEntry {
            turn: self.turn,
            speaker: Speaker::User,
            text: text.to_string(),
            state_after: state_after.clone(),
        });
        self.transcript.push(TranscriptEntry { turn: self.turn, speaker: Speaker::System, text: reply.text.clone(), state_after });
        Ok(reply)
    }

    fn reply(&mut self, text: String, state: SessionState) -> Reply {
        self.state = state;
        Reply { text, frame_view: self.current.as_ref().map(|(_, f)| f.clone()), spec_view: None, state_after: state }
    }

    /// Moves to the next missing slot, or to confirmation.
    fn advance(&mut self, lead: &str) -> Reply {
        let frame = &self.current.as_ref().expect("a requirement is in progress").1;
        match frame.next_missing() {
            Some(slot) => {
                let text = format!("{lead}{}", ask_for(slot));
                self.reply(text, SessionState::AwaitingClarification { slot })
            }
            None => {
                let text = format!("{lead}Here is what I extracted:\n{}\n{CONFIRM_PROMPT}", describe_frame(frame));
                self.reply(text, SessionState::AwaitingConfirmation)
            }
        }
    }

    fn on_requirement(&mut self, text: &str, kb: &KnowledgeBase) -> Reply {
        if is_affirmative(text) || parse_correction(text).is_some() {
            return self.reply(
                "There is no requirement to confirm or correct yet. Please type a requirement.".into(),
                SessionState::AwaitingRequirement,
            );
        }
        let req = match Requirement::interactive(text) {
            Ok(r) => r,
            Err(TextError::EmptyInput) => unreachable!("blank messages are rejected earlier"),
        };
        let key = normalize(text);
        if let Some(stored) = self.memory.get(&key) {
            self.current = Some((req, stored.clone()));
            return self.advance("I have seen this requirement earlier in this session and reused the stored keywords.\n");
        }
        self.kb_version = Some(kb.version());
        let (frame, _) = match extract_frame(&req, kb) {
            Ok(x) => x,
            Err(TextError::EmptyInput) => unreachable!("blank messages are rejected earlier"),
        };
        self.current = Some((req, frame));
        self.advance("")
    }

    /// Applies a clarification or correction, queues it for learning and
    /// stores the frame in memory. `Err` carries the re-ask text.
    fn update(&mut self, kind: SlotKind, value: &str, provenance: Provenance, kb: &KnowledgeBase) -> Result<(), String> {
        let (req, frame) = self.current.as_mut().expect("a requirement is in progress");
        let stored = apply_value(frame, kind, value, provenance, kb)?;
        self.pending_learned.push(LearnedSample::pending(req.raw_text.clone(), kind, stored, self.user.clone()));
        self.memory.insert(normalize(&req.raw_text), frame.clone());
        Ok(())
    }

    fn on_clarification(&mut self, slot: SlotKind, text: &str, kb: &KnowledgeBase) -> Reply {
        let (kind, value, provenance) = match parse_correction(text) {
            Some((kind, value)) => (kind, value, Provenance::Corrected),
            None => (slot, text.trim().to_string(), Provenance::Clarified),
        };
        match self.update(kind, &value, provenance, kb) {
            Ok(()) => self.advance(""),
            Err(why) => {
                let text = format!("{why}\n{}", ask_for(slot));
                self.reply(text, self.state)
            }
        }
    }

    fn on_confirmation(&mut self, text: &str, kb: &KnowledgeBase) -> Reply {
        if is_affirmative(text) {
            return self.finalize();
        }
        match parse_correction(text) {
            Some((kind, value)) => match self.update(kind, &value, Provenance::Corrected, kb) {
                Ok(()) => self.advance(&format!("Updated the {kind}.\n")),
                Err(why) => self.reply(format!("{why}\n{CONFIRM_PROMPT}"), SessionState::AwaitingConfirmation),
            },
            None => self.reply(CONFIRM_PROMPT.into(), SessionState::AwaitingConfirmation),
        }
    }

    fn finalize(&mut self) -> Reply {
        let (req, frame) = self.current.as_ref().expect("a requirement is in progress");
        let formula = build_formula(frame).expect("frames awaiting confirmation are complete");
        let formal = render_formal(&formula);
        let friendly = render_friendly(frame).expect("frames awaiting confirmation are complete");
        self.outputs.push(OutputRecord {
            requirement: req.raw_text.clone(),
            frame: frame.clone(),
            formal: formal.clone(),
            friendly: friendly.clone(),
        });
        let mut reply = self.reply(format!("Confirmed. {friendly}\nFormal specification: {formal}"), SessionState::Finalized);
        reply.spec_view = Some(SpecView { formal, friendly });
        reply
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const R1: &str = "The indoor concentrations of carbon monoxide should be no more than 7 mg/m3 in any 24 hours period in all the buildings.";
    const IVC: &str = "In all the buildings, during weekdays from 2pm to 5pm, the average concentration of tetrachloroethylene should be no more than 0.25 mg/m3.";

    #[test]
    fn corrections() {
        assert_eq!(parse_correction("location all the buildings"), Some((SlotKind::Location, "all the buildings".into())));
        assert_eq!(parse_correction("yes"), None);
        assert_eq!(
            parse_correction("time weekdays from 2pm to 5pm"),
            Some((SlotKind::Time, "weekdays from 2pm to 5pm".into()))
        );
        assert_eq!(parse_correction("Description PM2.5"), Some((SlotKind::Quantifier, "PM2.5".into())));
        assert_eq!(parse_correction("location   "), None);
        assert_eq!(parse_correction("locations everywhere"), None);
    }

    #[test]
    fn open_sessions() {
        let a = Session::open("u");
        let b = Session::open("u");
        assert_eq!(a.state(), SessionState::AwaitingRequirement);
        assert_ne!(a.id(), b.id());
    }

    #[test]
    fn yes_without_requirement() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        let r = s.handle_message("yes", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingRequirement);
        assert!(r.spec_view.is_none());
        assert!(r.text.contains("type a requirement"));
    }

    #[test]
    fn confirm_flow() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        let r = s.handle_message(R1, &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingConfirmation);
        assert!(r.spec_view.is_none());
        let r = s.handle_message("maybe", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingConfirmation);
        let r = s.handle_message("Yes", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::Finalized);
        assert_eq!(
            r.spec_view.unwrap().formal,
            "G[0,86400] (indoor_concentrations{carbon_monoxide}@buildings <= 7 mg/m3)"
        );
        assert_eq!(s.outputs().len(), 1);
        assert_eq!(s.handle_message("yes", &kb), Err(DialogueError::Finalized));
        assert_eq!(s.transcript().len(), 6);
    }

    #[test]
    fn empty_message() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        assert_eq!(s.handle_message("   ", &kb), Err(DialogueError::EmptyMessage));
        assert!(s.transcript().is_empty());
    }

    #[test]
    fn invalid_time_is_reasked() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        let r = s.handle_message(IVC, &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingClarification { slot: SlotKind::Time });
        let before = s.current().cloned();
        let r = s.handle_message("purple elephants", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingClarification { slot: SlotKind::Time });
        assert_eq!(s.current().cloned(), before);
        assert!(s.pending_learned().is_empty());
    }

    #[test]
    fn correction_while_clarifying() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        s.handle_message(IVC, &kb).unwrap();
        let r = s.handle_message("location all the buildings", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingClarification { slot: SlotKind::Time });
        assert_eq!(r.frame_view.unwrap().location.unwrap().text, "all the buildings");
        let r = s.handle_message("time weekdays from 2pm to 5pm", &kb).unwrap();
        assert_eq!(r.state_after, SessionState::AwaitingConfirmation);
        let r = s.handle_message("ok", &kb).unwrap();
        assert_eq!(
            r.spec_view.unwrap().formal,
            "G (in_window(Mon-Fri,50400,61200) -> (average_concentration{tetrachloroethylene}@all_the_buildings <= 0.25 mg/m3))"
        );
        let samples = s.close_session();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].slot_kind, SlotKind::Location);
    }

    #[test]
    fn condition_correction_keeps_cue_out_of_text() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        s.handle_message(R1, &kb).unwrap();
        let r = s.handle_message("condition at least 3 ppm", &kb).unwrap();
        let c = r.frame_view.unwrap().condition.unwrap();
        assert_eq!(c.value.text, "3 ppm");
        assert_eq!(c.comparison.unwrap().op, CmpOp::Ge);
        assert_eq!(s.pending_learned()[0].clarified_value, "3 ppm");
    }

    #[test]
    fn correction_idempotent() {
        let kb = KnowledgeBase::seed();
        let mut a = Session::open("u");
        a.handle_message(R1, &kb).unwrap();
        let once = a.handle_message("location all the buildings", &kb).unwrap().frame_view;
        let twice = a.handle_message("location all the buildings", &kb).unwrap().frame_view;
        assert_eq!(once, twice);
    }

    #[test]
    fn transcript_export() {
        let kb = KnowledgeBase::seed();
        let mut s = Session::open("u");
        s.handle_message(R1, &kb).unwrap();
        let lines: Vec<serde_json::Value> =
            s.transcript_jsonl().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["speaker"], "user");
        assert_eq!(lines[1]["state_after"], "awaiting_confirmation");
        assert_eq!(lines[1]["turn"], 1);
    }

    fn message() -> impl Strategy<Value = String> {
        prop_oneof![
            Just(R1.to_string()),
            Just(IVC.to_string()),
            Just("hello world".to_string()),
            Just("yes".to_string()),
            Just("Y".to_string()),
            Just("ok!".to_string()),
            Just("no".to_string()),
            Just("location all the buildings".to_string()),
            Just("time weekdays from 2pm to 5pm".to_string()),
            Just("time whenever".to_string()),
            Just("condition 5 ppm".to_string()),
            Just("weekdays from 2pm to 5pm".to_string()),
            Just("entity noise".to_string()),
            Just("everywhere".to_string()),
            Just("".to_string()),
            Just("__new__".to_string()),
            "[a-z ]{0,12}",
        ]
    }

    proptest! {
        #[test]
        fn spec_only_after_affirmative_confirmation(msgs in prop::collection::vec(message(), 1..25)) {
            let kb = KnowledgeBase::seed();
            let mut s = Session::open("u");
            for m in msgs {
                if m == "__new__" {
                    s.start_new_requirement();
                    continue;
                }
                let before = s.state();
                let Ok(r) = s.handle_message(&m, &kb) else { continue };
                prop_assert_eq!(r.spec_view.is_some(), r.state_after == SessionState::Finalized);
                if r.spec_view.is_some() {
                    prop_assert_eq!(before, SessionState::AwaitingConfirmation);
                    prop_assert!(is_affirmative(&m));
                }
            }
        }
    }
}
