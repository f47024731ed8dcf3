//! Closed-domain language understanding and generation.
//!
//! Understanding matches token templates with typed slots from a [`Lexicon`]
//! and resolves slot fillers against the situation model. Generation renders
//! a meaning through an addressee-class-specific template, so the same meaning
//! reads differently for a human and for a robot.

mod analyze;
mod generate;
mod lexicon;
mod thought;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{FrameId, KnowledgeBase, Value};

pub use analyze::analyze;
pub use generate::{addressee_class, generate, render_np};
pub use lexicon::{LexEntry, Lexicon, Noun, Pattern, PatternItem, SlotKind, Template, TemplatePart};
pub use thought::{render_thought, ThoughtEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeechAct {
    #[serde(rename = "REQUEST-ACTION")]
    RequestAction,
    #[serde(rename = "REQUEST-INFO")]
    RequestInfo,
    #[serde(rename = "INFORM")]
    Inform,
    #[serde(rename = "ACK")]
    Ack,
}

impl SpeechAct {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "REQUEST-ACTION" => SpeechAct::RequestAction,
            "REQUEST-INFO" => SpeechAct::RequestInfo,
            "INFORM" => SpeechAct::Inform,
            "ACK" => SpeechAct::Ack,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpeechAct::RequestAction => "REQUEST-ACTION",
            SpeechAct::RequestInfo => "REQUEST-INFO",
            SpeechAct::Inform => "INFORM",
            SpeechAct::Ack => "ACK",
        }
    }
}

impl fmt::Display for SpeechAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddresseeClass {
    Human,
    Robot,
}

/// A resolved or to-be-created slot filler.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filler {
    Value(Value),
    /// A referent the situation model does not hold yet.
    New {
        concept: String,
        owner: Option<FrameId>,
    },
}

/// Concept of the proposition of an utterance nothing in the lexicon matched.
pub const UNRESOLVED: &str = "UNRESOLVED";

/// Text meaning representation: a speech act over a proposition skeleton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tmr {
    pub speech_act: SpeechAct,
    pub concept: String,
    pub slots: BTreeMap<String, Vec<Filler>>,
    pub speaker: FrameId,
    pub addressee: FrameId,
    pub source: String,
    pub unresolved: bool,
}

impl Tmr {
    pub fn slot_values(&self, name: &str) -> Vec<&Value> {
        self.slots
            .get(name)
            .map(|fs| {
                fs.iter()
                    .filter_map(|f| match f {
                        Filler::Value(v) => Some(v),
                        Filler::New { .. } => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn slot_ref(&self, name: &str) -> Option<&FrameId> {
        self.slot_values(name).into_iter().find_map(Value::as_ref_id)
    }

    /// Meaning skeleton, if every filler is resolved.
    pub fn meaning(&self) -> Option<Meaning> {
        let mut slots = BTreeMap::new();
        for (k, fs) in &self.slots {
            let mut vals = Vec::new();
            for f in fs {
                match f {
                    Filler::Value(v) => vals.push(v.clone()),
                    Filler::New { .. } => return None,
                }
            }
            slots.insert(k.clone(), vals);
        }
        Some(Meaning {
            speech_act: self.speech_act,
            concept: self.concept.clone(),
            slots,
        })
    }

    /// Frame-graph export: a speech-act root over the proposition.
    pub fn export(&self) -> serde_json::Value {
        let slots: serde_json::Map<String, serde_json::Value> = self
            .slots
            .iter()
            .map(|(k, fs)| {
                let vals: Vec<serde_json::Value> = fs
                    .iter()
                    .map(|f| match f {
                        Filler::Value(v) => v.to_string().into(),
                        Filler::New { concept, .. } => format!("new {concept}").into(),
                    })
                    .collect();
                (k.clone(), serde_json::Value::Array(vals))
            })
            .collect();
        serde_json::json!({
            "speech-act": self.speech_act.as_str(),
            "speaker": self.speaker.as_str(),
            "addressee": self.addressee.as_str(),
            "proposition": { "concept": self.concept, "slots": slots },
            "source": self.source,
            "unresolved": self.unresolved,
        })
    }
}

/// What an agent wants to say, before surface realization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meaning {
    pub speech_act: SpeechAct,
    pub concept: String,
    pub slots: BTreeMap<String, Vec<Value>>,
}

impl Meaning {
    pub fn new(speech_act: SpeechAct, concept: &str) -> Self {
        Meaning {
            speech_act,
            concept: concept.to_string(),
            slots: BTreeMap::new(),
        }
    }

    pub fn with(mut self, slot: &str, value: Value) -> Self {
        self.slots.entry(slot.to_string()).or_default().push(value);
        self
    }

    pub fn with_all(mut self, slot: &str, values: Vec<Value>) -> Self {
        self.slots.insert(slot.to_string(), values);
        self
    }
}

/// One detected object inside a vision meaning representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object_type: String,
    pub features: BTreeMap<String, String>,
    pub cell: (i32, i32),
    pub zone: Option<String>,
    pub confidence: f64,
}

/// Vision meaning representation assembled from one sensing frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vmr {
    pub sensor: FrameId,
    pub sensed_at: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LanguageError {
    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },
    #[error("no {class:?} template for {act} {concept}")]
    MissingTemplate {
        act: SpeechAct,
        concept: String,
        class: AddresseeClass,
    },
    #[error("template for {act} {concept} needs slot {slot}")]
    MissingSlot {
        act: SpeechAct,
        concept: String,
        slot: String,
    },
}

/// Lowercases and splits on whitespace, keeping word-internal `-` and `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == ',' || c == ':' || c == ';')
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Display name of a participant (the capitalized `name` property, else its id).
pub fn display_name(kb: &KnowledgeBase, id: &FrameId) -> String {
    match kb.get(id).and_then(|f| f.first_sym("name")) {
        Some(n) => capitalize(n),
        None => id.to_string(),
    }
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_keeps_hyphens_and_possessives() {
        assert_eq!(
            tokenize("Danny's keys: entry-way, please!"),
            ["danny's", "keys", "entry-way", "please"]
        );
        assert_eq!(
            tokenize("Robots, please find my keys."),
            ["robots", "please", "find", "my", "keys"]
        );
    }
}
