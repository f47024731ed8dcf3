//! Ordered message bus shared by the team and the UI, and the transcript
//! wire format.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Addressee meaning every participant.
pub const TEAM: &str = "team";
/// Addressee and pseudo-participant for the console.
pub const UI: &str = "ui";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Chat,
    Thought,
    AgendaUpdate,
    Vmr,
    Tmr,
    Map,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Chat,
        Channel::Thought,
        Channel::AgendaUpdate,
        Channel::Vmr,
        Channel::Tmr,
        Channel::Map,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Chat => "chat",
            Channel::Thought => "thought",
            Channel::AgendaUpdate => "agenda-update",
            Channel::Vmr => "vmr",
            Channel::Tmr => "tmr",
            Channel::Map => "map",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Channel::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One bus message. Field order is the wire order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub tick: u64,
    pub channel: Channel,
    pub sender: String,
    pub addressee: String,
    pub surface: String,
    #[serde(rename = "attached-mr")]
    pub attached_mr: Option<serde_json::Value>,
}

impl Envelope {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommsError {
    #[error("unknown-sender: {0}")]
    UnknownSender(String),
    #[error("unknown-participant: {0}")]
    UnknownParticipant(String),
    #[error("transcript line {line}: {msg}")]
    Transcript { line: usize, msg: String },
}

/// A reader's position in the bus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subscription {
    pub participant: String,
    /// Next sequence number to read.
    pub cursor: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Bus {
    participants: BTreeSet<String>,
    log: Vec<Envelope>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: &str) {
        self.participants.insert(id.to_string());
    }

    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.participants.iter().map(String::as_str)
    }

    pub fn is_participant(&self, id: &str) -> bool {
        self.participants.contains(id)
    }

    /// Appends a message and returns its sequence number.
    pub fn post(
        &mut self,
        tick: u64,
        channel: Channel,
        sender: &str,
        addressee: &str,
        surface: &str,
        attached_mr: Option<serde_json::Value>,
    ) -> Result<u64, CommsError> {
        if !self.participants.contains(sender) {
            return Err(CommsError::UnknownSender(sender.to_string()));
        }
        if addressee != TEAM && addressee != UI && !self.participants.contains(addressee) {
            return Err(CommsError::UnknownParticipant(addressee.to_string()));
        }
        let seq = self.log.len() as u64;
        self.log.push(Envelope {
            seq,
            tick,
            channel,
            sender: sender.to_string(),
            addressee: addressee.to_string(),
            surface: surface.to_string(),
            attached_mr,
        });
        Ok(seq)
    }

    /// Whether `participant` receives `env`. The UI receives everything; team
    /// chat goes to everyone but the sender, direct chat to its addressee.
    pub fn delivers_to(env: &Envelope, participant: &str) -> bool {
        if participant == UI {
            return true;
        }
        env.channel == Channel::Chat
            && participant != env.sender
            && (env.addressee == TEAM || env.addressee == participant)
    }

    pub fn subscribe(&self, participant: &str, cursor: u64) -> Result<Subscription, CommsError> {
        if participant != UI && !self.participants.contains(participant) {
            return Err(CommsError::UnknownParticipant(participant.to_string()));
        }
        Ok(Subscription {
            participant: participant.to_string(),
            cursor,
        })
    }

    /// Messages for the subscriber since its cursor, in sequence order.
    pub fn poll(&self, sub: &mut Subscription) -> Vec<Envelope> {
        let start = (sub.cursor as usize).min(self.log.len());
        let out = self.log[start..]
            .iter()
            .filter(|e| Self::delivers_to(e, &sub.participant))
            .cloned()
            .collect();
        sub.cursor = self.log.len() as u64;
        out
    }

    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    pub fn len(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    /// One JSON envelope per line.
    pub fn transcript(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&e.to_line());
            s.push('\n');
        }
        s
    }
}

pub fn parse_transcript(src: &str) -> Result<Vec<Envelope>, CommsError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CommsError::Transcript {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus() -> Bus {
        let mut b = Bus::new();
        for p in ["HUMAN-1", "UGV-1", "DRONE-1"] {
            b.register(p);
        }
        b
    }

    #[test]
    fn routing_by_channel_and_addressee() {
        let mut b = bus();
        b.post(
            1,
            Channel::Chat,
            "HUMAN-1",
            TEAM,
            "Robots, please find my keys.",
            None,
        )
        .unwrap();
        b.post(2, Channel::Chat, "UGV-1", "DRONE-1", "go", None).unwrap();
        b.post(2, Channel::Thought, "UGV-1", UI, "tick 2: hm", None)
            .unwrap();
        let mut ugv = b.subscribe("UGV-1", 0).unwrap();
        let mut drone = b.subscribe("DRONE-1", 0).unwrap();
        let mut human = b.subscribe("HUMAN-1", 0).unwrap();
        let mut ui = b.subscribe(UI, 0).unwrap();
        assert_eq!(b.poll(&mut ugv).len(), 1);
        assert_eq!(b.poll(&mut drone).len(), 2);
        assert_eq!(b.poll(&mut human).len(), 0);
        assert_eq!(b.poll(&mut ui).len(), 3);
        assert!(b.poll(&mut ui).is_empty());
    }

    #[test]
    fn unknown_parties_rejected() {
        let mut b = bus();
        assert_eq!(
            b.post(0, Channel::Chat, "ROBOT-9", TEAM, "hi", None),
            Err(CommsError::UnknownSender("ROBOT-9".into()))
        );
        assert_eq!(
            b.post(0, Channel::Chat, "UGV-1", "ROBOT-9", "hi", None),
            Err(CommsError::UnknownParticipant("ROBOT-9".into()))
        );
        assert!(b.subscribe("ROBOT-9", 0).is_err());
        assert!(b.is_empty());
    }

    #[test]
    fn cursor_resumes_mid_log() {
        let mut b = bus();
        for i in 0..5 {
            b.post(i, Channel::Thought, "UGV-1", UI, &format!("t{i}"), None)
                .unwrap();
        }
        let mut s = b.subscribe(UI, 3).unwrap();
        let got: Vec<u64> = b.poll(&mut s).iter().map(|e| e.seq).collect();
        assert_eq!(got, [3, 4]);
    }

    #[test]
    fn transcript_field_order_and_round_trip() {
        let mut b = bus();
        b.post(
            1,
            Channel::Tmr,
            "UGV-1",
            UI,
            "",
            Some(serde_json::json!({"a": 1})),
        )
        .unwrap();
        let t = b.transcript();
        assert_eq!(
            t,
            "{\"seq\":0,\"tick\":1,\"channel\":\"tmr\",\"sender\":\"UGV-1\",\"addressee\":\"ui\",\"surface\":\"\",\"attached-mr\":{\"a\":1}}\n"
        );
        assert_eq!(parse_transcript(&t).unwrap(), b.log());
        assert!(matches!(
            parse_transcript("{}\n"),
            Err(CommsError::Transcript { line: 1, .. })
        ));
    }
}
