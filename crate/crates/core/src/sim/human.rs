use thiserror::Error;

use crate::comms::{Channel, Envelope};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("human script line {line}: {msg}")]
pub struct ScriptError {
    pub line: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    /// Post at this tick (or as soon as earlier lines have fired).
    Tick(u64),
    /// Post once a message containing this text (case-insensitive) arrives.
    Await(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HumanLine {
    pub trigger: Trigger,
    /// Participant id, `team`, or `reply` (the sender of the awaited message).
    pub addressee: String,
    pub text: String,
}

/// Scripted human participant.
///
/// ```text
/// tick 1 team | Robots, please find my keys.
/// await "look like" reply | They have a red keychain.
/// ```
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HumanScript {
    pub lines: Vec<HumanLine>,
}

impl HumanScript {
    pub fn parse(src: &str) -> Result<Self, ScriptError> {
        let mut lines = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let err = |msg: &str| ScriptError {
                line,
                msg: msg.to_string(),
            };
            let (head, text) = t
                .split_once('|')
                .ok_or_else(|| err("missing `|` before the text"))?;
            let head = head.trim();
            let text = text.trim().to_string();
            if text.is_empty() {
                return Err(err("empty text"));
            }
            let (trigger, addressee) = if let Some(rest) = head.strip_prefix("tick ") {
                let mut it = rest.split_whitespace();
                let n = it
                    .next()
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| err("tick needs a number"))?;
                let a = it.next().ok_or_else(|| err("missing addressee"))?;
                (Trigger::Tick(n), a.to_string())
            } else if let Some(rest) = head.strip_prefix("await ") {
                let rest = rest.trim();
                let rest = rest
                    .strip_prefix('"')
                    .ok_or_else(|| err("await needs a quoted pattern"))?;
                let (pat, after) = rest.split_once('"').ok_or_else(|| err("unterminated pattern"))?;
                let a = after.trim();
                if a.is_empty() || a.contains(' ') {
                    return Err(err("missing addressee"));
                }
                (Trigger::Await(pat.to_lowercase()), a.to_string())
            } else {
                return Err(err("line must start with `tick` or `await`"));
            };
            lines.push(HumanLine {
                trigger,
                addressee,
                text,
            });
        }
        Ok(HumanScript { lines })
    }

    /// Script that replays the human chat of a transcript at the same ticks.
    pub fn from_transcript(envs: &[Envelope], human: &str) -> Self {
        HumanScript {
            lines: envs
                .iter()
                .filter(|e| e.channel == Channel::Chat && e.sender == human)
                .map(|e| HumanLine {
                    trigger: Trigger::Tick(e.tick),
                    addressee: e.addressee.clone(),
                    text: e.surface.clone(),
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            match &l.trigger {
                Trigger::Tick(n) => s += &format!("tick {n} {} | {}\n", l.addressee, l.text),
                Trigger::Await(p) => s += &format!("await \"{p}\" {} | {}\n", l.addressee, l.text),
            }
        }
        s
    }
}

/// Runs a [`HumanScript`] against delivered messages.
#[derive(Clone, Debug)]
pub struct HumanDriver {
    script: HumanScript,
    next: usize,
}

impl HumanDriver {
    pub fn new(script: HumanScript) -> Self {
        HumanDriver { script, next: 0 }
    }

    pub fn done(&self) -> bool {
        self.next >= self.script.lines.len()
    }

    /// Lines to post this tick as `(addressee, text)`. `inbox` holds the chat
    /// delivered to the human this tick; an await only sees messages that
    /// arrive after the preceding line fired.
    pub fn step(&mut self, tick: u64, inbox: &[Envelope]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut pos = 0;
        while let Some(line) = self.script.lines.get(self.next) {
            match &line.trigger {
                Trigger::Tick(n) if *n <= tick => {
                    out.push((line.addressee.clone(), line.text.clone()));
                }
                Trigger::Await(p) => {
                    let hit = inbox[pos..]
                        .iter()
                        .position(|e| e.surface.to_lowercase().contains(p.as_str()));
                    let Some(i) = hit else { break };
                    let env = &inbox[pos + i];
                    pos += i + 1;
                    let to = if line.addressee == "reply" {
                        env.sender.clone()
                    } else {
                        line.addressee.clone()
                    };
                    out.push((to, line.text.clone()));
                }
                _ => break,
            }
            self.next += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chat(sender: &str, surface: &str) -> Envelope {
        Envelope {
            seq: 0,
            tick: 0,
            channel: Channel::Chat,
            sender: sender.into(),
            addressee: "HUMAN-1".into(),
            surface: surface.into(),
            attached_mr: None,
        }
    }

    #[test]
    fn parse_and_render_round_trip() {
        let src = "# opening\ntick 1 team | Robots, please find my keys.\nawait \"look like\" reply | They have a red keychain.\n";
        let s = HumanScript::parse(src).unwrap();
        assert_eq!(s.lines.len(), 2);
        assert_eq!(HumanScript::parse(&s.render()).unwrap(), s);
        assert_eq!(HumanScript::parse("tick x team | hi").unwrap_err().line, 1);
        assert!(HumanScript::parse("say hi").is_err());
    }

    #[test]
    fn await_replies_to_sender() {
        let s = HumanScript::parse("tick 1 team | go\nawait \"look like\" reply | red\n").unwrap();
        let mut d = HumanDriver::new(s);
        assert!(d.step(0, &[]).is_empty());
        assert_eq!(d.step(1, &[]), [("team".to_string(), "go".to_string())]);
        assert!(d.step(2, &[chat("UGV-1", "unrelated")]).is_empty());
        let out = d.step(3, &[chat("UGV-1", "Danny, what do your keys LOOK LIKE?")]);
        assert_eq!(out, [("UGV-1".to_string(), "red".to_string())]);
        assert!(d.done());
    }
}
