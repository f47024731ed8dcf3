//! Live session control and the wire protocol spoken to console clients.
//!
//! Server to client, one JSON object per line (or per WebSocket text frame):
//! either a bus [`Envelope`], identical to a transcript line, or a [`Reply`],
//! which carries a `reply` key instead of `seq`. Client to server: one
//! [`ClientCommand`] per line, tagged by `op`.

mod server;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::{Channel, Envelope, TEAM};
use crate::sim::{Outcome, RunReport, Sim, SimConfig, SimError};

pub use server::{start, ServeConfig, ServerHandle};

/// Default bound on a client's outbound queue before map frames are shed.
pub const DEFAULT_QUEUE_CAP: usize = 256;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClientCommand {
    /// Replays the log from `from` and then streams live.
    Subscribe {
        #[serde(default)]
        from: u64,
    },
    /// A human chat line, admitted at the next tick barrier.
    Chat {
        #[serde(default = "team")]
        addressee: String,
        text: String,
    },
    Pause,
    Resume,
    /// Advances while paused.
    Step {
        #[serde(default = "one")]
        ticks: u64,
    },
    /// Restarts the run with another seed.
    Seed {
        seed: u64,
    },
    Status,
}

fn team() -> String {
    TEAM.to_string()
}

fn one() -> u64 {
    1
}

impl ClientCommand {
    pub fn parse(line: &str) -> Result<Self, String> {
        serde_json::from_str(line).map_err(|e| format!("bad command: {e}"))
    }

    pub fn op(&self) -> &'static str {
        match self {
            ClientCommand::Subscribe { .. } => "subscribe",
            ClientCommand::Chat { .. } => "chat",
            ClientCommand::Pause => "pause",
            ClientCommand::Resume => "resume",
            ClientCommand::Step { .. } => "step",
            ClientCommand::Seed { .. } => "seed",
            ClientCommand::Status => "status",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reply", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reply {
    Ack {
        op: String,
    },
    Error {
        msg: String,
    },
    Status {
        tick: u64,
        seed: u64,
        leader: String,
        paused: bool,
        outcome: Option<Outcome>,
    },
    /// The run restarted; the log starts over at seq 0.
    Reset {
        seed: u64,
    },
}

impl Reply {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

/// Anything the server sends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Frame {
    Envelope(Envelope),
    Reply(Reply),
}

impl Frame {
    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Outbound buffer for one client. When full, the oldest map frame is
/// dropped; other frames are never dropped.
#[derive(Clone, Debug)]
pub struct ClientQueue {
    cap: usize,
    items: VecDeque<(bool, String)>,
    dropped: u64,
}

impl ClientQueue {
    pub fn new(cap: usize) -> Self {
        ClientQueue {
            cap: cap.max(1),
            items: VecDeque::new(),
            dropped: 0,
        }
    }

    pub fn push_envelope(&mut self, env: &Envelope) {
        self.push(env.channel == Channel::Map, env.to_line());
    }

    pub fn push_reply(&mut self, reply: &Reply) {
        self.push(false, reply.to_line());
    }

    fn push(&mut self, droppable: bool, line: String) {
        if self.items.len() >= self.cap {
            if let Some(i) = self.items.iter().position(|(d, _)| *d) {
                self.items.remove(i);
                self.dropped += 1;
            }
        }
        self.items.push_back((droppable, line));
    }

    pub fn drain(&mut self) -> Vec<String> {
        self.items.drain(..).map(|(_, l)| l).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// A simulation driven by client commands instead of a fixed loop.
pub struct Session {
    cfg: SimConfig,
    sim: Sim,
    paused: bool,
}

impl Session {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let sim = Sim::new(cfg.clone())?;
        Ok(Session {
            cfg,
            sim,
            paused: false,
        })
    }

    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    pub fn log(&self) -> &[Envelope] {
        self.sim.bus.log()
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.sim.outcome()
    }

    pub fn status(&self) -> Reply {
        Reply::Status {
            tick: self.sim.tick(),
            seed: self.sim.world.seed(),
            leader: self.sim.leader().to_string(),
            paused: self.paused,
            outcome: self.sim.outcome(),
        }
    }

    pub fn report(&self) -> RunReport {
        self.sim.report()
    }

    /// Advances one tick unless paused or finished.
    pub fn tick(&mut self) -> Result<Option<Outcome>, SimError> {
        if self.paused {
            return Ok(self.sim.outcome());
        }
        self.sim.step()
    }

    /// Applies a control command. `Subscribe` concerns a single client and
    /// is answered by the server; here it is only acknowledged.
    pub fn apply(&mut self, cmd: &ClientCommand) -> Result<Reply, SimError> {
        let ack = Reply::Ack { op: cmd.op().into() };
        Ok(match cmd {
            ClientCommand::Subscribe { .. } => ack,
            ClientCommand::Status => self.status(),
            ClientCommand::Chat { addressee, text } => {
                if self.sim.outcome().is_some() {
                    Reply::Error {
                        msg: "run is over".into(),
                    }
                } else if text.trim().is_empty() {
                    Reply::Error {
                        msg: "empty text".into(),
                    }
                } else {
                    match self.sim.inject(addressee, text) {
                        Ok(()) => ack,
                        Err(e) => Reply::Error { msg: e.to_string() },
                    }
                }
            }
            ClientCommand::Pause => {
                self.paused = true;
                ack
            }
            ClientCommand::Resume => {
                self.paused = false;
                ack
            }
            ClientCommand::Step { ticks } => {
                if !self.paused {
                    return Ok(Reply::Error {
                        msg: "step needs a paused run".into(),
                    });
                }
                for _ in 0..*ticks {
                    if self.sim.step()?.is_some() {
                        break;
                    }
                }
                ack
            }
            ClientCommand::Seed { seed } => {
                let mut cfg = self.cfg.clone();
                cfg.seed = Some(*seed);
                self.sim = Sim::new(cfg.clone())?;
                self.cfg = cfg;
                Reply::Reset { seed: *seed }
            }
        })
    }
}

#[cfg(test)]
mod tests;
