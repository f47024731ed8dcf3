//! Tick loop tying the human script, strategic agents, tactical layers and
//! the world together, plus run reports and replay.

mod human;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{seed_knowledge, Agent, Outgoing};
use crate::assets;
use crate::bt::BtError;
use crate::comms::{parse_transcript, Bus, Channel, CommsError, Subscription, UI};
use crate::knowledge::{parse_ontology, KnowledgeBase, KnowledgeError};
use crate::language::{LanguageError, Lexicon};
use crate::plan::{PlanError, ScriptLibrary};
use crate::tactical::{SensingFrame, Tactical, Visit};
use crate::world::{Scenario, World, WorldError};

pub use human::{HumanDriver, HumanLine, HumanScript, ScriptError, Trigger};

pub const DEFAULT_TICK_LIMIT: u64 = 600;
/// Bus participant posting map snapshots.
pub const WORLD: &str = "WORLD";
/// The human's part in the shipped scenario.
pub const DEFAULT_HUMAN_SCRIPT: &str = assets::HUMAN_SCRIPT;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Comms(#[from] CommsError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error("{0}")]
    Setup(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Found,
    Exhausted,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Found => "found",
            Outcome::Exhausted => "exhausted",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Overrides the scenario tick limit.
    pub tick_limit: Option<u64>,
    pub human: HumanScript,
}

impl SimConfig {
    /// Shipped scenario and human script.
    pub fn shipped() -> Result<Self, SimError> {
        Ok(SimConfig {
            scenario: Scenario::from_toml(assets::SCENARIO)?,
            seed: None,
            tick_limit: None,
            human: HumanScript::parse(DEFAULT_HUMAN_SCRIPT)?,
        })
    }
}

/// Everything a finished (or stopped) run produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: Option<Outcome>,
    pub ticks: u64,
    pub seed: u64,
    pub leader: String,
    pub transcript: String,
    /// `tick,sha256` per tick.
    pub digests: Vec<String>,
    pub thoughts: Vec<String>,
    pub bt_trace: Vec<String>,
    pub tactical_trace: Vec<String>,
    pub visits: Vec<Visit>,
    pub kb_dumps: BTreeMap<String, String>,
}

impl RunReport {
    /// Writes the run artifacts into `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let lines = |v: &[String]| {
            let mut s = v.join("\n");
            if !s.is_empty() {
                s.push('\n');
            }
            s
        };
        std::fs::write(dir.join("transcript.jsonl"), &self.transcript)?;
        std::fs::write(dir.join("digests.txt"), lines(&self.digests))?;
        std::fs::write(dir.join("thoughts.txt"), lines(&self.thoughts))?;
        std::fs::write(
            dir.join("bt_trace.csv"),
            format!("tick,robot,leaf,status\n{}", lines(&self.bt_trace)),
        )?;
        std::fs::write(
            dir.join("tactical_trace.csv"),
            format!(
                "tick,robot,pose,action,detections\n{}",
                lines(&self.tactical_trace)
            ),
        )?;
        for (id, dump) in &self.kb_dumps {
            std::fs::write(dir.join(format!("kb_{id}.txt")), dump)?;
        }
        let summary = serde_json::json!({
            "outcome": self.outcome,
            "ticks": self.ticks,
            "seed": self.seed,
            "leader": self.leader,
            "visits": self.visits,
        });
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&summary).expect("json") + "\n",
        )?;
        Ok(())
    }

    /// Surfaces of chat messages, in order, as `sender>addressee: text`.
    pub fn chat(&self) -> Vec<String> {
        parse_transcript(&self.transcript)
            .unwrap_or_default()
            .into_iter()
            .filter(|e| e.channel == Channel::Chat)
            .map(|e| format!("{}>{}: {}", e.sender, e.addressee, e.surface))
            .collect()
    }
}

pub struct Sim {
    pub world: World,
    pub bus: Bus,
    pub agents: Vec<Agent>,
    pub tacticals: Vec<Tactical>,
    human_id: String,
    driver: HumanDriver,
    injected: Vec<(String, String)>,
    agent_subs: Vec<Subscription>,
    human_sub: Subscription,
    frames: BTreeMap<String, Vec<SensingFrame>>,
    tick_limit: u64,
    leader: String,
    digests: Vec<String>,
    thoughts: Vec<String>,
    outcome: Option<Outcome>,
}

impl Sim {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let seed = cfg.seed.unwrap_or(cfg.scenario.seed);
        let tick_limit = cfg
            .tick_limit
            .or(cfg.scenario.tick_limit)
            .unwrap_or(DEFAULT_TICK_LIMIT);
        let scenario = cfg.scenario.clone();
        let mut world = World::new(cfg.scenario, seed)?;
        let ontology = KnowledgeBase::with_ontology(&parse_ontology(assets::ONTOLOGY)?)?;
        let lex = Arc::new(Lexicon::parse(assets::LEXICON)?);
        let library = ScriptLibrary::parse(assets::SCRIPTS)?;
        let human_id = scenario.humans[0].id.clone();

        let mut bus = Bus::new();
        bus.register(WORLD);
        bus.register(&human_id);
        for r in &scenario.robots {
            bus.register(&r.id);
        }
        for l in &cfg.human.lines {
            let a = l.addressee.as_str();
            if a != "reply" && a != crate::comms::TEAM && !bus.is_participant(a) {
                return Err(CommsError::UnknownParticipant(a.to_string()).into());
            }
        }

        let leader = world.choose_leader();
        let mut robots: Vec<_> = scenario.robots.clone();
        robots.sort_by(|a, b| a.id.cmp(&b.id));
        let mut agents = Vec::new();
        let mut tacticals = Vec::new();
        let mut agent_subs = Vec::new();
        for r in &robots {
            let kb = seed_knowledge(&ontology, &scenario).map_err(SimError::Setup)?;
            agents.push(Agent::new(
                &r.id,
                r.class,
                kb,
                lex.clone(),
                library.clone(),
                &scenario,
                &leader,
            ));
            tacticals.push(Tactical::new(
                &r.id,
                r.class,
                seed,
                scenario.options.random_walk,
                scenario.options.needs,
            ));
            agent_subs.push(bus.subscribe(&r.id, 0)?);
        }
        let human_sub = bus.subscribe(&human_id, 0)?;
        let mut sim = Sim {
            world,
            bus,
            agents,
            tacticals,
            human_id,
            driver: HumanDriver::new(cfg.human),
            injected: Vec::new(),
            agent_subs,
            human_sub,
            frames: BTreeMap::new(),
            tick_limit,
            leader,
            digests: Vec::new(),
            thoughts: Vec::new(),
            outcome: None,
        };
        for i in 0..sim.agents.len() {
            sim.agents[i].announce_leader(0);
            let out = sim.agents[i].step_outbox();
            sim.publish(0, i, out)?;
        }
        sim.finish_tick(0)?;
        Ok(sim)
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn leader(&self) -> &str {
        &self.leader
    }

    pub fn human_id(&self) -> &str {
        &self.human_id
    }

    /// Queues a human chat line for the next tick barrier.
    pub fn inject(&mut self, addressee: &str, text: &str) -> Result<(), CommsError> {
        if addressee != crate::comms::TEAM && !self.bus.is_participant(addressee) {
            return Err(CommsError::UnknownParticipant(addressee.to_string()));
        }
        self.injected.push((addressee.to_string(), text.to_string()));
        Ok(())
    }

    fn publish(&mut self, tick: u64, agent: usize, posts: Vec<Outgoing>) -> Result<(), SimError> {
        let me = self.agents[agent].id().to_string();
        for p in posts {
            match p {
                Outgoing::Chat {
                    addressee,
                    surface,
                    meaning,
                } => {
                    let mr = serde_json::json!({ "meaning": meaning });
                    self.bus
                        .post(tick, Channel::Chat, &me, &addressee, &surface, Some(mr))?;
                }
                Outgoing::Thought(line) => {
                    self.thoughts.push(format!("{me} {line}"));
                    self.bus.post(tick, Channel::Thought, &me, UI, &line, None)?;
                }
                Outgoing::Tmr(v) => {
                    self.bus.post(tick, Channel::Tmr, &me, UI, "", Some(v))?;
                }
                Outgoing::Vmr(v) => {
                    self.bus.post(tick, Channel::Vmr, &me, UI, "", Some(v))?;
                }
                Outgoing::Agenda(v) => {
                    let n = v.as_array().map_or(0, Vec::len);
                    let surface = format!("{n} plan(s) on the agenda");
                    self.bus
                        .post(tick, Channel::AgendaUpdate, &me, UI, &surface, Some(v))?;
                }
            }
        }
        Ok(())
    }

    fn finish_tick(&mut self, tick: u64) -> Result<(), SimError> {
        self.digests.push(format!("{tick},{}", self.world.digest()));
        let map = self.world.map_snapshot();
        self.bus.post(tick, Channel::Map, WORLD, UI, "", Some(map))?;
        Ok(())
    }

    /// Advances one tick. Returns the outcome once the run is over.
    pub fn step(&mut self) -> Result<Option<Outcome>, SimError> {
        if self.outcome.is_some() {
            return Ok(self.outcome);
        }
        let t = self.world.tick + 1;

        // 1. deliver chat and last tick's sensing
        let mut inboxes = Vec::new();
        for sub in &mut self.agent_subs {
            inboxes.push(self.bus.poll(sub));
        }
        let human_inbox = self.bus.poll(&mut self.human_sub);

        // 2. human posts
        let mut lines = self.driver.step(t, &human_inbox);
        lines.append(&mut self.injected);
        for (to, text) in lines {
            let human = self.human_id.clone();
            self.bus.post(t, Channel::Chat, &human, &to, &text, None)?;
        }

        // 3. strategic cycles in id order
        let mut commands = Vec::new();
        for (i, inbox) in inboxes.iter().enumerate() {
            let id = self.agents[i].id().to_string();
            let frames = self.frames.remove(&id).unwrap_or_default();
            let out = self.agents[i].step(t, inbox, &frames);
            self.publish(t, i, out.posts)?;
            commands.push(out.commands);
        }

        // 4. command intake, 5. behavior trees
        let mut acts = BTreeMap::new();
        for (tac, cmds) in self.tacticals.iter_mut().zip(commands) {
            for c in &cmds {
                tac.ingest(c);
            }
            acts.insert(tac.robot.clone(), tac.tick(&self.world, t)?);
        }

        // 6. world, 7. sensing and digests
        self.world.step(&acts);
        for tac in &mut self.tacticals {
            let f = tac.sense(&self.world, t);
            self.frames.entry(tac.robot.clone()).or_default().push(f);
        }
        self.finish_tick(t)?;

        let robots_have_mail =
            self.bus.log().iter().rev().take_while(|e| e.tick == t).any(|e| {
                e.channel == Channel::Chat && self.agents.iter().any(|a| Bus::delivers_to(e, a.id()))
            });
        let started = self.agents.iter().any(Agent::started);
        let idle = self.agents.iter().all(|a| a.engine.is_idle());
        if started && idle && !robots_have_mail {
            self.outcome = Some(if self.agents.iter().any(Agent::knows_location) {
                Outcome::Found
            } else {
                Outcome::Exhausted
            });
        } else if t >= self.tick_limit {
            self.outcome = Some(Outcome::Timeout);
        }
        Ok(self.outcome)
    }

    pub fn run(mut self) -> Result<RunReport, SimError> {
        while self.step()?.is_none() {}
        Ok(self.report())
    }

    pub fn report(&self) -> RunReport {
        RunReport {
            outcome: self.outcome,
            ticks: self.world.tick,
            seed: self.world.seed(),
            leader: self.leader.clone(),
            transcript: self.bus.transcript(),
            digests: self.digests.clone(),
            thoughts: self.thoughts.clone(),
            bt_trace: self.tacticals.iter().flat_map(|t| t.bt_trace.clone()).collect(),
            tactical_trace: merge_by_tick(self.tacticals.iter().map(|t| &t.trace)),
            visits: {
                let mut v: Vec<Visit> = self.tacticals.iter().flat_map(|t| t.visits.clone()).collect();
                v.sort_by(|a, b| (a.tick, &a.robot).cmp(&(b.tick, &b.robot)));
                v
            },
            kb_dumps: self
                .agents
                .iter()
                .map(|a| (a.id().to_string(), a.mind.kb.dump()))
                .collect(),
        }
    }
}

fn merge_by_tick<'a>(traces: impl Iterator<Item = &'a Vec<String>>) -> Vec<String> {
    let mut all: Vec<(u64, usize, String)> = Vec::new();
    for (r, t) in traces.enumerate() {
        for l in t {
            let tick = l.split(',').next().and_then(|n| n.parse().ok()).unwrap_or(0);
            all.push((tick, r, l.clone()));
        }
    }
    all.sort_by_key(|(t, r, _)| (*t, *r));
    all.into_iter().map(|(_, _, l)| l).collect()
}

/// First divergence between a recorded run and its replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mismatch {
    Digest {
        tick: u64,
        expected: String,
        actual: String,
    },
    Transcript {
        line: usize,
        expected: String,
        actual: String,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Digest {
                tick,
                expected,
                actual,
            } => write!(
                f,
                "digest differs at tick {tick}: expected {expected}, got {actual}"
            ),
            Mismatch::Transcript {
                line,
                expected,
                actual,
            } => write!(
                f,
                "transcript differs at line {line}:\n  expected {expected}\n  actual   {actual}"
            ),
        }
    }
}

/// Re-runs a recorded session from its transcript and compares the digests
/// (when given) and then the transcript, byte for byte.
pub fn replay(
    scenario: Scenario,
    seed: Option<u64>,
    transcript: &str,
    digests: Option<&str>,
) -> Result<(RunReport, Option<Mismatch>), SimError> {
    let envs = parse_transcript(transcript)?;
    let human = scenario.humans.first().map(|h| h.id.clone()).unwrap_or_default();
    let last_tick = envs.last().map_or(0, |e| e.tick);
    let cfg = SimConfig {
        human: HumanScript::from_transcript(&envs, &human),
        tick_limit: Some(scenario.tick_limit.unwrap_or(DEFAULT_TICK_LIMIT).max(last_tick)),
        scenario,
        seed,
    };
    let report = Sim::new(cfg)?.run()?;
    if let Some(d) = digests {
        let expected: Vec<&str> = d.lines().filter(|l| !l.is_empty()).collect();
        for (i, exp) in expected.iter().enumerate() {
            let act = report.digests.get(i).map(String::as_str).unwrap_or("");
            if *exp != act {
                let tick = exp
                    .split(',')
                    .next()
                    .and_then(|t| t.parse().ok())
                    .unwrap_or(i as u64);
                return Ok((
                    report.clone(),
                    Some(Mismatch::Digest {
                        tick,
                        expected: exp.to_string(),
                        actual: act.to_string(),
                    }),
                ));
            }
        }
    }
    let mut exp = transcript.lines();
    let mut act = report.transcript.lines();
    let mut line = 0;
    loop {
        line += 1;
        match (exp.next(), act.next()) {
            (None, None) => return Ok((report, None)),
            (e, a) if e == a => continue,
            (e, a) => {
                let m = Mismatch::Transcript {
                    line,
                    expected: e.unwrap_or("<end>").to_string(),
                    actual: a.unwrap_or("<end>").to_string(),
                };
                return Ok((report, Some(m)));
            }
        }
    }
}
