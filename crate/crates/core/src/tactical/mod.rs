//! Tactical layer: per-robot command intake, behavior-tree handlers that turn
//! commands into actuation, and sensing frames for the strategic layer.

mod handlers;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bt::{self, BbValue, Blackboard, BtError, BtNode};
use crate::language::Detection;
use crate::world::{Actuation, Pos, RobotClass, World};

pub const BATTERY_LOW: f64 = 20.0;
/// Ticks a cell stays out of path planning after a collision there.
pub const AVOID_TICKS: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verb {
    #[serde(rename = "GOTO")]
    Goto,
    #[serde(rename = "SEARCH-ZONE")]
    SearchZone,
    #[serde(rename = "SCAN")]
    Scan,
    #[serde(rename = "PICK")]
    Pick,
    #[serde(rename = "STOP")]
    Stop,
}

impl Verb {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "GOTO" => Verb::Goto,
            "SEARCH-ZONE" => Verb::SearchZone,
            "SCAN" => Verb::Scan,
            "PICK" => Verb::Pick,
            "STOP" => Verb::Stop,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Goto => "GOTO",
            Verb::SearchZone => "SEARCH-ZONE",
            Verb::Scan => "SCAN",
            Verb::Pick => "PICK",
            Verb::Stop => "STOP",
        }
    }

    /// Behavior-tree handler id serving this verb.
    pub fn handler(self) -> Option<&'static str> {
        match self {
            Verb::Goto => Some("goto"),
            Verb::SearchZone => Some("search"),
            Verb::Scan => Some("scan"),
            Verb::Pick => Some("pick"),
            Verb::Stop => None,
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Verb::Goto => &["cell"],
            Verb::SearchZone => &["zone"],
            Verb::Pick => &["object"],
            Verb::Scan | Verb::Stop => &[],
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCommand {
    pub id: u64,
    pub verb: Verb,
    pub args: BTreeMap<String, String>,
    pub issued_at: u64,
}

impl ActionCommand {
    pub fn new(id: u64, verb: Verb, issued_at: u64) -> Self {
        ActionCommand {
            id,
            verb,
            args: BTreeMap::new(),
            issued_at,
        }
    }

    pub fn arg(mut self, k: &str, v: &str) -> Self {
        self.args.insert(k.to_string(), v.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum CommandStatus {
    Accepted,
    Running,
    Done,
    Failed(String),
}

impl CommandStatus {
    pub fn is_final(&self) -> bool {
        matches!(self, CommandStatus::Done | CommandStatus::Failed(_))
    }
}

impl fmt::Display for CommandStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandStatus::Accepted => f.write_str("accepted"),
            CommandStatus::Running => f.write_str("running"),
            CommandStatus::Done => f.write_str("done"),
            CommandStatus::Failed(r) => write!(f, "failed({r})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingFrame {
    pub robot: String,
    pub tick: u64,
    pub pose: Pos,
    /// `ZONE#index` when the pose is a waypoint.
    pub waypoint: Option<String>,
    pub in_transit: bool,
    pub detections: Vec<Detection>,
    pub status: BTreeMap<u64, CommandStatus>,
}

/// A dwell at a search waypoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub tick: u64,
    pub robot: String,
    pub zone: String,
    pub index: usize,
    pub cell: Pos,
}

/// Per-robot state manager: blackboard, command bookkeeping, tree and traces.
pub struct Tactical {
    pub robot: String,
    pub class: RobotClass,
    tree: BtNode,
    bb: Blackboard,
    statuses: BTreeMap<u64, CommandStatus>,
    changed: BTreeSet<u64>,
    active: BTreeMap<&'static str, u64>,
    avoid: BTreeMap<Pos, u64>,
    rng: ChaCha8Rng,
    last_action: String,
    pub visits: Vec<Visit>,
    pub bt_trace: Vec<String>,
    pub trace: Vec<String>,
}

impl Tactical {
    pub fn new(robot: &str, class: RobotClass, seed: u64, random_walk: bool, needs: bool) -> Self {
        let mut bb = Blackboard::new();
        bb.declare("battery", BbValue::Num(100.0));
        bb.declare("collision", BbValue::Flag(false));
        bb.set("random-walk", BbValue::Flag(random_walk));
        bb.set("needs-enabled", BbValue::Flag(needs));
        let salt = robot
            .bytes()
            .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        Tactical {
            robot: robot.to_string(),
            class,
            tree: bt::build_template(class.capabilities()),
            bb,
            statuses: BTreeMap::new(),
            changed: BTreeSet::new(),
            active: BTreeMap::new(),
            avoid: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ salt),
            last_action: "wait".into(),
            visits: Vec::new(),
            bt_trace: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn tree(&self) -> &BtNode {
        &self.tree
    }

    pub fn blackboard(&self) -> &Blackboard {
        &self.bb
    }

    pub fn status(&self, id: u64) -> Option<&CommandStatus> {
        self.statuses.get(&id)
    }

    fn set_status(&mut self, id: u64, s: CommandStatus) {
        self.statuses.insert(id, s);
        self.changed.insert(id);
    }

    fn clear(&mut self, handler: &str) {
        self.bb.set(&format!("pending-{handler}"), BbValue::Flag(false));
    }

    /// Accepts, preempts, cancels or rejects a command. Returns its status.
    pub fn ingest(&mut self, cmd: &ActionCommand) -> CommandStatus {
        if cmd.verb == Verb::Stop {
            let target: Option<u64> = cmd.args.get("command").and_then(|s| s.parse().ok());
            let victims: Vec<(&'static str, u64)> = self
                .active
                .iter()
                .filter(|(_, id)| target.is_none_or(|t| t == **id))
                .map(|(h, id)| (*h, *id))
                .collect();
            for (h, id) in victims {
                self.active.remove(h);
                self.clear(h);
                self.set_status(id, CommandStatus::Failed("stopped".into()));
            }
            self.set_status(cmd.id, CommandStatus::Done);
            return CommandStatus::Done;
        }
        let handler = cmd.verb.handler().expect("non-stop verb");
        if !self.class.capabilities().contains(&handler) {
            let s = CommandStatus::Failed("unsupported-verb".into());
            self.set_status(cmd.id, s.clone());
            return s;
        }
        if cmd.verb.required().iter().any(|k| !cmd.args.contains_key(*k)) {
            let s = CommandStatus::Failed("bad-arguments".into());
            self.set_status(cmd.id, s.clone());
            return s;
        }
        if let Some(old) = self.active.insert(handler, cmd.id) {
            self.set_status(old, CommandStatus::Failed("preempted".into()));
        }
        self.bb.set(&format!("pending-{handler}"), BbValue::Flag(true));
        self.bb.set(
            &format!("cmd-{handler}"),
            BbValue::Command(cmd.id, cmd.verb.as_str().to_string()),
        );
        for (k, v) in &cmd.args {
            self.bb.set(&format!("{handler}.{k}"), BbValue::Ref(v.clone()));
        }
        self.bb.set(&format!("{handler}.next"), BbValue::Num(0.0));
        self.bb.set(&format!("{handler}.issued"), BbValue::Flag(false));
        self.set_status(cmd.id, CommandStatus::Accepted);
        CommandStatus::Accepted
    }

    /// Runs one tree tick and returns the actuation for the world step.
    pub fn tick(&mut self, world: &World, tick: u64) -> Result<Actuation, BtError> {
        self.avoid.retain(|_, until| *until > tick);
        let body = world.body(&self.robot).expect("robot in world").clone();
        let occupied = world.occupied(&self.robot);
        let avoid: BTreeSet<Pos> = self.avoid.keys().copied().collect();

        // collision check against the next planned cell
        let blocked_cell = handlers::goal_cell(world, &body, &self.bb)
            .and_then(|g| world.next_step(body.class, body.pose, g, &avoid))
            .filter(|n| *n != body.pose && occupied.contains(n));
        match blocked_cell {
            Some(c) => {
                self.bb.set("collision", BbValue::Flag(true));
                self.bb.set("collision.cell", BbValue::Cell(c.0, c.1));
            }
            None if self.bb.flag("collision") => self.bb.set("collision", BbValue::Flag(false)),
            None => {}
        }

        let mut ctx = handlers::Ctx {
            world,
            body,
            tick,
            occupied,
            avoid,
            act: Actuation::Wait,
            label: "wait".into(),
            finished: Vec::new(),
            started: Vec::new(),
            visits: Vec::new(),
            rng: &mut self.rng,
        };
        let mut reg = handlers::registry();
        let (_, visits) = bt::tick(&self.tree, &mut self.bb, &mut reg, &mut ctx)?;
        drop(reg);
        for v in &visits {
            self.bt_trace.push(bt::trace_line(tick, &self.robot, v));
        }
        let handlers::Ctx {
            act,
            label,
            started,
            finished,
            visits: dwells,
            ..
        } = ctx;
        self.last_action = label;
        if let Some(c) = self
            .bb
            .cell("collision.cell")
            .filter(|_| self.bb.flag("collision"))
        {
            self.avoid.insert(c, tick + AVOID_TICKS);
        }
        self.visits.extend(dwells);
        for h in started {
            if let Some(id) = self.active.get(h).copied() {
                if self.statuses.get(&id) == Some(&CommandStatus::Accepted) {
                    self.set_status(id, CommandStatus::Running);
                }
            }
        }
        for (h, s) in finished {
            if let Some(id) = self.active.remove(h) {
                self.set_status(id, s);
            }
        }
        Ok(act)
    }

    /// Post-step sensing; also appends the tactical trace line.
    pub fn sense(&mut self, world: &World, tick: u64) -> SensingFrame {
        let body = world.body(&self.robot).expect("robot in world");
        let detections = world.sense(&self.robot);
        let waypoint = world.scenario.zones.iter().find_map(|z| {
            z.waypoints
                .iter()
                .position(|w| (w[0], w[1]) == body.pose)
                .map(|i| format!("{}#{i}", z.id))
        });
        let dets: Vec<String> = detections
            .iter()
            .map(|d| format!("{}@{}:{}", d.object_type, d.cell.0, d.cell.1))
            .collect();
        self.trace.push(format!(
            "{tick},{},{}:{},{},{}",
            self.robot,
            body.pose.0,
            body.pose.1,
            self.last_action,
            dets.join("|")
        ));
        let mut status = BTreeMap::new();
        for id in std::mem::take(&mut self.changed) {
            status.insert(id, self.statuses[&id].clone());
        }
        for id in self.active.values() {
            status.entry(*id).or_insert_with(|| self.statuses[id].clone());
        }
        SensingFrame {
            robot: self.robot.clone(),
            tick,
            pose: body.pose,
            in_transit: waypoint.is_none(),
            waypoint,
            detections,
            status,
        }
    }
}

#[cfg(test)]
mod tests;
