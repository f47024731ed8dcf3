//! Grid world: scenario loading and validation, robot bodies, movement
//! conflicts, sensing, per-tick digests and map snapshots.

mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::language::Detection;

pub use scenario::{HumanSpec, LocationSpec, MemorySpec, ObjectSpec, Options, RobotSpec, Scenario, ZoneSpec};

pub type Pos = (i32, i32);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("scenario parse error: {0}")]
    Toml(String),
    #[error("scenario invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Wall,
    Floor,
    Elevated,
    Under,
}

impl Cell {
    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '#' => Cell::Wall,
            '.' => Cell::Floor,
            '=' => Cell::Elevated,
            '_' => Cell::Under,
            _ => return None,
        })
    }
}

/// a: open floor, b: elevated surface, c: under furniture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneType {
    A,
    B,
    C,
}

impl ZoneType {
    pub fn cell(self) -> Cell {
        match self {
            ZoneType::A => Cell::Floor,
            ZoneType::B => Cell::Elevated,
            ZoneType::C => Cell::Under,
        }
    }
}

impl fmt::Display for ZoneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoneType::A => "a",
            ZoneType::B => "b",
            ZoneType::C => "c",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotClass {
    Ugv,
    Drone,
}

impl RobotClass {
    pub fn passable(self, cell: Cell) -> bool {
        matches!(
            (self, cell),
            (_, Cell::Floor) | (RobotClass::Ugv, Cell::Under) | (RobotClass::Drone, Cell::Elevated)
        )
    }

    pub fn can_search(self, t: ZoneType) -> bool {
        self.passable(t.cell())
    }

    /// Zone types whose contents this class can perceive.
    pub fn sees(self, t: ZoneType) -> bool {
        self.can_search(t)
    }

    pub fn concept(self) -> &'static str {
        match self {
            RobotClass::Ugv => "UGV",
            RobotClass::Drone => "DRONE",
        }
    }

    /// Command handlers this class supports.
    pub fn capabilities(self) -> &'static [&'static str] {
        match self {
            RobotClass::Ugv => &["goto", "search", "pick"],
            RobotClass::Drone => &["goto", "search", "scan"],
        }
    }
}

impl fmt::Display for RobotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobotClass::Ugv => "ugv",
            RobotClass::Drone => "drone",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub id: String,
    pub class: RobotClass,
    pub pose: Pos,
    pub base: Pos,
    pub carrying: Option<String>,
    /// Set when the last requested move was rejected.
    pub blocked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thing {
    pub id: String,
    pub concept: String,
    pub cell: Pos,
    pub features: BTreeMap<String, String>,
    pub holder: Option<String>,
}

/// One tick of low-level output from a robot's controller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Actuation {
    Wait,
    Move(Pos),
    Pick(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    pub moved: Vec<String>,
    /// Robots whose request was rejected.
    pub flagged: Vec<String>,
    pub picked: Vec<(String, String)>,
}

pub const DIRS: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

pub fn dir_name(from: Pos, to: Pos) -> &'static str {
    match (to.0 - from.0, to.1 - from.1) {
        (0, -1) => "N",
        (1, 0) => "E",
        (0, 1) => "S",
        (-1, 0) => "W",
        _ => "?",
    }
}

pub fn manhattan(a: Pos, b: Pos) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

pub struct World {
    pub scenario: Scenario,
    pub tick: u64,
    pub bodies: Vec<Body>,
    pub things: Vec<Thing>,
    rng: ChaCha8Rng,
    seed: u64,
    zone_of: BTreeMap<Pos, usize>,
}

impl World {
    /// Builds the world from a validated scenario.
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self, WorldError> {
        scenario.validate()?;
        let mut bodies: Vec<Body> = scenario
            .robots
            .iter()
            .map(|r| Body {
                id: r.id.clone(),
                class: r.class,
                pose: (r.base[0], r.base[1]),
                base: (r.base[0], r.base[1]),
                carrying: None,
                blocked: false,
            })
            .collect();
        bodies.sort_by(|a, b| a.id.cmp(&b.id));
        let things = scenario
            .objects
            .iter()
            .map(|o| Thing {
                id: o.id.clone(),
                concept: o.concept.clone(),
                cell: (o.cell[0], o.cell[1]),
                features: o.features.clone(),
                holder: None,
            })
            .collect();
        let mut zone_of = BTreeMap::new();
        for (i, z) in scenario.zones.iter().enumerate() {
            for c in z.cell_list() {
                zone_of.insert(c, i);
            }
        }
        Ok(World {
            scenario,
            tick: 0,
            bodies,
            things,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            zone_of,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Picks the team leader: fixed by the scenario, or drawn from the RNG.
    pub fn choose_leader(&mut self) -> String {
        if self.scenario.leader != "random" {
            return self.scenario.leader.clone();
        }
        let i = self.rng.gen_range(0..self.bodies.len());
        self.bodies[i].id.clone()
    }

    pub fn body(&self, id: &str) -> Option<&Body> {
        self.bodies.iter().find(|b| b.id == id)
    }

    pub fn cell(&self, p: Pos) -> Option<Cell> {
        self.scenario.cell(p)
    }

    pub fn zone(&self, id: &str) -> Option<&ZoneSpec> {
        self.scenario.zones.iter().find(|z| z.id == id)
    }

    pub fn zone_at(&self, p: Pos) -> Option<&ZoneSpec> {
        self.zone_of.get(&p).map(|i| &self.scenario.zones[*i])
    }

    pub fn passable(&self, class: RobotClass, p: Pos) -> bool {
        self.cell(p).is_some_and(|c| class.passable(c))
    }

    /// Cells occupied by robots other than `except`.
    pub fn occupied(&self, except: &str) -> BTreeSet<Pos> {
        self.bodies
            .iter()
            .filter(|b| b.id != except)
            .map(|b| b.pose)
            .collect()
    }

    /// First step of a shortest path (neighbors tried N, E, S, W), or `None`
    /// when `to` is unreachable. `Some(from)` when already there.
    pub fn next_step(&self, class: RobotClass, from: Pos, to: Pos, avoid: &BTreeSet<Pos>) -> Option<Pos> {
        if from == to {
            return Some(from);
        }
        let mut prev: BTreeMap<Pos, Pos> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(p) = queue.pop_front() {
            for (dx, dy) in DIRS {
                let n = (p.0 + dx, p.1 + dy);
                if prev.contains_key(&n) || !self.passable(class, n) || (avoid.contains(&n) && n != to) {
                    continue;
                }
                prev.insert(n, p);
                if n == to {
                    let mut cur = n;
                    while prev[&cur] != from {
                        cur = prev[&cur];
                    }
                    return Some(cur);
                }
                queue.push_back(n);
            }
        }
        None
    }

    /// Applies one tick of actuation. Robots are resolved in id order, so the
    /// lower id wins a contested cell and the other is flagged.
    pub fn step(&mut self, acts: &BTreeMap<String, Actuation>) -> StepReport {
        let mut report = StepReport::default();
        let mut occupied: BTreeSet<Pos> = self.bodies.iter().map(|b| b.pose).collect();
        for i in 0..self.bodies.len() {
            let id = self.bodies[i].id.clone();
            self.bodies[i].blocked = false;
            match acts.get(&id) {
                Some(Actuation::Move(to)) => {
                    let b = &self.bodies[i];
                    let ok =
                        manhattan(b.pose, *to) == 1 && self.passable(b.class, *to) && !occupied.contains(to);
                    if ok {
                        occupied.remove(&b.pose);
                        occupied.insert(*to);
                        self.bodies[i].pose = *to;
                        report.moved.push(id);
                    } else {
                        self.bodies[i].blocked = true;
                        report.flagged.push(id);
                    }
                }
                Some(Actuation::Pick(obj)) => {
                    let pose = self.bodies[i].pose;
                    let free = self.bodies[i].carrying.is_none();
                    match self.things.iter_mut().find(|t| &t.id == obj) {
                        Some(t) if free && t.holder.is_none() && manhattan(t.cell, pose) <= 1 => {
                            t.holder = Some(id.clone());
                            self.bodies[i].carrying = Some(obj.clone());
                            report.picked.push((id, obj.clone()));
                        }
                        _ => {
                            self.bodies[i].blocked = true;
                            report.flagged.push(id);
                        }
                    }
                }
                Some(Actuation::Wait) | None => {}
            }
        }
        for b in &self.bodies {
            if let Some(obj) = &b.carrying {
                if let Some(t) = self.things.iter_mut().find(|t| &t.id == obj) {
                    t.cell = b.pose;
                }
            }
        }
        self.tick += 1;
        report
    }

    /// Objects within Manhattan distance 1 whose zone type the robot can see.
    pub fn sense(&self, robot: &str) -> Vec<Detection> {
        let Some(b) = self.body(robot) else {
            return Vec::new();
        };
        self.things
            .iter()
            .filter(|t| t.holder.is_none() && manhattan(t.cell, b.pose) <= 1)
            .filter_map(|t| {
                let z = self.zone_at(t.cell)?;
                b.class.sees(z.zone_type).then(|| Detection {
                    object_type: t.concept.clone(),
                    features: t.features.clone(),
                    cell: t.cell,
                    zone: Some(z.id.clone()),
                    confidence: 1.0,
                })
            })
            .collect()
    }

    fn canonical(&self) -> String {
        let mut s = format!(
            "tick={};seed={};rng={};",
            self.tick,
            self.seed,
            self.rng.get_word_pos()
        );
        for b in &self.bodies {
            s += &format!(
                "robot={}@{}:{}+{};",
                b.id,
                b.pose.0,
                b.pose.1,
                b.carrying.as_deref().unwrap_or("-")
            );
        }
        for t in &self.things {
            s += &format!(
                "object={}@{}:{}>{};",
                t.id,
                t.cell.0,
                t.cell.1,
                t.holder.as_deref().unwrap_or("-")
            );
        }
        s
    }

    /// SHA-256 over the canonical state, including RNG position.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Grid, zone overlay and robot poses for the UI.
    pub fn map_snapshot(&self) -> serde_json::Value {
        let zones: Vec<_> = self
            .scenario
            .zones
            .iter()
            .map(|z| {
                serde_json::json!({
                    "id": z.id,
                    "label": z.label,
                    "type": z.zone_type.to_string(),
                    "cells": z.cells,
                    "waypoints": z.waypoints,
                })
            })
            .collect();
        let robots: Vec<_> = self
            .bodies
            .iter()
            .map(|b| {
                serde_json::json!({
                    "id": b.id,
                    "class": b.class.to_string(),
                    "pose": [b.pose.0, b.pose.1],
                    "blocked": b.blocked,
                })
            })
            .collect();
        serde_json::json!({
            "tick": self.tick,
            "width": self.scenario.width(),
            "height": self.scenario.height(),
            "grid": self.scenario.grid,
            "zones": zones,
            "robots": robots,
        })
    }
}

#[cfg(test)]
mod tests;
