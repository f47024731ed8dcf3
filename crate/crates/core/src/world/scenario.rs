use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Cell, RobotClass, WorldError, ZoneType};

/// Scenario file contents (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tick_limit: Option<u64>,
    /// A robot id, or `random` to draw the leader from the seeded RNG.
    #[serde(default = "random")]
    pub leader: String,
    pub grid: Vec<String>,
    pub location: LocationSpec,
    #[serde(default)]
    pub options: Options,
    pub zones: Vec<ZoneSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub robots: Vec<RobotSpec>,
    pub humans: Vec<HumanSpec>,
    /// Episodic memories seeded into every robot.
    #[serde(default)]
    pub memories: Vec<MemorySpec>,
}

fn random() -> String {
    "random".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LocationSpec {
    pub id: String,
    pub concept: String,
    pub label: String,
    #[serde(default)]
    pub search_constraint: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub random_walk: bool,
    #[serde(default)]
    pub needs: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ZoneSpec {
    pub id: String,
    pub concept: String,
    pub label: String,
    #[serde(rename = "type")]
    pub zone_type: ZoneType,
    /// Inclusive rectangles `[x0, y0, x1, y1]`.
    pub cells: Vec<[i32; 4]>,
    pub waypoints: Vec<[i32; 2]>,
}

impl ZoneSpec {
    pub fn contains(&self, (x, y): (i32, i32)) -> bool {
        self.cells
            .iter()
            .any(|[x0, y0, x1, y1]| x >= *x0 && x <= *x1 && y >= *y0 && y <= *y1)
    }

    pub fn cell_list(&self) -> Vec<(i32, i32)> {
        let mut out = BTreeSet::new();
        for [x0, y0, x1, y1] in &self.cells {
            for y in *y0..=*y1 {
                for x in *x0..=*x1 {
                    out.insert((x, y));
                }
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub concept: String,
    pub cell: [i32; 2],
    #[serde(default)]
    pub features: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RobotSpec {
    pub id: String,
    pub class: RobotClass,
    pub name: String,
    pub base: [i32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct HumanSpec {
    pub id: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MemorySpec {
    pub id: String,
    pub concept: String,
    #[serde(default)]
    pub owned_by: Option<String>,
}

impl Scenario {
    pub fn from_toml(src: &str) -> Result<Self, WorldError> {
        toml::from_str(src).map_err(|e| WorldError::Toml(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn width(&self) -> i32 {
        self.grid.first().map_or(0, |r| r.chars().count() as i32)
    }

    pub fn height(&self) -> i32 {
        self.grid.len() as i32
    }

    pub fn cell(&self, (x, y): (i32, i32)) -> Option<Cell> {
        if x < 0 || y < 0 {
            return None;
        }
        self.grid
            .get(y as usize)
            .and_then(|r| r.chars().nth(x as usize))
            .and_then(Cell::from_char)
    }

    pub fn zone_at(&self, cell: (i32, i32)) -> Option<&ZoneSpec> {
        self.zones.iter().find(|z| z.contains(cell))
    }

    /// All invariant violations; empty means the scenario is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let w = self.width();
        if self.grid.is_empty() || w == 0 {
            out.push("grid is empty".to_string());
            return out;
        }
        for (y, row) in self.grid.iter().enumerate() {
            if row.chars().count() as i32 != w {
                out.push(format!(
                    "grid row {y} has width {}, expected {w}",
                    row.chars().count()
                ));
            }
            for (x, c) in row.chars().enumerate() {
                if Cell::from_char(c).is_none() {
                    out.push(format!("grid cell {x}:{y} has unknown glyph {c:?}"));
                }
            }
        }
        let mut ids = BTreeSet::new();
        let all_ids = std::iter::once(self.location.id.as_str())
            .chain(self.zones.iter().map(|z| z.id.as_str()))
            .chain(self.objects.iter().map(|o| o.id.as_str()))
            .chain(self.robots.iter().map(|r| r.id.as_str()))
            .chain(self.humans.iter().map(|h| h.id.as_str()))
            .chain(self.memories.iter().map(|m| m.id.as_str()));
        for id in all_ids {
            if !ids.insert(id) {
                out.push(format!("duplicate id {id}"));
            }
        }
        let mut owner: BTreeMap<(i32, i32), &str> = BTreeMap::new();
        for z in &self.zones {
            for c in z.cell_list() {
                match self.cell(c) {
                    None => out.push(format!("zone {} cell {}:{} is off the grid", z.id, c.0, c.1)),
                    Some(k) if k != z.zone_type.cell() => out.push(format!(
                        "zone {} cell {}:{} is {:?}, type {} needs {:?}",
                        z.id,
                        c.0,
                        c.1,
                        k,
                        z.zone_type,
                        z.zone_type.cell()
                    )),
                    _ => {}
                }
                if let Some(other) = owner.insert(c, &z.id) {
                    out.push(format!("zones {other} and {} overlap at {}:{}", z.id, c.0, c.1));
                }
            }
            for [x, y] in &z.waypoints {
                if !z.contains((*x, *y)) {
                    out.push(format!("zone {} waypoint {x}:{y} is outside the zone", z.id));
                }
            }
        }
        for o in &self.objects {
            let c = (o.cell[0], o.cell[1]);
            if self.zone_at(c).is_none() {
                out.push(format!(
                    "object {} at {}:{} is not on a zone cell",
                    o.id, c.0, c.1
                ));
            }
        }
        let mut bases = BTreeSet::new();
        for r in &self.robots {
            let c = (r.base[0], r.base[1]);
            match self.cell(c) {
                Some(k) if r.class.passable(k) => {}
                _ => out.push(format!("robot {} base {}:{} is not passable", r.id, c.0, c.1)),
            }
            if !bases.insert(c) {
                out.push(format!("robot {} shares its base cell", r.id));
            }
        }
        if self.robots.is_empty() {
            out.push("scenario has no robots".to_string());
        }
        if self.humans.is_empty() {
            out.push("scenario has no human participant".to_string());
        }
        if self.leader != "random" && !self.robots.iter().any(|r| r.id == self.leader) {
            out.push(format!("leader {} is not a robot", self.leader));
        }
        for m in &self.memories {
            if let Some(o) = &m.owned_by {
                if !ids.contains(o.as_str()) {
                    out.push(format!("memory {} is owned by unknown {o}", m.id));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(WorldError::Invalid(v))
        }
    }
}
