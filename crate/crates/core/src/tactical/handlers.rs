use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{CommandStatus, Visit};
use crate::bt::{BbValue, Blackboard, Handlers, TickStatus};
use crate::world::{dir_name, Actuation, Body, Pos, World, DIRS};

pub(super) struct Ctx<'w> {
    pub world: &'w World,
    pub body: Body,
    pub tick: u64,
    pub occupied: BTreeSet<Pos>,
    pub avoid: BTreeSet<Pos>,
    pub act: Actuation,
    pub label: String,
    pub started: Vec<&'static str>,
    pub finished: Vec<(&'static str, CommandStatus)>,
    pub visits: Vec<Visit>,
    pub rng: &'w mut ChaCha8Rng,
}

impl Ctx<'_> {
    /// Moves one step toward `goal`; `false` when it is unreachable.
    fn step_toward(&mut self, goal: Pos, verb: &str) -> bool {
        let w = self.world;
        let next = w
            .next_step(self.body.class, self.body.pose, goal, &self.avoid)
            .or_else(|| w.next_step(self.body.class, self.body.pose, goal, &BTreeSet::new()));
        match next {
            Some(n) if n == self.body.pose => {
                self.act = Actuation::Wait;
                self.label = "wait".into();
                true
            }
            Some(n) => {
                self.label = format!("{verb}:{}", dir_name(self.body.pose, n));
                self.act = Actuation::Move(n);
                true
            }
            None => false,
        }
    }

    fn finish(&mut self, bb: &mut Blackboard, h: &'static str, s: CommandStatus) -> TickStatus {
        bb.set(&format!("pending-{h}"), BbValue::Flag(false));
        let out = match s {
            CommandStatus::Failed(_) => TickStatus::Failure,
            _ => TickStatus::Success,
        };
        self.finished.push((h, s));
        out
    }
}

fn parse_cell(s: &str) -> Option<Pos> {
    let (x, y) = s.split_once(':')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

/// Cell the robot is heading for this tick, following subtree priority.
pub(super) fn goal_cell(world: &World, body: &Body, bb: &Blackboard) -> Option<Pos> {
    if bb.flag("pending-goto") {
        return bb.text("goto.cell").and_then(parse_cell);
    }
    if bb.flag("pending-search") {
        let zone = world.zone(bb.text("search.zone")?)?;
        let w = zone.waypoints.get(bb.num("search.next") as usize)?;
        return Some((w[0], w[1]));
    }
    if bb.flag("pending-pick") || bb.flag("pending-scan") || bb.flag("random-walk") {
        return None;
    }
    Some(body.base)
}

pub(super) fn registry<'w>() -> Handlers<Ctx<'w>> {
    let mut h = Handlers::new();
    h.register("avoid", avoid).expect("fresh registry");
    h.register("recharge", recharge).expect("fresh registry");
    h.register("goto", goto).expect("fresh registry");
    h.register("search", search).expect("fresh registry");
    h.register("scan", scan).expect("fresh registry");
    h.register("pick", pick).expect("fresh registry");
    h.register("random-walk", random_walk).expect("fresh registry");
    h.register("wait-at-base", wait_at_base).expect("fresh registry");
    h
}

fn avoid(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    let blocked = bb.cell("collision.cell");
    let pose = ctx.body.pose;
    for (dx, dy) in DIRS {
        let n = (pose.0 + dx, pose.1 + dy);
        if Some(n) != blocked && ctx.world.passable(ctx.body.class, n) && !ctx.occupied.contains(&n) {
            ctx.act = Actuation::Move(n);
            ctx.label = format!("sidestep:{}", dir_name(pose, n));
            return TickStatus::Success;
        }
    }
    ctx.act = Actuation::Wait;
    ctx.label = "yield".into();
    TickStatus::Running
}

fn recharge(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    if ctx.body.pose == ctx.body.base {
        bb.set("battery", BbValue::Num(100.0));
        ctx.label = "recharge".into();
        return TickStatus::Success;
    }
    ctx.step_toward(ctx.body.base, "recharge");
    TickStatus::Running
}

fn goto(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    ctx.started.push("goto");
    let Some(target) = bb.text("goto.cell").and_then(parse_cell) else {
        return ctx.finish(bb, "goto", CommandStatus::Failed("bad-arguments".into()));
    };
    if ctx.body.pose == target {
        return ctx.finish(bb, "goto", CommandStatus::Done);
    }
    if !ctx.step_toward(target, "move") {
        return ctx.finish(bb, "goto", CommandStatus::Failed("unreachable".into()));
    }
    TickStatus::Running
}

fn search(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    ctx.started.push("search");
    let zone_id = bb.text("search.zone").unwrap_or_default().to_string();
    let Some(zone) = ctx.world.zone(&zone_id) else {
        return ctx.finish(bb, "search", CommandStatus::Failed("unknown-zone".into()));
    };
    if !ctx.body.class.can_search(zone.zone_type) {
        return ctx.finish(bb, "search", CommandStatus::Failed("inaccessible".into()));
    }
    let next = bb.num("search.next") as usize;
    let Some(wp) = zone.waypoints.get(next).map(|w| (w[0], w[1])) else {
        return ctx.finish(bb, "search", CommandStatus::Done);
    };
    if ctx.body.pose == wp {
        ctx.act = Actuation::Wait;
        ctx.label = format!("dwell:{zone_id}:{next}");
        ctx.visits.push(Visit {
            tick: ctx.tick,
            robot: ctx.body.id.clone(),
            zone: zone_id.clone(),
            index: next,
            cell: wp,
        });
        bb.set("search.next", BbValue::Num((next + 1) as f64));
        if next + 1 >= zone.waypoints.len() {
            return ctx.finish(bb, "search", CommandStatus::Done);
        }
        return TickStatus::Running;
    }
    if !ctx.step_toward(wp, "move") {
        return ctx.finish(bb, "search", CommandStatus::Failed("unreachable".into()));
    }
    TickStatus::Running
}

fn scan(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    ctx.started.push("scan");
    if bb.flag("scan.issued") {
        return ctx.finish(bb, "scan", CommandStatus::Done);
    }
    bb.set("scan.issued", BbValue::Flag(true));
    ctx.act = Actuation::Wait;
    ctx.label = "scan".into();
    TickStatus::Running
}

fn pick(ctx: &mut Ctx, bb: &mut Blackboard) -> TickStatus {
    ctx.started.push("pick");
    let obj = bb.text("pick.object").unwrap_or_default().to_string();
    if bb.flag("pick.issued") {
        let s = if ctx.body.carrying.as_deref() == Some(obj.as_str()) {
            CommandStatus::Done
        } else {
            CommandStatus::Failed("pick-failed".into())
        };
        return ctx.finish(bb, "pick", s);
    }
    bb.set("pick.issued", BbValue::Flag(true));
    ctx.act = Actuation::Pick(obj);
    ctx.label = "pick".into();
    TickStatus::Running
}

fn random_walk(ctx: &mut Ctx, _: &mut Blackboard) -> TickStatus {
    let pose = ctx.body.pose;
    let free: Vec<Pos> = DIRS
        .iter()
        .map(|(dx, dy)| (pose.0 + dx, pose.1 + dy))
        .filter(|n| ctx.world.passable(ctx.body.class, *n) && !ctx.occupied.contains(n))
        .collect();
    if free.is_empty() {
        ctx.label = "wait".into();
        return TickStatus::Running;
    }
    let n = free[ctx.rng.gen_range(0..free.len())];
    ctx.act = Actuation::Move(n);
    ctx.label = format!("walk:{}", dir_name(pose, n));
    TickStatus::Running
}

fn wait_at_base(ctx: &mut Ctx, _: &mut Blackboard) -> TickStatus {
    if ctx.body.pose != ctx.body.base {
        ctx.step_toward(ctx.body.base, "return");
    } else {
        ctx.act = Actuation::Wait;
        ctx.label = "wait".into();
    }
    TickStatus::Running
}
