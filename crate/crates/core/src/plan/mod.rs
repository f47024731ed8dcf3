//! Strategic executive: script library, agenda, prioritizer and the step
//! interpreter that advances plan instances one cognitive cycle at a time.
//!
//! Primitives that touch the world or the dialogue are delegated to a
//! [`Host`]; the engine itself only knows the plan-structure primitives
//! `*identify-candidate-plans`, `*select-plan` and the splice half of
//! `*adopt-plan`.

mod library;
mod script;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{FrameId, KnowledgeBase, KnowledgeError, QueryPattern, Value};
use crate::language::ThoughtEvent;

pub use library::{load_library, ScriptLibrary};
pub use script::{parse_scripts, Arg, Condition, Role, ScriptDef, Section, SetExpr, Step, StepKind};

pub const PRECONDITIONS: &str = "PRECONDITIONS";
pub const RUN_PLAN: &str = "RUN-PLAN";
/// Concept whose strict descendants count as a known object type.
const OBJECT_ROOT: &str = "PHYSICAL-OBJECT";
/// Upper bound on control transfers (spawn, child completion) within one cycle.
const MAX_TRANSFERS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("script line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate script @{name} ({role})")]
    Duplicate { name: String, role: Role },
    #[error("@{script} line {line}: RUN NEW target @{target} is not declared")]
    Dangling {
        script: String,
        target: String,
        line: usize,
    },
    #[error("no script @{concept} for role {role}")]
    NoScriptForRole { concept: String, role: Role },
    #[error("goal {0} already has an active plan")]
    DuplicateGoal(FrameId),
    #[error("@{script}: parameter #{param} is unbound")]
    UnboundParameter { script: String, param: String },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStatus {
    Pending,
    Active,
    Awaiting,
    /// An INTERRUPT WHEN fired; the plan resumes after the cancelled step.
    Interrupted,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub var: String,
    pub items: Vec<Value>,
    pub index: usize,
    /// Set by an interrupt: finish the current body, then leave the loop.
    pub stop: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pos {
    pub step: usize,
    pub iter: Option<Iteration>,
}

/// Section index plus a path of step positions, one per nested FOR body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    pub section: usize,
    pub path: Vec<Pos>,
}

impl Cursor {
    fn start() -> Self {
        Cursor {
            section: 0,
            path: vec![Pos { step: 0, iter: None }],
        }
    }

    fn top(&mut self) -> &mut Pos {
        self.path.last_mut().expect("cursor path is never empty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Wait {
    Child(FrameId),
    Async { handle: u64, prim: String },
    Condition(Condition),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsyncStatus {
    Pending,
    Succeeded,
    Failed(String),
    Cancelled,
}

/// A script instance on the agenda.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanInstance {
    pub id: FrameId,
    pub script: String,
    pub role: Role,
    /// Own copy of the script body; plan selection splices steps into it.
    pub sections: Vec<Section>,
    pub bindings: BTreeMap<String, Value>,
    pub cursor: Cursor,
    pub status: PlanStatus,
    pub wait: Option<Wait>,
    pub goal: FrameId,
    pub parent: Option<FrameId>,
    pub priority: i64,
    pub created_at: u64,
    /// Creation sequence number, the last tie-breaker.
    pub seq: u64,
    pub candidates: Vec<String>,
    pub selected: Option<String>,
    pub last_outcome: Option<AsyncStatus>,
    pub failure: Option<String>,
}

impl PlanInstance {
    pub fn section_name(&self) -> Option<&str> {
        self.sections.get(self.cursor.section).map(|s| s.name.as_str())
    }

    pub fn binding_ref(&self, var: &str) -> Option<&FrameId> {
        self.bindings.get(var).and_then(Value::as_ref_id)
    }

    fn runnable(&self) -> bool {
        self.wait.is_none()
            && matches!(
                self.status,
                PlanStatus::Pending | PlanStatus::Active | PlanStatus::Interrupted
            )
    }

    fn live(&self) -> bool {
        !matches!(self.status, PlanStatus::Done | PlanStatus::Failed)
    }

    /// Step list at cursor depth `depth`.
    fn steps_at(&self, depth: usize) -> &[Step] {
        let mut steps: &[Step] = &self.sections[self.cursor.section].steps;
        for pos in &self.cursor.path[..depth] {
            match &steps[pos.step] {
                Step::ForEach { body, .. } => steps = body,
                _ => unreachable!("cursor descends only into FOR bodies"),
            }
        }
        steps
    }

    fn current_step(&self) -> Option<&Step> {
        let depth = self.cursor.path.len() - 1;
        self.steps_at(depth).get(self.cursor.path[depth].step)
    }

    /// Interrupt conditions guarding the step under the cursor: those of every
    /// enclosing FOR body plus any directly following the step itself.
    fn interrupts_in_scope(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        let depth = self.cursor.path.len() - 1;
        for d in 1..=depth {
            for s in self.steps_at(d) {
                if let Step::InterruptWhen { cond, .. } = s {
                    out.push(cond.clone());
                }
            }
        }
        if depth == 0 {
            let steps = self.steps_at(0);
            for s in &steps[(self.cursor.path[0].step + 1).min(steps.len())..] {
                match s {
                    Step::InterruptWhen { cond, .. } => out.push(cond.clone()),
                    _ => break,
                }
            }
        }
        out
    }

    /// Marks the innermost loop to exit after its current body.
    fn stop_innermost_loop(&mut self) {
        let n = self.cursor.path.len();
        if n >= 2 {
            if let Some(it) = self.cursor.path[n - 2].iter.as_mut() {
                it.stop = true;
            }
        }
    }

    /// Agenda line: `PLAN-ID @SCRIPT [SECTION] status priority`.
    pub fn summary(&self) -> String {
        format!(
            "{} @{} [{}] {} p{}",
            self.id,
            self.script,
            self.section_name().unwrap_or("END"),
            status_str(self.status),
            self.priority
        )
    }
}

fn status_str(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Pending => "pending",
        PlanStatus::Active => "active",
        PlanStatus::Awaiting => "awaiting",
        PlanStatus::Interrupted => "interrupted",
        PlanStatus::Done => "done",
        PlanStatus::Failed => "failed",
    }
}

impl std::fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(status_str(*self))
    }
}

/// Agent-side services the interpreter calls out to.
pub trait Host {
    fn kb(&self) -> &KnowledgeBase;
    fn kb_mut(&mut self) -> &mut KnowledgeBase;
    /// Runs a synchronous primitive. `Ok(true)` means it emitted output and
    /// the plan should yield for this cycle.
    fn primitive(&mut self, plan: &PlanInstance, name: &str, args: &[Value]) -> Result<bool, String>;
    /// Starts an asynchronous primitive, returning a handle to poll.
    fn start_async(&mut self, plan: &PlanInstance, name: &str, args: &[Value]) -> Result<u64, String>;
    fn async_status(&self, handle: u64) -> AsyncStatus;
    fn cancel_async(&mut self, handle: u64);
    fn thought(&mut self, event: ThoughtEvent);
}

/// What one advance did, in order.
#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Primitive { name: String, emitted: bool },
    Spawn { child: FrameId, script: String },
    Command { prim: String, handle: u64 },
    Block(Wait),
    Interrupted { prim: String },
    Complete,
    Fail(String),
}

impl Effect {
    fn ends_advance(&self) -> bool {
        matches!(
            self,
            Effect::Primitive { emitted: true, .. }
                | Effect::Spawn { .. }
                | Effect::Command { .. }
                | Effect::Block(_)
                | Effect::Complete
                | Effect::Fail(_)
        )
    }
}

/// Whether a script condition holds in the current situation.
pub fn condition_holds(kb: &KnowledgeBase, bindings: &BTreeMap<String, Value>, cond: &Condition) -> bool {
    match cond {
        Condition::Known { var, prop } => {
            let Some(f) = bindings
                .get(var)
                .and_then(Value::as_ref_id)
                .and_then(|id| kb.get(id))
            else {
                return false;
            };
            match prop.as_str() {
                "TYPE" => f.concept != OBJECT_ROOT && kb.is_a(&f.concept, OBJECT_ROOT),
                "FEATURES" => !kb.features_of(&f.id).is_empty(),
                p => f.has(&p.to_ascii_lowercase()),
            }
        }
        Condition::Exists { concept, parent } => {
            kb.is_a(concept, parent)
                && kb
                    .query(&QueryPattern::concept(concept).in_space(kb.sm()))
                    .is_ok_and(|v| !v.is_empty())
        }
    }
}

/// Frames a set expression denotes, in stored order.
pub fn resolve_set(
    kb: &KnowledgeBase,
    bindings: &BTreeMap<String, Value>,
    set: &SetExpr,
) -> Result<Vec<Value>, String> {
    let id = bindings
        .get(&set.var)
        .and_then(Value::as_ref_id)
        .ok_or_else(|| format!("#{} is unbound", set.var))?;
    let f = kb.get(id).ok_or_else(|| format!("{set}: no frame {id}"))?;
    Ok(f.get(&set.prop.to_ascii_lowercase()).to_vec())
}

/// Request scripts the plan's PRECONDITIONS section would still spawn.
pub fn resolve_preconditions(plan: &PlanInstance, kb: &KnowledgeBase) -> Vec<String> {
    plan.sections
        .iter()
        .filter(|s| s.name == PRECONDITIONS)
        .flat_map(|s| &s.steps)
        .filter_map(|st| match st {
            Step::RunNew { script, unless, .. } => {
                let satisfied = unless
                    .as_ref()
                    .is_some_and(|c| condition_holds(kb, &plan.bindings, c));
                (!satisfied).then(|| script.clone())
            }
            _ => None,
        })
        .collect()
}

/// Agenda and prioritizer for one agent.
#[derive(Clone, Debug)]
pub struct Engine {
    pub library: ScriptLibrary,
    pub self_id: FrameId,
    agenda: Vec<PlanInstance>,
    finished: Vec<PlanInstance>,
    next_seq: u64,
    now: u64,
}

/// Outcome of one cognitive cycle of the engine.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CycleReport {
    /// Plans advanced, in order (control may pass to a spawned child or back to a parent).
    pub advanced: Vec<FrameId>,
    pub effects: Vec<Effect>,
    pub released: Vec<FrameId>,
}

impl Engine {
    pub fn new(library: ScriptLibrary, self_id: FrameId) -> Self {
        Engine {
            library,
            self_id,
            agenda: Vec::new(),
            finished: Vec::new(),
            next_seq: 0,
            now: 0,
        }
    }

    pub fn agenda(&self) -> &[PlanInstance] {
        &self.agenda
    }

    pub fn finished(&self) -> &[PlanInstance] {
        &self.finished
    }

    pub fn plan(&self, id: &FrameId) -> Option<&PlanInstance> {
        self.agenda.iter().chain(&self.finished).find(|p| &p.id == id)
    }

    pub fn is_idle(&self) -> bool {
        self.agenda.is_empty()
    }

    /// Places a plan for `goal` on the agenda. The script is the goal frame's
    /// concept in the variant for `role` (falling back to `any`). Parameters
    /// `#NAME-n` bind to the goal's `name` property.
    pub fn adopt_goal(
        &mut self,
        kb: &mut KnowledgeBase,
        goal: &FrameId,
        role: Role,
        priority: i64,
    ) -> Result<&PlanInstance, PlanError> {
        let concept = kb
            .get(goal)
            .ok_or_else(|| KnowledgeError::UnknownFrame(goal.clone()))?
            .concept
            .clone();
        let def = self
            .library
            .get(&concept, role)
            .ok_or_else(|| PlanError::NoScriptForRole {
                concept: concept.clone(),
                role,
            })?
            .clone();
        if self.agenda.iter().any(|p| p.parent.is_none() && &p.goal == goal) {
            return Err(PlanError::DuplicateGoal(goal.clone()));
        }
        let goal_frame = kb.get(goal).expect("checked above");
        let mut bindings = BTreeMap::new();
        bindings.insert("SELF".to_string(), Value::Ref(self.self_id.clone()));
        bindings.insert("GOAL".to_string(), Value::Ref(goal.clone()));
        for p in &def.params {
            let prop = param_property(p);
            let v = goal_frame
                .first(&prop)
                .cloned()
                .ok_or_else(|| PlanError::UnboundParameter {
                    script: def.name.clone(),
                    param: p.clone(),
                })?;
            bindings.insert(p.clone(), v);
        }
        let plan = self.instantiate(kb, &def, role, bindings, goal.clone(), None, priority, false)?;
        self.agenda.push(plan);
        Ok(self.agenda.last().expect("just pushed"))
    }

    #[allow(clippy::too_many_arguments)]
    fn instantiate(
        &mut self,
        kb: &mut KnowledgeBase,
        def: &ScriptDef,
        role: Role,
        bindings: BTreeMap<String, Value>,
        goal: FrameId,
        parent: Option<FrameId>,
        priority: i64,
        skip_preconditions: bool,
    ) -> Result<PlanInstance, PlanError> {
        for p in &def.params {
            if !bindings.contains_key(p) {
                return Err(PlanError::UnboundParameter {
                    script: def.name.clone(),
                    param: p.clone(),
                });
            }
        }
        let sm = kb.sm();
        let mut props = BTreeMap::new();
        props.insert("goal".to_string(), vec![Value::Ref(goal.clone())]);
        props.insert("role".to_string(), vec![Value::sym(role.as_str())]);
        if let Some(p) = &parent {
            props.insert("parent".to_string(), vec![Value::Ref(p.clone())]);
        }
        let concept = if kb.is_concept(&def.name) {
            def.name.as_str()
        } else {
            "EVENT"
        };
        let id = kb.instantiate(concept, props, &sm)?;
        let sections = def
            .sections
            .iter()
            .filter(|s| !(skip_preconditions && s.name == PRECONDITIONS))
            .cloned()
            .collect();
        self.next_seq += 1;
        Ok(PlanInstance {
            id,
            script: def.name.clone(),
            role,
            sections,
            bindings,
            cursor: Cursor::start(),
            status: PlanStatus::Pending,
            wait: None,
            goal,
            parent,
            priority,
            created_at: self.now,
            seq: self.next_seq,
            candidates: Vec::new(),
            selected: None,
            last_outcome: None,
            failure: None,
        })
    }

    /// Index of the runnable item with the highest priority, earliest created-at.
    pub fn pick(&self) -> Option<usize> {
        self.agenda
            .iter()
            .enumerate()
            .filter(|(_, p)| p.runnable())
            .min_by_key(|(_, p)| (-p.priority, p.created_at, p.seq))
            .map(|(i, _)| i)
    }

    /// One cognitive cycle: release waits, advance the top item (following
    /// control into spawned children and back to resumed parents), release again.
    pub fn cycle(&mut self, host: &mut dyn Host, now: u64) -> CycleReport {
        self.now = now;
        let mut report = CycleReport::default();
        self.recheck(host, &mut report);
        let mut transfers = 0;
        while let Some(idx) = self.pick() {
            let id = self.agenda[idx].id.clone();
            report.advanced.push(id);
            let effects = self.advance(idx, host);
            let last = effects.last().cloned();
            report.effects.extend(effects);
            match last {
                Some(Effect::Spawn { .. }) | Some(Effect::Complete) | Some(Effect::Fail(_)) => {
                    self.settle(host);
                    transfers += 1;
                    if transfers >= MAX_TRANSFERS {
                        break;
                    }
                }
                _ => break,
            }
        }
        self.settle(host);
        self.recheck(host, &mut report);
        report
    }

    /// Releases satisfied AWAITs, resolves finished async steps and fires interrupts.
    fn recheck(&mut self, host: &mut dyn Host, report: &mut CycleReport) {
        for plan in self.agenda.iter_mut() {
            if plan.status != PlanStatus::Awaiting {
                continue;
            }
            match plan.wait.clone() {
                Some(Wait::Condition(c)) => {
                    if condition_holds(host.kb(), &plan.bindings, &c) {
                        plan.wait = None;
                        plan.status = PlanStatus::Active;
                        plan.cursor.top().step += 1;
                        report.released.push(plan.id.clone());
                    }
                }
                Some(Wait::Async { handle, prim }) => {
                    if let Some(cond) = firing_interrupt(host.kb(), plan) {
                        host.cancel_async(handle);
                        interrupt_thought(host, plan, &prim, &cond);
                        plan.wait = None;
                        plan.status = PlanStatus::Interrupted;
                        plan.last_outcome = Some(AsyncStatus::Cancelled);
                        plan.stop_innermost_loop();
                        plan.cursor.top().step += 1;
                        report.released.push(plan.id.clone());
                        continue;
                    }
                    match host.async_status(handle) {
                        AsyncStatus::Pending => {}
                        done => {
                            plan.wait = None;
                            plan.status = PlanStatus::Active;
                            plan.last_outcome = Some(done);
                            plan.cursor.top().step += 1;
                            report.released.push(plan.id.clone());
                        }
                    }
                }
                Some(Wait::Child(_)) | None => {}
            }
        }
    }

    /// Moves finished plans off the agenda, resuming or failing their parents.
    fn settle(&mut self, host: &mut dyn Host) {
        loop {
            let Some(idx) = self.agenda.iter().position(|p| !p.live()) else {
                return;
            };
            let done = self.agenda.remove(idx);
            if let Some(parent_id) = &done.parent {
                if let Some(parent) = self.agenda.iter_mut().find(|p| &p.id == parent_id) {
                    if parent.wait == Some(Wait::Child(done.id.clone())) {
                        parent.wait = None;
                        if done.status == PlanStatus::Done {
                            parent.status = PlanStatus::Active;
                            parent.cursor.top().step += 1;
                        } else {
                            let reason = format!(
                                "child {} failed: {}",
                                done.id,
                                done.failure.clone().unwrap_or_default()
                            );
                            host.thought(ThoughtEvent::Failed {
                                plan: parent.id.to_string(),
                                reason: reason.clone(),
                            });
                            parent.status = PlanStatus::Failed;
                            parent.failure = Some(reason);
                        }
                    }
                }
            }
            self.finished.push(done);
        }
    }

    /// Advances agenda item `idx` until it blocks, emits, spawns or ends.
    pub fn advance(&mut self, idx: usize, host: &mut dyn Host) -> Vec<Effect> {
        let mut effects = Vec::new();
        loop {
            let e = self.step_once(idx, host);
            let end = e.as_ref().is_some_and(Effect::ends_advance);
            effects.extend(e);
            if end {
                return effects;
            }
        }
    }

    /// Executes at most one step (or one cursor movement).
    fn step_once(&mut self, idx: usize, host: &mut dyn Host) -> Option<Effect> {
        let plan = &mut self.agenda[idx];
        if plan.status == PlanStatus::Pending || plan.status == PlanStatus::Interrupted {
            plan.status = PlanStatus::Active;
        }
        if plan.cursor.section >= plan.sections.len() {
            plan.status = PlanStatus::Done;
            host.thought(ThoughtEvent::Completed {
                plan: plan.id.to_string(),
            });
            return Some(Effect::Complete);
        }
        let Some(step) = plan.current_step().cloned() else {
            self.leave_body(idx);
            return None;
        };
        match step {
            Step::InterruptWhen { .. } => {
                self.agenda[idx].cursor.top().step += 1;
                None
            }
            Step::Run { prim, args, .. } => self.run_primitive(idx, host, &prim, &args),
            Step::RunNew { script, unless, .. } => {
                let plan = &self.agenda[idx];
                if unless
                    .as_ref()
                    .is_some_and(|c| condition_holds(host.kb(), &plan.bindings, c))
                {
                    if plan.section_name() == Some(PRECONDITIONS) {
                        if let Some(Condition::Known { var, prop }) = &unless {
                            let object = plan
                                .binding_ref(var)
                                .map(|f| f.to_string())
                                .unwrap_or_else(|| var.clone());
                            host.thought(ThoughtEvent::PreconditionResolved {
                                object,
                                property: prop.to_ascii_lowercase(),
                            });
                        }
                    }
                    self.agenda[idx].cursor.top().step += 1;
                    return None;
                }
                Some(self.spawn(idx, host, &script))
            }
            Step::RunAsync { prim, args, .. } => {
                let plan = &mut self.agenda[idx];
                if let Some(cond) = firing_interrupt(host.kb(), plan) {
                    interrupt_thought(host, plan, &prim, &cond);
                    plan.last_outcome = Some(AsyncStatus::Cancelled);
                    plan.stop_innermost_loop();
                    plan.cursor.top().step += 1;
                    return Some(Effect::Interrupted { prim });
                }
                let values = match resolve_args(plan, &args) {
                    Ok(v) => v,
                    Err(e) => return Some(fail(plan, host, e)),
                };
                match host.start_async(plan, &prim, &values) {
                    Ok(handle) => {
                        plan.status = PlanStatus::Awaiting;
                        plan.wait = Some(Wait::Async {
                            handle,
                            prim: prim.clone(),
                        });
                        Some(Effect::Command { prim, handle })
                    }
                    Err(e) => Some(fail(plan, host, e)),
                }
            }
            Step::Await { cond, .. } => {
                let plan = &mut self.agenda[idx];
                if condition_holds(host.kb(), &plan.bindings, &cond) {
                    plan.cursor.top().step += 1;
                    None
                } else {
                    plan.status = PlanStatus::Awaiting;
                    plan.wait = Some(Wait::Condition(cond.clone()));
                    Some(Effect::Block(Wait::Condition(cond)))
                }
            }
            Step::ForEach { var, set, .. } => {
                let plan = &mut self.agenda[idx];
                let items = match resolve_set(host.kb(), &plan.bindings, &set) {
                    Ok(v) => v,
                    Err(e) => return Some(fail(plan, host, e)),
                };
                if items.is_empty() {
                    plan.cursor.top().step += 1;
                    return None;
                }
                plan.bindings.insert(var.clone(), items[0].clone());
                plan.cursor.top().iter = Some(Iteration {
                    var,
                    items,
                    index: 0,
                    stop: false,
                });
                plan.cursor.path.push(Pos { step: 0, iter: None });
                None
            }
        }
    }

    /// Cursor reached the end of a step list: next section, next iteration, or loop exit.
    fn leave_body(&mut self, idx: usize) {
        let plan = &mut self.agenda[idx];
        if plan.cursor.path.len() == 1 {
            plan.cursor.section += 1;
            plan.cursor.path[0] = Pos { step: 0, iter: None };
            return;
        }
        plan.cursor.path.pop();
        let pos = plan.cursor.top();
        let it = pos.iter.as_mut().expect("FOR position carries its iteration");
        it.index += 1;
        if it.stop || it.index >= it.items.len() {
            pos.iter = None;
            pos.step += 1;
        } else {
            let (var, item) = (it.var.clone(), it.items[it.index].clone());
            plan.bindings.insert(var, item);
            plan.cursor.path.push(Pos { step: 0, iter: None });
        }
    }

    fn run_primitive(&mut self, idx: usize, host: &mut dyn Host, prim: &str, args: &[Arg]) -> Option<Effect> {
        let values = match resolve_args(&self.agenda[idx], args) {
            Ok(v) => v,
            Err(e) => return Some(fail(&mut self.agenda[idx], host, e)),
        };
        let result = match prim {
            "identify-candidate-plans" => {
                let goal_concept = purpose(host.kb(), &self.agenda[idx]);
                let found: Vec<String> = self
                    .library
                    .candidates(&goal_concept)
                    .iter()
                    .map(|d| d.name.clone())
                    .collect();
                self.agenda[idx].candidates = found;
                Ok(false)
            }
            "select-plan" => self.select_plan(idx, host),
            "adopt-plan" => {
                let r = host.primitive(&self.agenda[idx], prim, &values);
                if r.is_ok() {
                    let goal_concept = purpose(host.kb(), &self.agenda[idx]);
                    match self.library.candidates(&goal_concept).first() {
                        Some(d) => {
                            let name = d.name.clone();
                            let plan = &mut self.agenda[idx];
                            let at = plan.cursor.path[0].step + 1;
                            let line = 0;
                            plan.sections[plan.cursor.section].steps.insert(
                                at,
                                Step::RunNew {
                                    script: name.clone(),
                                    unless: None,
                                    line,
                                },
                            );
                            plan.selected = Some(name);
                        }
                        None => {
                            return Some(fail(
                                &mut self.agenda[idx],
                                host,
                                format!("no plan for {goal_concept}"),
                            ))
                        }
                    }
                }
                r
            }
            _ => host.primitive(&self.agenda[idx], prim, &values),
        };
        let plan = &mut self.agenda[idx];
        match result {
            Ok(emitted) => {
                plan.cursor.top().step += 1;
                Some(Effect::Primitive {
                    name: prim.to_string(),
                    emitted,
                })
            }
            Err(e) => Some(fail(plan, host, format!("*{prim}: {e}"))),
        }
    }

    /// Picks the domain plan and splices its preconditions and a RUN NEW of it
    /// into this plan's PRECONDITIONS and RUN-PLAN sections.
    fn select_plan(&mut self, idx: usize, host: &mut dyn Host) -> Result<bool, String> {
        let plan = &self.agenda[idx];
        let name = match plan.candidates.first() {
            Some(n) => n.clone(),
            None => {
                let goal_concept = purpose(host.kb(), plan);
                self.library
                    .candidates(&goal_concept)
                    .first()
                    .map(|d| d.name.clone())
                    .ok_or_else(|| format!("no candidate plan for {goal_concept}"))?
            }
        };
        let def = self
            .library
            .get(&name, plan.role)
            .ok_or_else(|| format!("@{name} has no {} variant", plan.role))?
            .clone();
        let plan = &mut self.agenda[idx];
        let pre: Vec<Step> = def
            .section(PRECONDITIONS)
            .map(|s| s.steps.clone())
            .unwrap_or_default();
        match plan.sections.iter_mut().find(|s| s.name == PRECONDITIONS) {
            Some(s) => s.steps.extend(pre),
            None => {
                let at = plan.cursor.section + 1;
                plan.sections.insert(
                    at,
                    Section {
                        name: PRECONDITIONS.to_string(),
                        steps: pre,
                    },
                );
            }
        }
        let run = Step::RunNew {
            script: name.clone(),
            unless: None,
            line: def.line,
        };
        match plan.sections.iter_mut().find(|s| s.name == RUN_PLAN) {
            Some(s) => s.steps.push(run),
            None => plan.sections.push(Section {
                name: RUN_PLAN.to_string(),
                steps: vec![run],
            }),
        }
        plan.selected = Some(name);
        Ok(false)
    }

    fn spawn(&mut self, idx: usize, host: &mut dyn Host, script: &str) -> Effect {
        let parent = self.agenda[idx].clone();
        let Some(def) = self.library.get(script, parent.role).cloned() else {
            let e = format!("no script @{script} for role {}", parent.role);
            return fail(&mut self.agenda[idx], host, e);
        };
        let skip = parent.selected.as_deref() == Some(script);
        let child = match self.instantiate(
            host.kb_mut(),
            &def,
            parent.role,
            parent.bindings.clone(),
            parent.goal.clone(),
            Some(parent.id.clone()),
            parent.priority + 1,
            skip,
        ) {
            Ok(c) => c,
            Err(e) => return fail(&mut self.agenda[idx], host, e.to_string()),
        };
        host.thought(ThoughtEvent::Spawned {
            script: script.to_string(),
            plan: child.id.to_string(),
        });
        let child_id = child.id.clone();
        let p = &mut self.agenda[idx];
        p.status = PlanStatus::Awaiting;
        p.wait = Some(Wait::Child(child_id.clone()));
        self.agenda.push(child);
        Effect::Spawn {
            child: child_id,
            script: script.to_string(),
        }
    }
}

/// `#OBJECT-1` binds to property `object`.
fn param_property(param: &str) -> String {
    let base = match param.rsplit_once('-') {
        Some((b, n)) if n.chars().all(|c| c.is_ascii_digit()) => b,
        _ => param,
    };
    base.to_ascii_lowercase()
}

/// Domain goal concept a plan serves: the goal frame's `purpose`, else its concept.
fn purpose(kb: &KnowledgeBase, plan: &PlanInstance) -> String {
    kb.get(&plan.goal)
        .map(|g| {
            g.first_sym("purpose")
                .map(str::to_string)
                .unwrap_or_else(|| g.concept.clone())
        })
        .unwrap_or_default()
}

fn resolve_args(plan: &PlanInstance, args: &[Arg]) -> Result<Vec<Value>, String> {
    args.iter()
        .map(|a| match a {
            Arg::Lit(l) => Ok(Value::sym(l.as_str())),
            Arg::Var(v) => plan
                .bindings
                .get(v)
                .cloned()
                .ok_or_else(|| format!("#{v} is unbound")),
        })
        .collect()
}

fn fail(plan: &mut PlanInstance, host: &mut dyn Host, reason: String) -> Effect {
    host.thought(ThoughtEvent::Failed {
        plan: plan.id.to_string(),
        reason: reason.clone(),
    });
    plan.status = PlanStatus::Failed;
    plan.wait = None;
    plan.failure = Some(reason.clone());
    Effect::Fail(reason)
}

fn firing_interrupt(kb: &KnowledgeBase, plan: &PlanInstance) -> Option<Condition> {
    plan.interrupts_in_scope()
        .into_iter()
        .find(|c| condition_holds(kb, &plan.bindings, c))
}

fn interrupt_thought(host: &mut dyn Host, plan: &PlanInstance, prim: &str, cond: &Condition) {
    let (object, property) = match cond {
        Condition::Known { var, prop } => (
            plan.binding_ref(var)
                .map(|f| f.to_string())
                .unwrap_or_else(|| format!("#{var}")),
            prop.to_ascii_lowercase(),
        ),
        Condition::Exists { concept, .. } => (concept.clone(), "instance".to_string()),
    };
    host.thought(ThoughtEvent::Interrupted {
        step: prim.to_ascii_uppercase(),
        object,
        property,
    });
}
