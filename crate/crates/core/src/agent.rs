//! Strategic agent: interprets chat and sensing, runs the plan engine and
//! turns primitives into speech and tactical commands.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::knowledge::{Frame, FrameId, KnowledgeBase, QueryPattern, SpaceId, Value, VMR_TYPE};
use crate::language::{
    analyze, generate, render_thought, Filler, Lexicon, Meaning, SpeechAct, ThoughtEvent, Tmr,
};
use crate::plan::{AsyncStatus, Engine, Host, PlanInstance, Role, ScriptLibrary};
use crate::tactical::{ActionCommand, CommandStatus, SensingFrame, Verb};
use crate::world::{RobotClass, Scenario, ZoneType};

/// Priority of a collaborative-activity plan adopted from a human request.
pub const TASK_PRIORITY: i64 = 50;

const CA: &str = "COLLABORATIVE-ACTIVITY";
const SEARCH: &str = "SEARCH-FOR-LOST-OBJECT";
const HAS_PLAN: &str = "HAS-COLLABORATIVE-PLAN";

/// Something the agent wants posted on the bus this tick.
#[derive(Clone, Debug, PartialEq)]
pub enum Outgoing {
    Chat {
        addressee: String,
        surface: String,
        meaning: Meaning,
    },
    Thought(String),
    Tmr(serde_json::Value),
    Vmr(serde_json::Value),
    Agenda(serde_json::Value),
}

/// Knowledge, dialogue state and primitive implementations of one robot.
pub struct Mind {
    pub id: FrameId,
    pub class: RobotClass,
    pub kb: KnowledgeBase,
    lex: Arc<Lexicon>,
    pub leader: FrameId,
    robots: Vec<FrameId>,
    human: FrameId,
    location: FrameId,
    now: u64,
    outbox: Vec<Outgoing>,
    commands: Vec<ActionCommand>,
    next_cmd: u64,
    asyncs: BTreeMap<u64, (Verb, AsyncStatus)>,
    open_questions: Vec<(String, FrameId)>,
    seen: BTreeSet<(String, (i32, i32))>,
    percepts: u64,
    pub searched: Vec<FrameId>,
    pub assignments: BTreeMap<FrameId, Vec<FrameId>>,
    /// Objects of adopted search tasks.
    pub sought: Vec<FrameId>,
    goals: Vec<(FrameId, Role)>,
}

impl Mind {
    fn thought(&mut self, ev: ThoughtEvent) {
        self.outbox.push(Outgoing::Thought(render_thought(self.now, &ev)));
    }

    fn say(&mut self, addressee: &FrameId, meaning: Meaning) -> Result<(), String> {
        let surface =
            generate(&self.lex, &self.kb, &meaning, &self.id, addressee).map_err(|e| e.to_string())?;
        self.thought(ThoughtEvent::Said {
            addressee: addressee.to_string(),
            act: meaning.speech_act.to_string(),
            concept: meaning.concept.clone(),
        });
        self.outbox.push(Outgoing::Chat {
            addressee: addressee.to_string(),
            surface,
            meaning,
        });
        Ok(())
    }

    fn is_leader(&self) -> bool {
        self.id == self.leader
    }

    fn sm(&self) -> SpaceId {
        self.kb.sm()
    }

    fn set(&mut self, id: &FrameId, prop: &str, values: Vec<Value>) {
        if let Err(e) = self.kb.set_property(id, prop, values) {
            self.thought(ThoughtEvent::Warning { text: e.to_string() });
        }
    }

    fn zone_type(&self, zone: &FrameId) -> Option<ZoneType> {
        match self.kb.get(zone)?.first_sym("zone-type")? {
            "a" => Some(ZoneType::A),
            "b" => Some(ZoneType::B),
            "c" => Some(ZoneType::C),
            _ => None,
        }
    }

    fn robot_class(&self, robot: &FrameId) -> Option<RobotClass> {
        match self.kb.get(robot)?.first_sym("class")? {
            "ugv" => Some(RobotClass::Ugv),
            "drone" => Some(RobotClass::Drone),
            _ => None,
        }
    }

    fn new_command(&mut self, verb: Verb) -> ActionCommand {
        self.next_cmd += 1;
        ActionCommand::new(self.next_cmd, verb, self.now)
    }

    /// Zone allocation: the prioritized zone goes to the leader when it can
    /// search it; a zone only one class can search goes to that robot;
    /// otherwise the robot with the fewest assigned waypoints, leader first on ties.
    fn allocate(&self, zones: &[FrameId]) -> BTreeMap<FrameId, Vec<FrameId>> {
        let prioritized = self
            .kb
            .get(&self.location)
            .and_then(|f| f.first_ref("prioritized-zone"))
            .cloned();
        let mut robots = self.robots.clone();
        robots.sort_by_key(|r| (r != &self.leader, r.clone()));
        let mut load: BTreeMap<FrameId, i64> = robots.iter().map(|r| (r.clone(), 0)).collect();
        let mut out: BTreeMap<FrameId, Vec<FrameId>> =
            robots.iter().map(|r| (r.clone(), Vec::new())).collect();
        for z in zones {
            let Some(t) = self.zone_type(z) else { continue };
            let capable: Vec<&FrameId> = robots
                .iter()
                .filter(|r| self.robot_class(r).is_some_and(|c| c.can_search(t)))
                .collect();
            let pick = if prioritized.as_ref() == Some(z) && capable.contains(&&self.leader) {
                Some(self.leader.clone())
            } else {
                capable.iter().min_by_key(|r| load[**r]).map(|r| (*r).clone())
            };
            if let Some(r) = pick {
                let wps = self
                    .kb
                    .get(z)
                    .and_then(|f| f.first("waypoint-count"))
                    .and_then(Value::as_num)
                    .unwrap_or(1);
                *load.get_mut(&r).expect("robot") += wps;
                out.get_mut(&r).expect("robot").push(z.clone());
            }
        }
        out
    }

    fn object_of(&self, plan: &PlanInstance) -> Option<FrameId> {
        plan.binding_ref("OBJECT-1").cloned()
    }

    fn consider_reporting(&mut self, plan: &PlanInstance, zone: Option<&FrameId>) -> Result<bool, String> {
        let object = self.object_of(plan).ok_or("no #OBJECT-1")?;
        let (location, finder) = match self.kb.get(&object) {
            Some(f) => (f.first_ref("location").cloned(), f.first_ref("found-by").cloned()),
            None => (None, None),
        };
        let Some(zone) = zone else {
            // end of the zone loop
            if location.is_none() {
                let zones: Vec<Value> = self.searched.iter().cloned().map(Value::Ref).collect();
                let m = Meaning::new(SpeechAct::Inform, "SEARCH-COMPLETE")
                    .with("object", Value::Ref(object))
                    .with_all("zones", zones);
                let human = self.human.clone();
                self.say(&human, m)?;
                return Ok(true);
            }
            return Ok(false);
        };
        match &plan.last_outcome {
            Some(AsyncStatus::Succeeded) => {
                self.searched.push(zone.clone());
                if location.is_none() && !self.is_leader() {
                    let m = Meaning::new(SpeechAct::Inform, "SEARCH-RESULT")
                        .with("object", Value::Ref(object))
                        .with("zone", Value::Ref(zone.clone()));
                    let leader = self.leader.clone();
                    self.say(&leader, m)?;
                    return Ok(true);
                }
                Ok(false)
            }
            Some(AsyncStatus::Cancelled) if finder.as_ref() == Some(&self.id) => {
                let at = location.ok_or("found without a location")?;
                let m = Meaning::new(SpeechAct::Inform, "OBJECT-LOCATION")
                    .with("object", Value::Ref(object))
                    .with("zone", Value::Ref(at));
                let mut to: Vec<FrameId> = self.robots.iter().filter(|r| **r != self.id).cloned().collect();
                to.push(self.human.clone());
                for a in to {
                    self.say(&a, m.clone())?;
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    /// Fills slots an answer left implicit from the question it answers.
    fn fill_from_question(&self, m: &mut Meaning) {
        if m.speech_act != SpeechAct::Inform {
            return;
        }
        let Some((_, subject)) = self.open_questions.iter().rev().find(|(c, _)| *c == m.concept) else {
            return;
        };
        let slot = if m.concept == "LOCATION-CONSTRAINED" {
            "location"
        } else {
            "object"
        };
        m.slots
            .entry(slot.to_string())
            .or_insert_with(|| vec![Value::Ref(subject.clone())]);
    }

    /// Resolves fillers the situation model does not hold by creating them.
    fn meaning_of(&mut self, tmr: &Tmr) -> Meaning {
        let mut slots = BTreeMap::new();
        for (k, fs) in &tmr.slots {
            let mut vals = Vec::new();
            for f in fs {
                match f {
                    Filler::Value(v) => vals.push(v.clone()),
                    Filler::New { concept, owner } => {
                        let mut props = BTreeMap::new();
                        if let Some(o) = owner {
                            props.insert("owned-by".to_string(), vec![Value::Ref(o.clone())]);
                        }
                        let sm = self.sm();
                        match self.kb.instantiate(concept, props, &sm) {
                            Ok(id) => vals.push(Value::Ref(id)),
                            Err(e) => self.thought(ThoughtEvent::Warning { text: e.to_string() }),
                        }
                    }
                }
            }
            slots.insert(k.clone(), vals);
        }
        Meaning {
            speech_act: tmr.speech_act,
            concept: tmr.concept.clone(),
            slots,
        }
    }

    fn first_ref(m: &Meaning, slot: &str) -> Option<FrameId> {
        m.slots.get(slot)?.iter().find_map(Value::as_ref_id).cloned()
    }

    fn interpret_chat(
        &mut self,
        sender: &FrameId,
        addressee: &FrameId,
        surface: &str,
        attached: Option<&serde_json::Value>,
    ) {
        let from_robot = self.robots.contains(sender);
        let robot_meaning = attached
            .filter(|_| from_robot)
            .and_then(|a| a.get("meaning"))
            .and_then(|m| serde_json::from_value::<Meaning>(m.clone()).ok());
        let (mut m, unresolved, export) = match robot_meaning {
            Some(m) => {
                let export = serde_json::json!({
                    "speech-act": m.speech_act.as_str(),
                    "speaker": sender.as_str(),
                    "addressee": addressee.as_str(),
                    "proposition": { "concept": m.concept, "slots": slot_strings(&m) },
                    "source": surface,
                    "unresolved": false,
                });
                (m, false, export)
            }
            None => {
                let tmr = analyze(&self.lex, &self.kb, surface, sender, addressee);
                let m = self.meaning_of(&tmr);
                (m, tmr.unresolved, tmr.export())
            }
        };
        self.outbox.push(Outgoing::Tmr(export));
        if unresolved {
            self.thought(ThoughtEvent::Warning {
                text: format!("could not interpret \"{surface}\" from {sender}"),
            });
            return;
        }
        self.fill_from_question(&mut m);
        self.thought(ThoughtEvent::Interpreted {
            speaker: sender.to_string(),
            act: m.speech_act.to_string(),
            concept: m.concept.clone(),
        });
        self.open_questions.retain(|(c, _)| *c != m.concept);
        let object = Self::first_ref(&m, "object");
        match (m.speech_act, m.concept.as_str()) {
            (SpeechAct::RequestAction, SEARCH) => {
                let zones = m.slots.get("zones").cloned().unwrap_or_default();
                let Some(object) = object else { return };
                if !zones.is_empty() && from_robot {
                    let mut props = BTreeMap::new();
                    props.insert("object".to_string(), vec![Value::Ref(object)]);
                    props.insert("zones".to_string(), zones);
                    props.insert("leader".to_string(), vec![Value::Ref(sender.clone())]);
                    let sm = self.sm();
                    if let Err(e) = self.kb.instantiate(HAS_PLAN, props, &sm) {
                        self.thought(ThoughtEvent::Warning { text: e.to_string() });
                    }
                } else if !self.sought.contains(&object) {
                    let mut props = BTreeMap::new();
                    props.insert("object".to_string(), vec![Value::Ref(object.clone())]);
                    props.insert("location".to_string(), vec![Value::Ref(self.location.clone())]);
                    props.insert("purpose".to_string(), vec![Value::sym(SEARCH)]);
                    props.insert("requester".to_string(), vec![Value::Ref(sender.clone())]);
                    let sm = self.sm();
                    match self.kb.instantiate(CA, props, &sm) {
                        Ok(goal) => {
                            let role = if self.is_leader() {
                                Role::Leader
                            } else {
                                Role::Subordinate
                            };
                            self.sought.push(object);
                            self.goals.push((goal, role));
                        }
                        Err(e) => self.thought(ThoughtEvent::Warning { text: e.to_string() }),
                    }
                }
            }
            (SpeechAct::Inform, "OBJECT-FEATURES") => {
                let Some(object) = object else { return };
                let feats: Vec<(String, Vec<Value>)> = m
                    .slots
                    .iter()
                    .filter(|(k, _)| self.kb.is_feature(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                for (k, v) in feats {
                    self.set(&object, &k, v);
                }
            }
            (SpeechAct::Inform, "LAST-SEEN-AT") => {
                let (Some(object), Some(place)) = (object, Self::first_ref(&m, "location")) else {
                    return;
                };
                self.set(&object, "last-seen-at", vec![Value::Ref(place.clone())]);
                if self
                    .kb
                    .get(&place)
                    .is_some_and(|f| self.kb.is_a(&f.concept, "SEARCHABLE-ZONE"))
                {
                    let loc = self.location.clone();
                    self.set(&loc, "prioritized-zone", vec![Value::Ref(place.clone())]);
                    let mut zones: Vec<Value> = self
                        .kb
                        .get(&loc)
                        .map(|f| f.get("searchable-zone").to_vec())
                        .unwrap_or_default();
                    zones.retain(|z| z.as_ref_id() != Some(&place));
                    zones.insert(0, Value::Ref(place));
                    self.set(&loc, "searchable-zone", zones);
                }
            }
            (SpeechAct::Inform, "LOCATION-CONSTRAINED") => {
                let loc = Self::first_ref(&m, "location").unwrap_or_else(|| self.location.clone());
                if let Some(v) = m.slots.get("search-constraint").cloned() {
                    self.set(&loc, "search-constraint", v);
                }
            }
            (SpeechAct::Inform, "OBJECT-LOCATION") => {
                let (Some(object), Some(zone)) = (object, Self::first_ref(&m, "zone")) else {
                    return;
                };
                self.set(&object, "location", vec![Value::Ref(zone)]);
                self.set(&object, "found-by", vec![Value::Ref(sender.clone())]);
            }
            (SpeechAct::Inform, "SEARCH-RESULT") => {
                if let Some(zone) = Self::first_ref(&m, "zone") {
                    if let Err(e) = self
                        .kb
                        .add_property(&zone, "searched-by", Value::Ref(sender.clone()))
                    {
                        self.thought(ThoughtEvent::Warning { text: e.to_string() });
                    }
                }
            }
            _ => {}
        }
    }

    fn interpret_frame(&mut self, frame: &SensingFrame) {
        for (id, st) in &frame.status {
            let Some((verb, cur)) = self.asyncs.get(id).cloned() else {
                continue;
            };
            if cur == AsyncStatus::Cancelled || !st.is_final() {
                continue;
            }
            let next = match st {
                CommandStatus::Done => AsyncStatus::Succeeded,
                CommandStatus::Failed(r) if r == "stopped" => AsyncStatus::Cancelled,
                CommandStatus::Failed(r) => AsyncStatus::Failed(r.clone()),
                _ => continue,
            };
            self.asyncs.insert(*id, (verb, next));
            self.thought(ThoughtEvent::ActionStatus {
                verb: verb.to_string(),
                status: st.to_string(),
            });
            let mut props = BTreeMap::new();
            props.insert("command-id".to_string(), vec![Value::Num(*id as i64)]);
            props.insert("status".to_string(), vec![Value::sym(st.to_string())]);
            let sm = self.sm();
            let _ = self.kb.instantiate("ACTION-STATUS", props, &sm);
        }
        let open: Vec<FrameId> = self
            .sought
            .iter()
            .filter(|o| self.kb.get(o).is_some_and(|f| !f.has("location")))
            .cloned()
            .collect();
        if open.is_empty() {
            return;
        }
        for d in &frame.detections {
            if !self.seen.insert((d.object_type.clone(), d.cell)) {
                continue;
            }
            let vmr = loop {
                self.percepts += 1;
                let id = FrameId::new(format!("{}-{}", d.object_type, self.percepts));
                if !self.kb.contains(&id) {
                    break id;
                }
            };
            let mut f = Frame::instance(vmr.clone(), "VMR")
                .with(VMR_TYPE, Value::sym(&d.object_type))
                .with("sensor", Value::Ref(self.id.clone()))
                .with("sensed-at", Value::Num(frame.tick as i64))
                .with("cell", Value::sym(format!("{}:{}", d.cell.0, d.cell.1)));
            if let Some(z) = &d.zone {
                f = f.with("zone", Value::reference(z.as_str()));
            }
            for (k, v) in &d.features {
                f = f.with(k, Value::sym(v));
            }
            let sm = self.sm();
            if let Err(e) = self.kb.assert_frame(f, &sm) {
                self.thought(ThoughtEvent::Warning { text: e.to_string() });
                continue;
            }
            self.outbox.push(Outgoing::Vmr(serde_json::json!({
                "id": vmr.as_str(),
                "sensor": self.id.as_str(),
                "sensed-at": frame.tick,
                "detection": d,
            })));
            for target in &open {
                let Some(concept) = self.kb.get(target).map(|f| f.concept.clone()) else {
                    continue;
                };
                let hit = self
                    .kb
                    .ground_percept(&vmr, &concept)
                    .ok()
                    .and_then(|g| g.matched)
                    .is_some_and(|m| &m == target);
                if hit {
                    self.thought(ThoughtEvent::GroundingMatch {
                        percept: vmr.to_string(),
                        target: target.to_string(),
                    });
                    if let Some(z) = &d.zone {
                        self.set(target, "location", vec![Value::reference(z.as_str())]);
                    }
                    let me = self.id.clone();
                    self.set(target, "found-by", vec![Value::Ref(me)]);
                } else {
                    self.thought(ThoughtEvent::GroundingMiss {
                        percept: vmr.to_string(),
                        target: target.to_string(),
                    });
                }
            }
        }
    }
}

fn slot_strings(m: &Meaning) -> serde_json::Value {
    m.slots
        .iter()
        .map(|(k, vs)| {
            let v: Vec<serde_json::Value> = vs.iter().map(|v| v.to_string().into()).collect();
            (k.clone(), serde_json::Value::Array(v))
        })
        .collect::<serde_json::Map<_, _>>()
        .into()
}

impl Host for Mind {
    fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    fn kb_mut(&mut self) -> &mut KnowledgeBase {
        &mut self.kb
    }

    fn primitive(&mut self, plan: &PlanInstance, name: &str, args: &[Value]) -> Result<bool, String> {
        match name {
            "identify-team-members" => {
                let team: Vec<Value> = self
                    .robots
                    .iter()
                    .chain(std::iter::once(&self.human))
                    .cloned()
                    .map(Value::Ref)
                    .collect();
                let me = self.id.clone();
                self.set(&me, "team", team);
                Ok(false)
            }
            "ask-human" => {
                let concept = args
                    .first()
                    .and_then(Value::as_sym)
                    .ok_or("ask-human needs a concept")?;
                let subject = args
                    .get(1)
                    .and_then(Value::as_ref_id)
                    .ok_or("ask-human needs a subject")?;
                let slot = if concept == "LOCATION-CONSTRAINED" {
                    "location"
                } else {
                    "object"
                };
                let m = Meaning::new(SpeechAct::RequestInfo, concept).with(slot, Value::Ref(subject.clone()));
                self.open_questions.push((concept.to_string(), subject.clone()));
                let human = self.human.clone();
                self.say(&human, m)?;
                Ok(true)
            }
            "allocate-zones" => {
                let loc = plan
                    .binding_ref("LOCATION-1")
                    .cloned()
                    .unwrap_or_else(|| self.location.clone());
                let zones: Vec<FrameId> = self
                    .kb
                    .get(&loc)
                    .map(|f| {
                        f.get("searchable-zone")
                            .iter()
                            .filter_map(Value::as_ref_id)
                            .cloned()
                            .collect()
                    })
                    .unwrap_or_default();
                let alloc = self.allocate(&zones);
                for (r, zs) in &alloc {
                    let vals: Vec<Value> = zs.iter().cloned().map(Value::Ref).collect();
                    self.set(r, "assigned-zone", vals.clone());
                    if *r == self.id {
                        self.set(&loc, "searchable-zone", vals);
                    }
                }
                self.assignments = alloc;
                Ok(false)
            }
            "propose-plan" => {
                let object = self.object_of(plan).ok_or("no #OBJECT-1")?;
                let others: Vec<(FrameId, Vec<FrameId>)> = self
                    .assignments
                    .iter()
                    .filter(|(r, _)| **r != self.id)
                    .map(|(r, z)| (r.clone(), z.clone()))
                    .collect();
                for (r, zs) in others {
                    let m = Meaning::new(SpeechAct::RequestAction, SEARCH)
                        .with("object", Value::Ref(object.clone()))
                        .with_all("zones", zs.into_iter().map(Value::Ref).collect());
                    self.say(&r, m)?;
                }
                Ok(true)
            }
            "adopt-plan" => {
                let sm = self.sm();
                let plans = self
                    .kb
                    .query(&QueryPattern::concept(HAS_PLAN).in_space(sm))
                    .map_err(|e| e.to_string())?;
                let latest = plans.last().ok_or("no plan to adopt")?;
                let f = self.kb.get(latest).ok_or("plan frame vanished")?;
                let zones = f.get("zones").to_vec();
                let leader = f
                    .first_ref("leader")
                    .cloned()
                    .unwrap_or_else(|| self.leader.clone());
                let loc = plan
                    .binding_ref("LOCATION-1")
                    .cloned()
                    .unwrap_or_else(|| self.location.clone());
                self.set(&loc, "searchable-zone", zones);
                let m = Meaning::new(SpeechAct::Ack, HAS_PLAN);
                self.say(&leader, m)?;
                Ok(true)
            }
            "consider-reporting" => {
                let zone = args.first().and_then(Value::as_ref_id).cloned();
                self.consider_reporting(plan, zone.as_ref())
            }
            other => Err(format!("unknown primitive *{other}")),
        }
    }

    fn start_async(&mut self, _: &PlanInstance, name: &str, args: &[Value]) -> Result<u64, String> {
        match name {
            "search" => {
                let zone = args
                    .first()
                    .and_then(Value::as_ref_id)
                    .ok_or("search needs a zone")?;
                let cmd = self.new_command(Verb::SearchZone).arg("zone", zone.as_str());
                self.thought(ThoughtEvent::Commanded {
                    verb: cmd.verb.to_string(),
                    args: vec![zone.to_string()],
                });
                let h = cmd.id;
                self.asyncs.insert(h, (cmd.verb, AsyncStatus::Pending));
                self.commands.push(cmd);
                Ok(h)
            }
            other => Err(format!("unknown async primitive *{other}")),
        }
    }

    fn async_status(&self, handle: u64) -> AsyncStatus {
        self.asyncs
            .get(&handle)
            .map(|(_, s)| s.clone())
            .unwrap_or(AsyncStatus::Failed("unknown handle".into()))
    }

    fn cancel_async(&mut self, handle: u64) {
        let stop = self.new_command(Verb::Stop).arg("command", &handle.to_string());
        self.thought(ThoughtEvent::Commanded {
            verb: stop.verb.to_string(),
            args: vec![handle.to_string()],
        });
        self.commands.push(stop);
        if let Some((_, s)) = self.asyncs.get_mut(&handle) {
            *s = AsyncStatus::Cancelled;
        }
    }

    fn thought(&mut self, event: ThoughtEvent) {
        Mind::thought(self, event)
    }
}

/// Output of one strategic step.
#[derive(Clone, Debug, Default)]
pub struct StepOutput {
    pub posts: Vec<Outgoing>,
    pub commands: Vec<ActionCommand>,
}

/// One robot's strategic layer.
pub struct Agent {
    pub mind: Mind,
    pub engine: Engine,
    last_agenda: serde_json::Value,
    started: bool,
}

/// Builds a robot's knowledge base from the shared ontology and the scenario.
pub fn seed_knowledge(ontology: &KnowledgeBase, scenario: &Scenario) -> Result<KnowledgeBase, String> {
    let mut kb = ontology.clone();
    let sm = kb.sm();
    let lte = kb.episodic();
    let e = |e: crate::knowledge::KnowledgeError| e.to_string();
    for r in &scenario.robots {
        kb.assert_frame(
            Frame::instance(r.id.as_str(), r.class.concept())
                .with("name", Value::sym(&r.name))
                .with("class", Value::sym(r.class.to_string())),
            &sm,
        )
        .map_err(e)?;
    }
    for h in &scenario.humans {
        kb.assert_frame(
            Frame::instance(h.id.as_str(), "HUMAN").with("name", Value::sym(&h.name)),
            &sm,
        )
        .map_err(e)?;
    }
    let loc = &scenario.location;
    for z in &scenario.zones {
        kb.assert_frame(
            Frame::instance(z.id.as_str(), z.concept.as_str())
                .with("label", Value::sym(&z.label))
                .with("zone-type", Value::sym(z.zone_type.to_string()))
                .with("waypoint-count", Value::Num(z.waypoints.len() as i64))
                .with("part-of", Value::reference(loc.id.as_str())),
            &sm,
        )
        .map_err(e)?;
    }
    let mut lf = Frame::instance(loc.id.as_str(), loc.concept.as_str()).with("label", Value::sym(&loc.label));
    for z in &scenario.zones {
        lf = lf.with("searchable-zone", Value::reference(z.id.as_str()));
    }
    if let Some(c) = &loc.search_constraint {
        lf = lf.with("search-constraint", Value::sym(c));
    }
    kb.assert_frame(lf, &sm).map_err(e)?;
    for m in &scenario.memories {
        let mut f = Frame::instance(m.id.as_str(), m.concept.as_str());
        if let Some(o) = &m.owned_by {
            f = f.with("owned-by", Value::reference(o.as_str()));
        }
        kb.assert_frame(f, &lte).map_err(e)?;
    }
    Ok(kb)
}

impl Agent {
    pub fn new(
        id: &str,
        class: RobotClass,
        kb: KnowledgeBase,
        lex: Arc<Lexicon>,
        library: ScriptLibrary,
        scenario: &Scenario,
        leader: &str,
    ) -> Self {
        let me = FrameId::new(id);
        let mut robots: Vec<FrameId> = scenario
            .robots
            .iter()
            .map(|r| FrameId::new(r.id.as_str()))
            .collect();
        robots.sort();
        Agent {
            mind: Mind {
                id: me.clone(),
                class,
                kb,
                lex,
                leader: FrameId::new(leader),
                robots,
                human: FrameId::new(scenario.humans[0].id.as_str()),
                location: FrameId::new(scenario.location.id.as_str()),
                now: 0,
                outbox: Vec::new(),
                commands: Vec::new(),
                next_cmd: 0,
                asyncs: BTreeMap::new(),
                open_questions: Vec::new(),
                seen: BTreeSet::new(),
                percepts: 0,
                searched: Vec::new(),
                assignments: BTreeMap::new(),
                sought: Vec::new(),
                goals: Vec::new(),
            },
            engine: Engine::new(library, me),
            last_agenda: serde_json::Value::Array(Vec::new()),
            started: false,
        }
    }

    pub fn id(&self) -> &str {
        self.mind.id.as_str()
    }

    /// Whether the agent has taken on a task and has nothing left on its agenda.
    pub fn finished(&self) -> bool {
        self.started && self.engine.is_idle()
    }

    pub fn started(&self) -> bool {
        self.started
    }

    /// Records the leader choice as a thought.
    pub fn announce_leader(&mut self, tick: u64) {
        self.mind.now = tick;
        let leader = self.mind.leader.to_string();
        self.mind.thought(ThoughtEvent::LeaderSelected { leader });
    }

    /// Drains output produced outside [`Agent::step`].
    pub fn step_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.mind.outbox)
    }

    /// Whether the sought object's location is known to this agent.
    pub fn knows_location(&self) -> bool {
        !self.mind.sought.is_empty()
            && self
                .mind
                .sought
                .iter()
                .all(|o| self.mind.kb.get(o).is_some_and(|f| f.has("location")))
    }

    /// One strategic step: interpret inputs, run one cognitive cycle.
    pub fn step(
        &mut self,
        tick: u64,
        chat: &[crate::comms::Envelope],
        frames: &[SensingFrame],
    ) -> StepOutput {
        self.mind.now = tick;
        self.mind.kb.set_now(tick);
        for f in frames {
            self.mind.interpret_frame(f);
        }
        for env in chat {
            self.mind.interpret_chat(
                &FrameId::new(env.sender.as_str()),
                &FrameId::new(env.addressee.as_str()),
                &env.surface,
                env.attached_mr.as_ref(),
            );
        }
        for (goal, role) in std::mem::take(&mut self.mind.goals) {
            match self
                .engine
                .adopt_goal(&mut self.mind.kb, &goal, role, TASK_PRIORITY)
            {
                Ok(p) => {
                    let ev = ThoughtEvent::Adopted {
                        script: p.script.clone(),
                        role: role.to_string(),
                    };
                    self.started = true;
                    self.mind.thought(ev);
                }
                Err(e) => self.mind.thought(ThoughtEvent::Warning { text: e.to_string() }),
            }
        }
        self.engine.cycle(&mut self.mind, tick);
        let agenda = self.agenda_json();
        if agenda != self.last_agenda {
            self.mind.outbox.push(Outgoing::Agenda(agenda.clone()));
            self.last_agenda = agenda;
        }
        StepOutput {
            posts: std::mem::take(&mut self.mind.outbox),
            commands: std::mem::take(&mut self.mind.commands),
        }
    }

    pub fn agenda_json(&self) -> serde_json::Value {
        self.engine
            .agenda()
            .iter()
            .map(|p| {
                serde_json::json!({
                    "plan": p.id.as_str(),
                    "script": p.script,
                    "role": p.role.to_string(),
                    "status": p.status.to_string(),
                    "section": p.section_name(),
                    "priority": p.priority,
                    "summary": p.summary(),
                })
            })
            .collect::<Vec<_>>()
            .into()
    }
}
