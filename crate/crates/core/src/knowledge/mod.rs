//! Frame-based knowledge store.
//!
//! A [`KnowledgeBase`] holds one agent's memories as typed frames organized
//! into spaces: the ontology (concept frames linked by `is-a`), the situation
//! model of currently active instances, and the long-term semantic and
//! episodic memories. Queries can follow `is-a` inheritance, and perceptual
//! grounding compares vision frames against remembered instances.

mod frame;
mod ontology;
mod query;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{Frame, FrameId, FrameKind, Value, IS_A};
pub use ontology::{parse_ontology, OntologyEntry};
pub use query::{ConceptPattern, Predicate, QueryPattern};

/// Role of a memory space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceRole {
    Ontology,
    SituationModel,
    SemanticLt,
    EpisodicLt,
    Scratch,
}

impl SpaceRole {
    pub fn default_id(self) -> &'static str {
        match self {
            SpaceRole::Ontology => "ontology",
            SpaceRole::SituationModel => "sm",
            SpaceRole::SemanticLt => "lts",
            SpaceRole::EpisodicLt => "lte",
            SpaceRole::Scratch => "scratch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceId(pub String);

impl SpaceId {
    pub fn of(role: SpaceRole) -> Self {
        SpaceId(role.default_id().to_string())
    }
}

impl From<&str> for SpaceId {
    fn from(s: &str) -> Self {
        SpaceId(s.to_string())
    }
}

impl std::fmt::Display for SpaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug)]
pub struct Space {
    pub id: SpaceId,
    pub role: SpaceRole,
    order: Vec<FrameId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnowledgeError {
    #[error("duplicate frame id {0}")]
    DuplicateId(FrameId),
    #[error("unknown space {0}")]
    UnknownSpace(SpaceId),
    #[error("unknown concept {0}")]
    UnknownConcept(String),
    #[error("unknown frame {0}")]
    UnknownFrame(FrameId),
    #[error("space role {0:?} already present")]
    DuplicateRole(SpaceRole),
    #[error("query pattern lists no spaces")]
    NoSpaces,
    #[error("ontology line {line}: {msg}")]
    Ontology { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, KnowledgeError>;

/// Outcome of comparing a vision frame against remembered instances.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundingResult {
    pub matched: Option<FrameId>,
    /// Fraction of required features matched by the best candidate.
    pub score: f64,
    pub best: Option<FrameId>,
}

/// Concept every feature property descends from.
pub const FEATURE_ROOT: &str = "PHYSICAL-FEATURE";
/// Property of a VMR frame naming the detected object type.
pub const VMR_TYPE: &str = "type";

#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    spaces: Vec<Space>,
    frames: BTreeMap<FrameId, (usize, Frame)>,
    counters: BTreeMap<String, u64>,
    now: u64,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::new()
    }
}

impl KnowledgeBase {
    /// Creates a store with the four standard role spaces.
    pub fn new() -> Self {
        let mut kb = KnowledgeBase {
            spaces: Vec::new(),
            frames: BTreeMap::new(),
            counters: BTreeMap::new(),
            now: 0,
        };
        for role in [
            SpaceRole::Ontology,
            SpaceRole::SituationModel,
            SpaceRole::SemanticLt,
            SpaceRole::EpisodicLt,
        ] {
            kb.add_space(SpaceId::of(role), role).expect("fresh store");
        }
        kb
    }

    /// Builds a store whose ontology space is loaded from `entries`.
    pub fn with_ontology(entries: &[OntologyEntry]) -> Result<Self> {
        let mut kb = Self::new();
        kb.load_ontology(entries)?;
        Ok(kb)
    }

    pub fn add_space(&mut self, id: SpaceId, role: SpaceRole) -> Result<()> {
        if role != SpaceRole::Scratch && self.spaces.iter().any(|s| s.role == role) {
            return Err(KnowledgeError::DuplicateRole(role));
        }
        if self.spaces.iter().any(|s| s.id == id) {
            return Err(KnowledgeError::DuplicateRole(role));
        }
        self.spaces.push(Space {
            id,
            role,
            order: Vec::new(),
        });
        Ok(())
    }

    pub fn spaces(&self) -> &[Space] {
        &self.spaces
    }

    pub fn space_of_role(&self, role: SpaceRole) -> SpaceId {
        self.spaces
            .iter()
            .find(|s| s.role == role)
            .map(|s| s.id.clone())
            .unwrap_or_else(|| SpaceId::of(role))
    }

    pub fn sm(&self) -> SpaceId {
        self.space_of_role(SpaceRole::SituationModel)
    }

    pub fn episodic(&self) -> SpaceId {
        self.space_of_role(SpaceRole::EpisodicLt)
    }

    /// Sets the clock used to timestamp asserted frames.
    pub fn set_now(&mut self, tick: u64) {
        self.now = tick;
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn space_index(&self, id: &SpaceId) -> Result<usize> {
        self.spaces
            .iter()
            .position(|s| &s.id == id)
            .ok_or_else(|| KnowledgeError::UnknownSpace(id.clone()))
    }

    /// Loads concept frames. Parents must be declared before children.
    pub fn load_ontology(&mut self, entries: &[OntologyEntry]) -> Result<()> {
        let space = self.space_of_role(SpaceRole::Ontology);
        for e in entries {
            for p in &e.parents {
                if !self.is_concept(p) {
                    return Err(KnowledgeError::UnknownConcept(p.clone()));
                }
            }
            let parents: Vec<&str> = e.parents.iter().map(String::as_str).collect();
            let mut f = Frame::concept(&e.name, &parents);
            for (k, v) in &e.properties {
                f = f.with(k, v.clone());
            }
            self.assert_frame(f, &space)?;
        }
        Ok(())
    }

    /// Inserts a frame into `space`. Instance frames must name a known concept.
    pub fn assert_frame(&mut self, mut frame: Frame, space: &SpaceId) -> Result<FrameId> {
        let idx = self.space_index(space)?;
        if self.frames.contains_key(&frame.id) {
            return Err(KnowledgeError::DuplicateId(frame.id));
        }
        if frame.kind == FrameKind::Instance && !self.is_concept(&frame.concept) {
            return Err(KnowledgeError::UnknownConcept(frame.concept));
        }
        frame.asserted_at = self.now;
        let id = frame.id.clone();
        self.spaces[idx].order.push(id.clone());
        self.frames.insert(id.clone(), (idx, frame));
        Ok(id)
    }

    /// Creates an instance `CONCEPT-n` with a fresh per-concept counter.
    pub fn instantiate(
        &mut self,
        concept: &str,
        bindings: BTreeMap<String, Vec<Value>>,
        space: &SpaceId,
    ) -> Result<FrameId> {
        if !self.is_concept(concept) {
            return Err(KnowledgeError::UnknownConcept(concept.to_string()));
        }
        self.space_index(space)?;
        let id = loop {
            let n = self.counters.entry(concept.to_string()).or_insert(0);
            *n += 1;
            let candidate = FrameId::new(format!("{concept}-{n}"));
            if !self.frames.contains_key(&candidate) {
                break candidate;
            }
        };
        let mut frame = Frame::instance(id, concept);
        frame.properties = bindings.into_iter().filter(|(_, v)| !v.is_empty()).collect();
        self.assert_frame(frame, space)
    }

    pub fn get(&self, id: &FrameId) -> Option<&Frame> {
        self.frames.get(id).map(|(_, f)| f)
    }

    pub fn get_str(&self, id: &str) -> Option<&Frame> {
        self.get(&FrameId::from(id))
    }

    pub fn get_mut(&mut self, id: &FrameId) -> Option<&mut Frame> {
        self.frames.get_mut(id).map(|(_, f)| f)
    }

    pub fn contains(&self, id: &FrameId) -> bool {
        self.frames.contains_key(id)
    }

    pub fn space_of(&self, id: &FrameId) -> Option<&SpaceId> {
        self.frames.get(id).map(|(s, _)| &self.spaces[*s].id)
    }

    /// Replaces the values of one property on an existing frame.
    pub fn set_property(&mut self, id: &FrameId, prop: &str, values: Vec<Value>) -> Result<()> {
        let f = self
            .get_mut(id)
            .ok_or_else(|| KnowledgeError::UnknownFrame(id.clone()))?;
        f.set(prop, values);
        Ok(())
    }

    pub fn add_property(&mut self, id: &FrameId, prop: &str, value: Value) -> Result<()> {
        let f = self
            .get_mut(id)
            .ok_or_else(|| KnowledgeError::UnknownFrame(id.clone()))?;
        f.properties.entry(prop.to_string()).or_default().push(value);
        Ok(())
    }

    /// Changes the concept of an instance frame.
    pub fn reclassify(&mut self, id: &FrameId, concept: &str) -> Result<()> {
        if !self.is_concept(concept) {
            return Err(KnowledgeError::UnknownConcept(concept.to_string()));
        }
        let f = self
            .get_mut(id)
            .ok_or_else(|| KnowledgeError::UnknownFrame(id.clone()))?;
        f.concept = concept.to_string();
        Ok(())
    }

    pub fn is_concept(&self, name: &str) -> bool {
        self.get(&FrameId::from(name))
            .is_some_and(|f| f.kind == FrameKind::Concept)
    }

    /// `child` is-a* `ancestor` (reflexive).
    pub fn is_a(&self, child: &str, ancestor: &str) -> bool {
        if child == ancestor {
            return self.is_concept(child);
        }
        let mut stack = vec![FrameId::from(child)];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            let Some(f) = self.get(&c) else { continue };
            for p in f.parents() {
                if p == ancestor {
                    return true;
                }
                stack.push(p.clone());
            }
        }
        false
    }

    /// All concepts in the ontology, in load order.
    pub fn concepts(&self) -> Vec<&Frame> {
        let idx = self
            .spaces
            .iter()
            .position(|s| s.role == SpaceRole::Ontology)
            .unwrap_or(0);
        self.spaces[idx]
            .order
            .iter()
            .filter_map(|id| self.get(id))
            .filter(|f| f.kind == FrameKind::Concept)
            .collect()
    }

    /// Whether a lowercase property symbol names a physical feature.
    pub fn is_feature(&self, prop: &str) -> bool {
        let c = prop.to_ascii_uppercase();
        c != FEATURE_ROOT && self.is_concept(&c) && self.is_a(&c, FEATURE_ROOT)
    }

    /// Feature properties set on a frame.
    pub fn features_of(&self, id: &FrameId) -> BTreeMap<String, Vec<Value>> {
        self.get(id)
            .map(|f| {
                f.properties
                    .iter()
                    .filter(|(k, v)| !v.is_empty() && self.is_feature(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn query(&self, pattern: &QueryPattern) -> Result<Vec<FrameId>> {
        query::run(self, pattern)
    }

    /// Iterates frames of one space in insertion order.
    pub fn frames_in(&self, space: &SpaceId) -> Result<impl Iterator<Item = &Frame>> {
        let idx = self.space_index(space)?;
        Ok(self.spaces[idx].order.iter().filter_map(|id| self.get(id)))
    }

    /// Compares a VMR frame against every remembered instance of `target_concept`.
    ///
    /// An instance matches when every feature set on it appears in the VMR with
    /// an equal value and the detected type is-a the instance's concept.
    pub fn ground_percept(&self, vmr: &FrameId, target_concept: &str) -> Result<GroundingResult> {
        if !self.is_concept(target_concept) {
            return Err(KnowledgeError::UnknownConcept(target_concept.to_string()));
        }
        let vmr_frame = self
            .get(vmr)
            .ok_or_else(|| KnowledgeError::UnknownFrame(vmr.clone()))?;
        let detected_type = vmr_frame.first_sym(VMR_TYPE).unwrap_or("");

        let mut candidates: Vec<FrameId> = Vec::new();
        for role in [SpaceRole::SituationModel, SpaceRole::EpisodicLt] {
            let space = self.space_of_role(role);
            for f in self.frames_in(&space)? {
                if f.kind == FrameKind::Instance && &f.id != vmr && self.is_a(&f.concept, target_concept) {
                    candidates.push(f.id.clone());
                }
            }
        }
        candidates.sort();

        let mut best: Option<(f64, FrameId)> = None;
        for id in candidates {
            let inst = self.get(&id).expect("candidate exists");
            let score = if !self.is_a(detected_type, &inst.concept) {
                0.0
            } else {
                let required = self.features_of(&id);
                if required.is_empty() {
                    1.0
                } else {
                    let hits = required
                        .iter()
                        .filter(|(k, v)| vmr_frame.get(k) == v.as_slice())
                        .count();
                    hits as f64 / required.len() as f64
                }
            };
            // candidates are sorted, so strict improvement keeps the lowest id on ties
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, id));
            }
        }
        Ok(match best {
            Some((score, id)) => GroundingResult {
                matched: (score >= 1.0).then(|| id.clone()),
                score,
                best: Some(id),
            },
            None => GroundingResult {
                matched: None,
                score: 0.0,
                best: None,
            },
        })
    }

    /// References to frames that do not exist.
    pub fn dangling_refs(&self) -> Vec<(FrameId, String, FrameId)> {
        let mut out = Vec::new();
        for (_, f) in self.frames.values() {
            for (k, vs) in &f.properties {
                for v in vs {
                    if let Value::Ref(r) = v {
                        if !self.frames.contains_key(r) {
                            out.push((f.id.clone(), k.clone(), r.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// One frame per line: `space | id | concept | prop=value;...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.spaces {
            for id in &s.order {
                let f = self.get(id).expect("ordered frame exists");
                let props: Vec<String> = f
                    .properties
                    .iter()
                    .map(|(k, vs)| {
                        let vals: Vec<String> = vs.iter().map(Value::to_string).collect();
                        format!("{k}={}", vals.join(","))
                    })
                    .collect();
                let _ = writeln!(out, "{} | {} | {} | {}", s.id, f.id, f.concept, props.join(";"));
            }
        }
        out
    }

    /// Exports a frame and the frames it references (depth-limited) for display.
    pub fn export(&self, root: &FrameId, depth: usize) -> serde_json::Value {
        let mut seen = std::collections::BTreeSet::new();
        let mut frames = Vec::new();
        let mut frontier = vec![(root.clone(), 0usize)];
        while let Some((id, d)) = frontier.pop() {
            if !seen.insert(id.clone()) {
                continue;
            }
            let Some(f) = self.get(&id) else { continue };
            if f.kind == FrameKind::Concept {
                continue;
            }
            frames.push(export_frame(f));
            if d < depth {
                for vs in f.properties.values() {
                    for v in vs.iter().rev() {
                        if let Value::Ref(r) = v {
                            frontier.push((r.clone(), d + 1));
                        }
                    }
                }
            }
        }
        serde_json::json!({ "root": root.as_str(), "frames": frames })
    }
}

pub fn export_frame(f: &Frame) -> serde_json::Value {
    let props: serde_json::Map<String, serde_json::Value> = f
        .properties
        .iter()
        .map(|(k, vs)| {
            let vals: Vec<serde_json::Value> = vs.iter().map(|v| v.to_string().into()).collect();
            (k.clone(), serde_json::Value::Array(vals))
        })
        .collect();
    serde_json::json!({ "id": f.id.as_str(), "concept": f.concept, "properties": props })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_kb() -> KnowledgeBase {
        let src = "\
ALL
OBJECT < ALL
PROPERTY < ALL
PHYSICAL-FEATURE < PROPERTY
COLOR < PHYSICAL-FEATURE
KEYCHAIN-COLOR < PHYSICAL-FEATURE
AGENT < OBJECT
HUMAN < AGENT
ROBOT < AGENT
UGV < ROBOT
PHYSICAL-OBJECT < OBJECT
KEY < PHYSICAL-OBJECT
MUG < PHYSICAL-OBJECT
MENTAL-OBJECT < OBJECT
VMR < MENTAL-OBJECT
EVENT < ALL
SEARCH-FOR-LOST-OBJECT < EVENT
";
        KnowledgeBase::with_ontology(&parse_ontology(src).unwrap()).unwrap()
    }

    #[test]
    fn assert_minimal_insert() {
        let mut kb = small_kb();
        let sm = kb.sm();
        let id = kb
            .assert_frame(
                Frame::instance("KEY-1", "KEY").with("color", Value::sym("red")),
                &sm,
            )
            .unwrap();
        assert_eq!(id, "KEY-1");
        assert_eq!(kb.get(&id).unwrap().first_sym("color"), Some("red"));
    }

    #[test]
    fn assert_duplicate_is_rejected() {
        let mut kb = small_kb();
        let sm = kb.sm();
        kb.assert_frame(Frame::instance("KEY-1", "KEY"), &sm).unwrap();
        let err = kb.assert_frame(Frame::instance("KEY-1", "KEY"), &sm).unwrap_err();
        assert_eq!(err, KnowledgeError::DuplicateId("KEY-1".into()));
    }

    #[test]
    fn assert_unknown_space() {
        let mut kb = small_kb();
        let err = kb
            .assert_frame(Frame::instance("KEY-1", "KEY"), &"nowhere".into())
            .unwrap_err();
        assert!(matches!(err, KnowledgeError::UnknownSpace(_)));
    }

    #[test]
    fn human_team_leader_is_queryable() {
        let mut kb = small_kb();
        let sm = kb.sm();
        kb.assert_frame(
            Frame::instance("DANNY-1", "HUMAN").with("role", Value::sym("team-leader")),
            &sm,
        )
        .unwrap();
        let got = kb.query(&QueryPattern::concept("HUMAN").in_space(sm)).unwrap();
        assert_eq!(got, vec![FrameId::from("DANNY-1")]);
    }

    #[test]
    fn instantiate_counts_per_concept() {
        let mut kb = small_kb();
        let sm = kb.sm();
        let mut b = BTreeMap::new();
        b.insert("color".to_string(), vec![Value::sym("red")]);
        assert_eq!(kb.instantiate("KEY", b.clone(), &sm).unwrap(), "KEY-1");
        assert_eq!(kb.instantiate("KEY", b, &sm).unwrap(), "KEY-2");
        assert_eq!(kb.instantiate("MUG", BTreeMap::new(), &sm).unwrap(), "MUG-1");
    }

    #[test]
    fn instantiate_plan_frame_references_object() {
        let mut kb = small_kb();
        let sm = kb.sm();
        let key = kb.instantiate("KEY", BTreeMap::new(), &sm).unwrap();
        let mut b = BTreeMap::new();
        b.insert("object".to_string(), vec![Value::Ref(key.clone())]);
        let plan = kb.instantiate("SEARCH-FOR-LOST-OBJECT", b, &sm).unwrap();
        assert_eq!(kb.get(&plan).unwrap().first_ref("object"), Some(&key));
    }

    #[test]
    fn instantiate_unknown_concept() {
        let mut kb = small_kb();
        let sm = kb.sm();
        assert_eq!(
            kb.instantiate("UNKNOWN-THING", BTreeMap::new(), &sm),
            Err(KnowledgeError::UnknownConcept("UNKNOWN-THING".into()))
        );
    }

    #[test]
    fn instantiate_skips_preseeded_ids() {
        let mut kb = small_kb();
        let lte = kb.episodic();
        kb.assert_frame(Frame::instance("KEY-1", "KEY"), &lte).unwrap();
        assert_eq!(kb.instantiate("KEY", BTreeMap::new(), &lte).unwrap(), "KEY-2");
    }

    fn vmr(kb: &mut KnowledgeBase, ty: &str, feats: &[(&str, &str)]) -> FrameId {
        let sm = kb.sm();
        let mut b = BTreeMap::new();
        b.insert(VMR_TYPE.to_string(), vec![Value::sym(ty)]);
        for (k, v) in feats {
            b.insert(k.to_string(), vec![Value::sym(*v)]);
        }
        kb.instantiate("VMR", b, &sm).unwrap()
    }

    #[test]
    fn grounding_matches_on_features() {
        let mut kb = small_kb();
        let lte = kb.episodic();
        kb.assert_frame(
            Frame::instance("KEY-1", "KEY").with("color", Value::sym("red")),
            &lte,
        )
        .unwrap();
        let v = vmr(&mut kb, "KEY", &[("color", "red")]);
        let r = kb.ground_percept(&v, "KEY").unwrap();
        assert_eq!(r.matched, Some(FrameId::from("KEY-1")));
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn grounding_rejects_other_concept() {
        let mut kb = small_kb();
        let lte = kb.episodic();
        kb.assert_frame(
            Frame::instance("KEY-1", "KEY").with("color", Value::sym("red")),
            &lte,
        )
        .unwrap();
        let v = vmr(&mut kb, "MUG", &[("color", "red")]);
        let r = kb.ground_percept(&v, "KEY").unwrap();
        assert_eq!(r.matched, None);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn grounding_rejects_wrong_feature_value() {
        let mut kb = small_kb();
        let lte = kb.episodic();
        kb.assert_frame(
            Frame::instance("KEY-1", "KEY").with("color", Value::sym("red")),
            &lte,
        )
        .unwrap();
        let v = vmr(&mut kb, "KEY", &[("color", "blue")]);
        let r = kb.ground_percept(&v, "KEY").unwrap();
        assert_eq!(r.matched, None);
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn grounding_ties_prefer_lowest_id() {
        let mut kb = small_kb();
        let lte = kb.episodic();
        kb.assert_frame(Frame::instance("KEY-10", "KEY"), &lte).unwrap();
        kb.assert_frame(Frame::instance("KEY-2", "KEY"), &lte).unwrap();
        let v = vmr(&mut kb, "KEY", &[]);
        let r = kb.ground_percept(&v, "KEY").unwrap();
        assert_eq!(r.matched, Some(FrameId::from("KEY-2")));
    }

    #[test]
    fn grounding_unknown_concept() {
        let mut kb = small_kb();
        let v = vmr(&mut kb, "KEY", &[]);
        assert!(matches!(
            kb.ground_percept(&v, "WIDGET"),
            Err(KnowledgeError::UnknownConcept(_))
        ));
    }

    #[test]
    fn dump_format() {
        let mut kb = small_kb();
        let sm = kb.sm();
        kb.assert_frame(
            Frame::instance("KEY-1", "KEY")
                .with("color", Value::sym("red"))
                .with("owned-by", Value::reference("DANNY-1")),
            &sm,
        )
        .unwrap();
        let dump = kb.dump();
        assert!(dump.contains("sm | KEY-1 | KEY | color=red;owned-by=#DANNY-1\n"));
        assert!(dump.contains("ontology | KEY | KEY | is-a=#PHYSICAL-OBJECT\n"));
        assert_eq!(kb.dangling_refs().len(), 1);
    }

    #[test]
    fn feature_properties_come_from_ontology() {
        let kb = small_kb();
        assert!(kb.is_feature("color"));
        assert!(kb.is_feature("keychain-color"));
        assert!(!kb.is_feature("owned-by"));
        assert!(!kb.is_feature("physical-feature"));
    }
}
