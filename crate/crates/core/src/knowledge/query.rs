use super::{FrameId, FrameKind, KnowledgeBase, KnowledgeError, Result, SpaceId, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum ConceptPattern {
    Any,
    Concept(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Equals(Value),
    Exists,
    /// Some value of the property is in the set.
    MemberOf(Vec<Value>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryPattern {
    pub concept: ConceptPattern,
    pub constraints: Vec<(String, Predicate)>,
    pub spaces: Vec<SpaceId>,
    pub transitive: bool,
}

impl QueryPattern {
    /// Matches instances of `concept` or any of its descendants.
    pub fn concept(concept: &str) -> Self {
        QueryPattern {
            concept: ConceptPattern::Concept(concept.to_string()),
            constraints: Vec::new(),
            spaces: Vec::new(),
            transitive: true,
        }
    }

    pub fn any() -> Self {
        QueryPattern {
            concept: ConceptPattern::Any,
            constraints: Vec::new(),
            spaces: Vec::new(),
            transitive: true,
        }
    }

    pub fn exact(mut self) -> Self {
        self.transitive = false;
        self
    }

    pub fn in_space(mut self, space: SpaceId) -> Self {
        self.spaces.push(space);
        self
    }

    pub fn where_(mut self, prop: &str, pred: Predicate) -> Self {
        self.constraints.push((prop.to_string(), pred));
        self
    }
}

pub(super) fn run(kb: &KnowledgeBase, pattern: &QueryPattern) -> Result<Vec<FrameId>> {
    if pattern.spaces.is_empty() {
        return Err(KnowledgeError::NoSpaces);
    }
    let mut wanted = Vec::with_capacity(pattern.spaces.len());
    for s in &pattern.spaces {
        wanted.push(kb.space_index(s)?);
    }
    let mut out = Vec::new();
    // spaces are visited in creation order regardless of how the pattern lists them
    for (idx, space) in kb.spaces.iter().enumerate() {
        if !wanted.contains(&idx) {
            continue;
        }
        for id in &space.order {
            let f = kb.get(id).expect("ordered frame exists");
            let concept_ok = match &pattern.concept {
                ConceptPattern::Any => true,
                ConceptPattern::Concept(c) => {
                    f.kind == FrameKind::Instance
                        && if pattern.transitive {
                            kb.is_a(&f.concept, c)
                        } else {
                            &f.concept == c
                        }
                }
            };
            if !concept_ok {
                continue;
            }
            let props_ok = pattern.constraints.iter().all(|(k, pred)| {
                let vals = f.get(k);
                match pred {
                    Predicate::Exists => !vals.is_empty(),
                    Predicate::Equals(v) => vals.contains(v),
                    Predicate::MemberOf(set) => vals.iter().any(|v| set.contains(v)),
                }
            });
            if props_ok {
                out.push(id.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_ontology, Frame};
    use super::*;

    fn kb() -> KnowledgeBase {
        let src = "ALL\nAGENT < ALL\nROBOT < AGENT\nUGV < ROBOT\nDRONE < ROBOT\nHUMAN < AGENT\nKEY < ALL\n";
        KnowledgeBase::with_ontology(&parse_ontology(src).unwrap()).unwrap()
    }

    #[test]
    fn one_hop_inheritance() {
        let mut kb = kb();
        let sm = kb.sm();
        kb.assert_frame(Frame::instance("UGV-1", "UGV"), &sm).unwrap();
        let got = kb
            .query(&QueryPattern::concept("ROBOT").in_space(sm.clone()))
            .unwrap();
        assert_eq!(got, vec![FrameId::from("UGV-1")]);
        let exact = kb
            .query(&QueryPattern::concept("ROBOT").exact().in_space(sm))
            .unwrap();
        assert!(exact.is_empty());
    }

    #[test]
    fn empty_store_yields_nothing() {
        let kb = kb();
        let q = QueryPattern::concept("KEY")
            .where_("color", Predicate::Exists)
            .in_space(kb.sm());
        assert!(kb.query(&q).unwrap().is_empty());
    }

    #[test]
    fn pattern_without_spaces_is_invalid() {
        let kb = kb();
        assert_eq!(kb.query(&QueryPattern::any()), Err(KnowledgeError::NoSpaces));
    }

    #[test]
    fn unknown_space_in_pattern() {
        let kb = kb();
        let q = QueryPattern::any().in_space("nope".into());
        assert!(matches!(kb.query(&q), Err(KnowledgeError::UnknownSpace(_))));
    }

    #[test]
    fn ordering_is_space_then_insertion() {
        let mut kb = kb();
        let sm = kb.sm();
        let lte = kb.episodic();
        kb.assert_frame(Frame::instance("KEY-9", "KEY"), &lte).unwrap();
        kb.assert_frame(Frame::instance("KEY-3", "KEY"), &sm).unwrap();
        kb.assert_frame(Frame::instance("KEY-1", "KEY"), &sm).unwrap();
        let q = QueryPattern::concept("KEY").in_space(lte).in_space(sm);
        let got: Vec<String> = kb.query(&q).unwrap().iter().map(|f| f.to_string()).collect();
        assert_eq!(got, ["KEY-3", "KEY-1", "KEY-9"]);
    }
}
