use hrteam::assets;
use hrteam::knowledge::{parse_ontology, Frame, FrameId, KnowledgeBase, Value};
use hrteam::language::{
    addressee_class, analyze, generate, AddresseeClass, Filler, LanguageError, Lexicon, Meaning, SpeechAct,
    UNRESOLVED,
};
use proptest::prelude::*;

fn lexicon() -> Lexicon {
    Lexicon::parse(assets::LEXICON).unwrap()
}

fn world() -> KnowledgeBase {
    let mut kb = KnowledgeBase::with_ontology(&parse_ontology(assets::ONTOLOGY).unwrap()).unwrap();
    let sm = kb.sm();
    let frames = [
        Frame::instance("HUMAN-1", "HUMAN").with("name", Value::sym("Danny")),
        Frame::instance("UGV-1", "UGV").with("name", Value::sym("UGV")),
        Frame::instance("DRONE-1", "DRONE").with("name", Value::sym("drone")),
        Frame::instance("APARTMENT-1", "APARTMENT").with("label", Value::sym("apartment")),
        Frame::instance("ENTRY-WAY-1", "ENTRY-WAY").with("label", Value::sym("entry-way")),
        Frame::instance("LIVING-ROOM-1", "LIVING-ROOM").with("label", Value::sym("living-room")),
        Frame::instance("UNDER-SOFA-1", "UNDER-SOFA").with("label", Value::sym("under-sofa")),
    ];
    for f in frames {
        kb.assert_frame(f, &sm).unwrap();
    }
    kb
}

fn id(s: &str) -> FrameId {
    FrameId::from(s)
}

fn with_keys(kb: &mut KnowledgeBase) {
    let sm = kb.sm();
    kb.assert_frame(
        Frame::instance("KEY-1", "KEY").with("owned-by", Value::reference("HUMAN-1")),
        &sm,
    )
    .unwrap();
}

#[test]
fn task_request_from_danny() {
    let lex = lexicon();
    let mut kb = world();
    let t = analyze(
        &lex,
        &kb,
        "Robots, please find my keys.",
        &id("HUMAN-1"),
        &id("team"),
    );
    assert_eq!(t.speech_act, SpeechAct::RequestAction);
    assert_eq!(t.concept, "SEARCH-FOR-LOST-OBJECT");
    // no keys known yet: the referent is new and owned by the speaker
    assert_eq!(
        t.slots["object"],
        vec![Filler::New {
            concept: "KEY".into(),
            owner: Some(id("HUMAN-1"))
        }]
    );
    with_keys(&mut kb);
    let t = analyze(
        &lex,
        &kb,
        "Robots, please find my keys.",
        &id("HUMAN-1"),
        &id("team"),
    );
    assert_eq!(t.slot_ref("object"), Some(&id("KEY-1")));
}

#[test]
fn feature_answer_targets_the_keys() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    let t = analyze(
        &lex,
        &kb,
        "They have a red keychain.",
        &id("HUMAN-1"),
        &id("UGV-1"),
    );
    assert_eq!(t.speech_act, SpeechAct::Inform);
    assert_eq!(t.concept, "OBJECT-FEATURES");
    assert_eq!(t.slot_ref("object"), Some(&id("KEY-1")));
    assert_eq!(t.slot_values("keychain-color"), vec![&Value::sym("red")]);
}

#[test]
fn last_seen_answer() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    let t = analyze(
        &lex,
        &kb,
        "I last saw them in the entry-way.",
        &id("HUMAN-1"),
        &id("UGV-1"),
    );
    assert_eq!(t.concept, "LAST-SEEN-AT");
    assert_eq!(t.slot_ref("location"), Some(&id("ENTRY-WAY-1")));
}

#[test]
fn gibberish_is_unresolved() {
    let lex = lexicon();
    let kb = world();
    let before = kb.dump();
    let t = analyze(&lex, &kb, "zzz qqq", &id("HUMAN-1"), &id("UGV-1"));
    assert!(t.unresolved);
    assert_eq!(t.speech_act, SpeechAct::Inform);
    assert_eq!(t.concept, UNRESOLVED);
    assert_eq!(kb.dump(), before);
}

#[test]
fn found_report_differs_by_register() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    let mr = Meaning::new(SpeechAct::Inform, "OBJECT-LOCATION")
        .with("object", Value::reference("KEY-1"))
        .with("zone", Value::reference("ENTRY-WAY-1"));
    let to_drone = generate(&lex, &kb, &mr, &id("UGV-1"), &id("DRONE-1")).unwrap();
    let to_danny = generate(&lex, &kb, &mr, &id("UGV-1"), &id("HUMAN-1")).unwrap();
    assert_eq!(to_drone, "Danny's keys found at entry-way.");
    assert_eq!(to_danny, "I found your keys in the entry-way.");
}

#[test]
fn feature_question_mentions_keys() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    let mr =
        Meaning::new(SpeechAct::RequestInfo, "OBJECT-FEATURES").with("object", Value::reference("KEY-1"));
    let q = generate(&lex, &kb, &mr, &id("UGV-1"), &id("HUMAN-1")).unwrap();
    assert_eq!(q, "Danny, what do your keys look like?");
}

#[test]
fn unregistered_key_is_missing_template() {
    let lex = lexicon();
    let kb = world();
    let mr = Meaning::new(SpeechAct::RequestAction, "OBJECT-LOCATION");
    let err = generate(&lex, &kb, &mr, &id("UGV-1"), &id("HUMAN-1")).unwrap_err();
    assert_eq!(
        err,
        LanguageError::MissingTemplate {
            act: SpeechAct::RequestAction,
            concept: "OBJECT-LOCATION".into(),
            class: AddresseeClass::Human
        }
    );
    assert!(err.to_string().contains("REQUEST-ACTION OBJECT-LOCATION"));
}

#[test]
fn team_broadcast_uses_robot_register() {
    let kb = world();
    assert_eq!(addressee_class(&kb, &id("team")), AddresseeClass::Robot);
    assert_eq!(addressee_class(&kb, &id("HUMAN-1")), AddresseeClass::Human);
}

/// A filled meaning for every shipped generation key.
fn sample_meanings(lex: &Lexicon) -> Vec<Meaning> {
    let mut out = Vec::new();
    for e in &lex.entries {
        let mut mr = Meaning::new(e.speech_act, &e.concept);
        for t in e.templates.values() {
            for part in &t.parts {
                if let hrteam::language::TemplatePart::Slot { name, kind } = part {
                    use hrteam::language::SlotKind::*;
                    let v = match kind {
                        Np => vec![Value::reference("KEY-1")],
                        Zone => vec![Value::reference("ENTRY-WAY-1")],
                        Zones => vec![Value::reference("ENTRY-WAY-1"), Value::reference("LIVING-ROOM-1")],
                        Color => vec![Value::sym("red")],
                        Noun => vec![Value::sym("KEY")],
                        Name => continue,
                    };
                    let v = if name == "location" && e.concept == "LOCATION-CONSTRAINED" {
                        vec![Value::reference("APARTMENT-1")]
                    } else {
                        v
                    };
                    mr = mr.with_all(name, v);
                }
            }
        }
        out.push(mr);
    }
    out
}

#[test]
fn round_trip_every_template() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    for mr in sample_meanings(&lex) {
        for addressee in ["HUMAN-1", "DRONE-1"] {
            let text = generate(&lex, &kb, &mr, &id("UGV-1"), &id(addressee)).unwrap();
            let t = analyze(&lex, &kb, &text, &id("UGV-1"), &id(addressee));
            assert!(!t.unresolved, "{text:?} did not analyze");
            assert_eq!(
                (t.speech_act, &t.concept),
                (mr.speech_act, &mr.concept),
                "{text:?}"
            );
            let class = addressee_class(&kb, &id(addressee));
            let rendered: Vec<String> = lex
                .template(mr.speech_act, &mr.concept, class)
                .unwrap()
                .parts
                .iter()
                .filter_map(|p| match p {
                    hrteam::language::TemplatePart::Slot { name, .. } => Some(name.clone()),
                    _ => None,
                })
                .collect();
            for (slot, values) in mr.slots.iter().filter(|(k, _)| rendered.contains(k)) {
                let got: Vec<Value> = t.slot_values(slot).into_iter().cloned().collect();
                assert_eq!(&got, values, "slot {slot} of {text:?}");
            }
        }
    }
}

#[test]
fn registers_diverge_for_every_key() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    for mr in sample_meanings(&lex) {
        let h = generate(&lex, &kb, &mr, &id("UGV-1"), &id("HUMAN-1")).unwrap();
        let r = generate(&lex, &kb, &mr, &id("UGV-1"), &id("DRONE-1")).unwrap();
        assert_ne!(h, r, "{} {}", mr.speech_act, mr.concept);
    }
}

#[test]
fn referents_are_stable() {
    let lex = lexicon();
    let mut kb = world();
    with_keys(&mut kb);
    let a = analyze(
        &lex,
        &kb,
        "I last saw them in the entry-way",
        &id("HUMAN-1"),
        &id("UGV-1"),
    );
    let b = analyze(
        &lex,
        &kb,
        "I last saw them in the entry-way",
        &id("HUMAN-1"),
        &id("UGV-1"),
    );
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn analyzer_is_total(words in proptest::collection::vec(
        prop_oneof![
            "[a-z']{1,8}",
            Just("keys".to_string()), Just("my".to_string()), Just("the".to_string()),
            Just("entry-way".to_string()), Just("and".to_string()), Just("red".to_string()),
            Just("find".to_string()), Just("they".to_string()), Just(",".to_string()),
        ],
        0..14,
    )) {
        let lex = lexicon();
        let mut kb = world();
        with_keys(&mut kb);
        let text = words.join(" ");
        let t = analyze(&lex, &kb, &text, &id("HUMAN-1"), &id("UGV-1"));
        prop_assert_eq!(t.source, text);
        prop_assert_eq!(t.unresolved, t.concept == UNRESOLVED);
    }
}
