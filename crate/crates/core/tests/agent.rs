use std::sync::Arc;

use hrteam::agent::{seed_knowledge, Agent, Outgoing};
use hrteam::assets;
use hrteam::comms::{Channel, Envelope};
use hrteam::knowledge::{parse_ontology, FrameId, KnowledgeBase};
use hrteam::language::Lexicon;
use hrteam::plan::ScriptLibrary;
use hrteam::tactical::Verb;
use hrteam::world::{RobotClass, Scenario};

fn agent(id: &str, class: RobotClass) -> Agent {
    let scenario = Scenario::from_toml(assets::SCENARIO).unwrap();
    let onto = KnowledgeBase::with_ontology(&parse_ontology(assets::ONTOLOGY).unwrap()).unwrap();
    let kb = seed_knowledge(&onto, &scenario).unwrap();
    let lex = Arc::new(Lexicon::parse(assets::LEXICON).unwrap());
    let lib = ScriptLibrary::parse(assets::SCRIPTS).unwrap();
    Agent::new(id, class, kb, lex, lib, &scenario, "UGV-1")
}

fn chat(sender: &str, addressee: &str, surface: &str) -> Envelope {
    Envelope {
        seq: 0,
        tick: 1,
        channel: Channel::Chat,
        sender: sender.into(),
        addressee: addressee.into(),
        surface: surface.into(),
        attached_mr: None,
    }
}

fn chats(posts: &[Outgoing]) -> Vec<(String, String)> {
    posts
        .iter()
        .filter_map(|p| match p {
            Outgoing::Chat {
                addressee, surface, ..
            } => Some((addressee.clone(), surface.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn seeded_knowledge_has_scenario_frames() {
    let a = agent("UGV-1", RobotClass::Ugv);
    let kb = &a.mind.kb;
    for id in [
        "UGV-1",
        "DRONE-1",
        "HUMAN-1",
        "ENTRY-WAY-1",
        "APARTMENT-1",
        "KEY-1",
    ] {
        assert!(kb.get(&FrameId::from(id)).is_some(), "{id}");
    }
    let apt = kb.get(&FrameId::from("APARTMENT-1")).unwrap();
    assert_eq!(apt.get("searchable-zone").len(), 4);
}

#[test]
fn leader_asks_the_human_about_features_first() {
    let mut a = agent("UGV-1", RobotClass::Ugv);
    assert!(!a.started());
    let out = a.step(1, &[chat("HUMAN-1", "team", "Robots, please find my keys.")], &[]);
    assert!(a.started());
    assert_eq!(
        chats(&out.posts),
        [(
            "HUMAN-1".to_string(),
            "Danny, what do your keys look like?".to_string()
        )]
    );
    assert!(out.commands.is_empty());
    assert!(out.posts.iter().any(|p| matches!(p, Outgoing::Agenda(_))));
    assert!(out.posts.iter().any(|p| matches!(p, Outgoing::Tmr(_))));
}

#[test]
fn subordinate_stays_quiet_until_instructed() {
    let mut d = agent("DRONE-1", RobotClass::Drone);
    let out = d.step(1, &[chat("HUMAN-1", "team", "Robots, please find my keys.")], &[]);
    assert!(d.started());
    assert!(chats(&out.posts).is_empty());
    let out = d.step(2, &[], &[]);
    assert!(out.commands.is_empty());

    let order = chat(
        "UGV-1",
        "DRONE-1",
        "Drone: search living-room, kitchen-counter for Danny's keys.",
    );
    let out = d.step(3, &[order], &[]);
    assert_eq!(
        chats(&out.posts),
        [("UGV-1".to_string(), "UGV: plan adopted.".to_string())]
    );
    let out = d.step(4, &[], &[]);
    let cmds = &out.commands;
    assert_eq!(cmds.len(), 1);
    assert_eq!(cmds[0].verb, Verb::SearchZone);
    assert_eq!(
        cmds[0].args.get("zone").map(String::as_str),
        Some("LIVING-ROOM-1")
    );
}
