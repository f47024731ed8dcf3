use super::*;
use crate::sim::{HumanScript, Trigger};

fn env(seq: u64, channel: Channel) -> Envelope {
    Envelope {
        seq,
        tick: 0,
        channel,
        sender: "WORLD".into(),
        addressee: "ui".into(),
        surface: String::new(),
        attached_mr: None,
    }
}

#[test]
fn commands_parse_with_defaults() {
    assert_eq!(
        ClientCommand::parse(r#"{"op":"subscribe"}"#).unwrap(),
        ClientCommand::Subscribe { from: 0 }
    );
    assert_eq!(
        ClientCommand::parse(r#"{"op":"chat","text":"hi"}"#).unwrap(),
        ClientCommand::Chat {
            addressee: "team".into(),
            text: "hi".into()
        }
    );
    assert_eq!(
        ClientCommand::parse(r#"{"op":"step"}"#).unwrap(),
        ClientCommand::Step { ticks: 1 }
    );
    assert!(ClientCommand::parse(r#"{"op":"launch"}"#).is_err());
    assert!(ClientCommand::parse(r#"{"op":"chat","text":"hi","loud":true}"#).is_err());
    assert!(ClientCommand::parse("not json").is_err());
}

#[test]
fn frames_distinguish_envelopes_from_replies() {
    let e = env(3, Channel::Chat);
    assert_eq!(Frame::parse(&e.to_line()).unwrap(), Frame::Envelope(e));
    let r = Reply::Ack { op: "pause".into() };
    assert_eq!(r.to_line(), r#"{"reply":"ack","op":"pause"}"#);
    assert_eq!(Frame::parse(&r.to_line()).unwrap(), Frame::Reply(r));
}

#[test]
fn queue_sheds_oldest_map_frames_only() {
    let mut q = ClientQueue::new(3);
    q.push_envelope(&env(0, Channel::Map));
    q.push_envelope(&env(1, Channel::Chat));
    q.push_envelope(&env(2, Channel::Map));
    q.push_envelope(&env(3, Channel::Chat));
    assert_eq!(q.dropped(), 1);
    q.push_envelope(&env(4, Channel::Chat));
    q.push_envelope(&env(5, Channel::Thought));
    let seqs: Vec<u64> = q
        .drain()
        .iter()
        .map(|l| serde_json::from_str::<Envelope>(l).unwrap().seq)
        .collect();
    assert_eq!(seqs, [1, 3, 4, 5]);
    assert_eq!(q.dropped(), 2);
}

fn live_config() -> SimConfig {
    let mut cfg = SimConfig::shipped().unwrap();
    cfg.human = HumanScript::default();
    cfg
}

#[test]
fn pause_step_resume() {
    let mut s = Session::new(live_config()).unwrap();
    s.apply(&ClientCommand::Pause).unwrap();
    s.tick().unwrap();
    assert_eq!(s.sim().tick(), 0);
    s.apply(&ClientCommand::Step { ticks: 3 }).unwrap();
    assert_eq!(s.sim().tick(), 3);
    s.apply(&ClientCommand::Resume).unwrap();
    assert!(matches!(
        s.apply(&ClientCommand::Step { ticks: 1 }).unwrap(),
        Reply::Error { .. }
    ));
    s.tick().unwrap();
    let digests = s.report().digests;
    let ticks: Vec<u64> = digests
        .iter()
        .map(|d| d.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ticks, [0, 1, 2, 3, 4]);
}

#[test]
fn chat_validation_and_reset() {
    let mut s = Session::new(live_config()).unwrap();
    let bad = ClientCommand::Chat {
        addressee: "ROBOT-9".into(),
        text: "hi".into(),
    };
    assert!(matches!(s.apply(&bad).unwrap(), Reply::Error { .. }));
    for _ in 0..5 {
        s.tick().unwrap();
    }
    assert_eq!(
        s.apply(&ClientCommand::Seed { seed: 9 }).unwrap(),
        Reply::Reset { seed: 9 }
    );
    assert_eq!(s.sim().tick(), 0);
    assert_eq!(s.sim().world.seed(), 9);
}

/// A live human typing the scripted lines at the same ticks produces the
/// headless transcript.
#[test]
fn live_chat_matches_headless_script() {
    let headless = Sim::new(SimConfig::shipped().unwrap()).unwrap().run().unwrap();
    let script = HumanScript::parse(crate::sim::DEFAULT_HUMAN_SCRIPT).unwrap();
    let mut s = Session::new(live_config()).unwrap();
    let mut next = 0;
    while s.outcome().is_none() {
        let tick = s.sim().tick() + 1;
        while let Some(line) = script.lines.get(next) {
            let ready = match &line.trigger {
                Trigger::Tick(n) => *n <= tick,
                Trigger::Await(p) => s
                    .log()
                    .iter()
                    .rev()
                    .take_while(|e| e.tick + 1 == tick)
                    .any(|e| e.channel == Channel::Chat && e.surface.to_lowercase().contains(p.as_str())),
            };
            if !ready {
                break;
            }
            let addressee = if line.addressee == "reply" {
                s.sim().leader().to_string()
            } else {
                line.addressee.clone()
            };
            let cmd = ClientCommand::Chat {
                addressee,
                text: line.text.clone(),
            };
            assert_eq!(s.apply(&cmd).unwrap(), Reply::Ack { op: "chat".into() });
            next += 1;
        }
        s.tick().unwrap();
    }
    let live = s.report();
    assert_eq!(live.outcome, headless.outcome);
    assert_eq!(live.transcript, headless.transcript);
    assert_eq!(live.digests, headless.digests);
}
