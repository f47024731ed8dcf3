use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use hrteam::comms::{Channel, Envelope};
use hrteam::service::{start, ClientCommand, Frame, Reply, ServeConfig, Session};
use hrteam::sim::{HumanScript, SimConfig};
use serde_json::Value;

const FRAMES: &str = include_str!("fixtures/wire_frames.txt");
const SCHEMA: &str = include_str!("fixtures/wire_schema.json");

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn strs(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn fixture_frames_match_schema_and_types() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    for raw in FRAMES.lines().filter(|l| !l.starts_with('#')) {
        let mut parts = raw.splitn(3, ' ');
        let (dir, kind, text) = (
            parts.next().unwrap(),
            parts.next().unwrap(),
            parts.next().unwrap(),
        );
        let line: Value = serde_json::from_str(text).unwrap();
        let line = &line;
        match dir {
            "in" => {
                let cmd = ClientCommand::parse(text).unwrap();
                assert_eq!(cmd.op(), kind);
                let spec = &schema["command"][kind];
                let mut allowed = strs(&spec["required"]);
                allowed.extend(strs(&spec["optional"]));
                for k in strs(&spec["required"]) {
                    assert!(line.get(&k).is_some(), "{kind} lacks {k}");
                }
                for k in keys(line) {
                    assert!(allowed.contains(&k), "{kind} has stray {k}");
                }
            }
            _ => {
                let frame = Frame::parse(text).unwrap();
                let (reserialized, required) = match &frame {
                    Frame::Envelope(e) => {
                        assert_eq!(kind, "envelope");
                        let chans = strs(&schema["envelope"]["channel"]);
                        assert!(chans.contains(&e.channel.to_string()));
                        (e.to_line(), strs(&schema["envelope"]["required"]))
                    }
                    Frame::Reply(r) => (r.to_line(), strs(&schema["reply"][kind])),
                };
                // field order is part of the wire format
                assert_eq!(reserialized, text);
                assert_eq!(keys(line).len(), required.len());
                for k in required {
                    assert!(line.get(&k).is_some(), "{kind} lacks {k}");
                }
            }
        }
    }
}

#[test]
fn map_snapshots_match_schema() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let sim = hrteam::sim::Sim::new(SimConfig::shipped().unwrap()).unwrap();
    let map = sim.bus.log().iter().find(|e| e.channel == Channel::Map).unwrap();
    let snap = map.attached_mr.as_ref().unwrap();
    for k in strs(&schema["map-snapshot"]["required"]) {
        assert!(snap.get(&k).is_some(), "map lacks {k}");
    }
}

fn live_session() -> Session {
    let mut cfg = SimConfig::shipped().unwrap();
    cfg.human = HumanScript::default();
    Session::new(cfg).unwrap()
}

fn serve_paused() -> hrteam::service::ServerHandle {
    let cfg = ServeConfig {
        addr: "127.0.0.1:0".into(),
        tick: Duration::from_millis(5),
        paused: true,
        ..ServeConfig::default()
    };
    start(live_session(), cfg).unwrap()
}

struct Ndjson {
    w: TcpStream,
    r: BufReader<TcpStream>,
}

impl Ndjson {
    fn connect(addr: std::net::SocketAddr) -> Self {
        let w = TcpStream::connect(addr).unwrap();
        w.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let r = BufReader::new(w.try_clone().unwrap());
        Ndjson { w, r }
    }

    fn send(&mut self, line: &str) {
        self.w.write_all(format!("{line}\n").as_bytes()).unwrap();
    }

    fn next(&mut self) -> Frame {
        let mut s = String::new();
        self.r.read_line(&mut s).unwrap();
        Frame::parse(s.trim()).unwrap_or_else(|e| panic!("{e}: {s}"))
    }

    fn until_reply(&mut self, seen: &mut Vec<Envelope>) -> Reply {
        loop {
            match self.next() {
                Frame::Reply(r) => return r,
                Frame::Envelope(e) => seen.push(e),
            }
        }
    }
}

#[test]
fn tcp_subscribe_chat_and_errors() {
    let server = serve_paused();
    let mut c = Ndjson::connect(server.local_addr());
    let mut seen = Vec::new();

    c.send("this is not json");
    assert!(matches!(c.until_reply(&mut seen), Reply::Error { .. }));
    c.send(r#"{"op":"subscribe"}"#);
    c.send(r#"{"op":"chat","text":"Robots, please find my keys."}"#);
    assert_eq!(c.until_reply(&mut seen), Reply::Ack { op: "chat".into() });
    c.send(r#"{"op":"step","ticks":2}"#);
    assert_eq!(c.until_reply(&mut seen), Reply::Ack { op: "step".into() });
    c.send(r#"{"op":"status"}"#);
    let status = c.until_reply(&mut seen);
    assert!(
        matches!(
            status,
            Reply::Status {
                tick: 2,
                paused: true,
                ..
            }
        ),
        "{status:?}"
    );

    // drain the envelopes of the two stepped ticks
    let deadline = Instant::now() + Duration::from_secs(10);
    while !seen.iter().any(|e| e.channel == Channel::Map && e.tick == 2) {
        assert!(Instant::now() < deadline);
        if let Frame::Envelope(e) = c.next() {
            seen.push(e);
        }
    }
    let seqs: Vec<u64> = seen.iter().map(|e| e.seq).collect();
    assert_eq!(
        seqs,
        (0..seqs.len() as u64).collect::<Vec<_>>(),
        "no loss, in order"
    );
    assert!(seen
        .iter()
        .any(|e| e.channel == Channel::Chat && e.sender == "HUMAN-1" && e.tick == 1));

    let report = server.shutdown().unwrap();
    assert_eq!(report.ticks, 2);
}

#[test]
fn late_subscriber_gets_history_then_live() {
    let server = serve_paused();
    let mut a = Ndjson::connect(server.local_addr());
    let mut seen = Vec::new();
    a.send(r#"{"op":"step","ticks":3}"#);
    assert_eq!(a.until_reply(&mut seen), Reply::Ack { op: "step".into() });

    let mut b = Ndjson::connect(server.local_addr());
    b.send(r#"{"op":"subscribe","from":0}"#);
    b.send(r#"{"op":"status"}"#);
    let mut history = Vec::new();
    b.until_reply(&mut history);
    assert_eq!(history.first().map(|e| e.seq), Some(0));
    assert_eq!(history.last().unwrap().tick, 3);
    server.shutdown().unwrap();
}

#[test]
fn websocket_upgrade_streams_the_same_frames() {
    let server = serve_paused();
    let url = format!("ws://{}/", server.local_addr());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    ws.send(tungstenite::Message::Text(r#"{"op":"subscribe"}"#.into()))
        .unwrap();
    ws.send(tungstenite::Message::Text(r#"{"op":"status"}"#.into()))
        .unwrap();
    let mut envs = Vec::new();
    loop {
        let msg = ws.read().unwrap();
        let tungstenite::Message::Text(t) = msg else {
            continue;
        };
        match Frame::parse(t.as_str()).unwrap() {
            Frame::Envelope(e) => envs.push(e),
            Frame::Reply(Reply::Status { tick, .. }) => {
                assert_eq!(tick, 0);
                break;
            }
            Frame::Reply(r) => panic!("unexpected {r:?}"),
        }
    }
    assert!(envs.iter().any(|e| e.channel == Channel::Map));
    let _ = ws.close(None);
    server.shutdown().unwrap();
}

#[test]
fn unpaused_server_runs_to_the_end_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServeConfig {
        addr: "127.0.0.1:0".into(),
        tick: Duration::from_millis(1),
        out: Some(dir.path().to_path_buf()),
        ..ServeConfig::default()
    };
    let server = start(Session::new(SimConfig::shipped().unwrap()).unwrap(), cfg).unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    while !dir.path().join("report.json").exists() {
        assert!(Instant::now() < deadline, "run did not finish");
        std::thread::sleep(Duration::from_millis(10));
    }
    let report = server.shutdown().unwrap();
    let headless = hrteam::sim::Sim::new(SimConfig::shipped().unwrap())
        .unwrap()
        .run()
        .unwrap();
    assert_eq!(report.transcript, headless.transcript);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap(),
        headless.transcript
    );
}

#[test]
fn bind_failure_is_reported() {
    let first = serve_paused();
    let cfg = ServeConfig {
        addr: first.local_addr().to_string(),
        ..ServeConfig::default()
    };
    assert!(matches!(
        start(live_session(), cfg),
        Err(hrteam::service::ServiceError::Bind { .. })
    ));
    first.shutdown().unwrap();
}
