use std::collections::BTreeMap;

use super::*;
use crate::assets;
use crate::world::Scenario;

fn world_with(ugv: [i32; 2], drone: [i32; 2]) -> World {
    let mut s = Scenario::from_toml(assets::SCENARIO).unwrap();
    s.robots[0].base = ugv;
    s.robots[1].base = drone;
    World::new(s, 1).unwrap()
}

fn run(world: &mut World, tacs: &mut [Tactical], ticks: u64) -> Vec<SensingFrame> {
    let mut frames = Vec::new();
    for _ in 0..ticks {
        let t = world.tick;
        let mut acts = BTreeMap::new();
        for tac in tacs.iter_mut() {
            acts.insert(tac.robot.clone(), tac.tick(world, t).unwrap());
        }
        world.step(&acts);
        for tac in tacs.iter_mut() {
            frames.push(tac.sense(world, t));
        }
    }
    frames
}

fn search(id: u64, zone: &str) -> ActionCommand {
    ActionCommand::new(id, Verb::SearchZone, 0).arg("zone", zone)
}

#[test]
fn unsupported_verb_is_rejected() {
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    assert_eq!(
        t.ingest(&ActionCommand::new(1, Verb::Scan, 0)),
        CommandStatus::Failed("unsupported-verb".into())
    );
    assert_eq!(
        t.ingest(&ActionCommand::new(2, Verb::SearchZone, 0)),
        CommandStatus::Failed("bad-arguments".into())
    );
}

#[test]
fn newer_command_preempts_older() {
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    t.ingest(&search(1, "LIVING-ROOM-1"));
    t.ingest(&search(2, "ENTRY-WAY-1"));
    assert_eq!(t.status(1), Some(&CommandStatus::Failed("preempted".into())));
    assert_eq!(t.status(2), Some(&CommandStatus::Accepted));
    assert_eq!(t.blackboard().text("search.zone"), Some("ENTRY-WAY-1"));
}

#[test]
fn stop_cancels_and_clears_pending() {
    let mut w = world_with([18, 1], [13, 2]);
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    t.ingest(&search(1, "ENTRY-WAY-1"));
    run(&mut w, std::slice::from_mut(&mut t), 2);
    assert_eq!(t.status(1), Some(&CommandStatus::Running));
    t.ingest(&ActionCommand::new(2, Verb::Stop, 2).arg("command", "1"));
    assert_eq!(t.status(1), Some(&CommandStatus::Failed("stopped".into())));
    assert!(!t.blackboard().flag("pending-search"));
    let f = run(&mut w, std::slice::from_mut(&mut t), 1);
    assert_eq!(f[0].status[&1], CommandStatus::Failed("stopped".into()));
    assert_eq!(f[0].status[&2], CommandStatus::Done);
}

#[test]
fn search_visits_waypoints_in_order_with_dwell() {
    let mut w = world_with([10, 11], [13, 2]);
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    t.ingest(&search(1, "UNDER-SOFA-1"));
    let frames = run(&mut w, std::slice::from_mut(&mut t), 40);
    let order: Vec<usize> = t.visits.iter().map(|v| v.index).collect();
    assert_eq!(order, [0, 1]);
    assert_eq!(t.visits[0].cell, (12, 9));
    let done_at = frames
        .iter()
        .position(|f| f.status.get(&1) == Some(&CommandStatus::Done))
        .expect("search finishes");
    assert_eq!(frames[done_at].tick, t.visits[1].tick);
    // the book under the sofa was seen on the way
    assert!(frames
        .iter()
        .any(|f| f.detections.iter().any(|d| d.object_type == "BOOK")));
    // every dwell is its own tick, after arriving on the waypoint
    let dwell: Vec<&String> = t.trace.iter().filter(|l| l.contains(",dwell:")).collect();
    assert_eq!(dwell.len(), 2);
}

#[test]
fn inaccessible_zone_fails_immediately() {
    let mut w = world_with([18, 1], [13, 2]);
    let mut t = Tactical::new("DRONE-1", RobotClass::Drone, 1, false, false);
    t.ingest(&search(1, "UNDER-SOFA-1"));
    let f = run(&mut w, std::slice::from_mut(&mut t), 1);
    assert_eq!(f[0].status[&1], CommandStatus::Failed("inaccessible".into()));
    assert!(t.visits.is_empty());
}

#[test]
fn zone_without_waypoints_is_done_at_once() {
    let mut s = Scenario::from_toml(assets::SCENARIO).unwrap();
    s.zones[3].waypoints.clear();
    let mut w = World::new(s, 1).unwrap();
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    t.ingest(&search(1, "ENTRY-WAY-1"));
    let f = run(&mut w, std::slice::from_mut(&mut t), 1);
    assert_eq!(f[0].status[&1], CommandStatus::Done);
}

#[test]
fn blocked_path_triggers_sidestep() {
    // the drone sits on the UGV's next cell toward the living-room waypoint
    let mut w = world_with([12, 5], [12, 4]);
    let mut ugv = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    let drone = Tactical::new("DRONE-1", RobotClass::Drone, 1, false, false);
    ugv.ingest(&search(1, "LIVING-ROOM-1"));
    let mut tacs = [drone, ugv];
    run(&mut w, &mut tacs, 1);
    assert!(tacs[1].bt_trace.iter().any(|l| l == "0,UGV-1,collision?,success"));
    assert!(tacs[1].trace[0].contains("sidestep:"), "{}", tacs[1].trace[0]);
    run(&mut w, &mut tacs, 30);
    assert_eq!(tacs[1].visits.len(), 3);
}

#[test]
fn goto_scan_and_pick() {
    let mut w = world_with([13, 8], [13, 2]);
    let mut ugv = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    ugv.ingest(&ActionCommand::new(1, Verb::Goto, 0).arg("cell", "14:8"));
    run(&mut w, std::slice::from_mut(&mut ugv), 2);
    assert_eq!(ugv.status(1), Some(&CommandStatus::Done));
    ugv.ingest(&ActionCommand::new(2, Verb::Pick, 2).arg("object", "OBJ-BOOK"));
    run(&mut w, std::slice::from_mut(&mut ugv), 2);
    assert_eq!(ugv.status(2), Some(&CommandStatus::Done));
    assert_eq!(w.body("UGV-1").unwrap().carrying.as_deref(), Some("OBJ-BOOK"));

    let mut drone = Tactical::new("DRONE-1", RobotClass::Drone, 1, false, false);
    drone.ingest(&ActionCommand::new(3, Verb::Scan, 4));
    run(&mut w, std::slice::from_mut(&mut drone), 2);
    assert_eq!(drone.status(3), Some(&CommandStatus::Done));
}

#[test]
fn idle_robot_returns_to_base() {
    let mut w = world_with([10, 11], [13, 2]);
    w.bodies[1].pose = (10, 8);
    let mut t = Tactical::new("UGV-1", RobotClass::Ugv, 1, false, false);
    run(&mut w, std::slice::from_mut(&mut t), 5);
    assert_eq!(w.body("UGV-1").unwrap().pose, (10, 11));
    assert!(t.trace[0].contains("return:"));
    assert!(t.bt_trace.iter().any(|l| l.ends_with("wait-at-base,running")));
}
