use super::*;
use crate::assets;

fn scenario() -> Scenario {
    Scenario::from_toml(assets::SCENARIO).unwrap()
}

#[test]
fn shipped_scenario_is_valid() {
    let s = scenario();
    assert_eq!((s.width(), s.height()), (20, 14));
    assert_eq!(s.violations(), Vec::<String>::new());
    let types: Vec<_> = s.zones.iter().map(|z| (z.label.as_str(), z.zone_type)).collect();
    assert_eq!(
        types,
        [
            ("living-room", ZoneType::A),
            ("kitchen-counter", ZoneType::B),
            ("under-sofa", ZoneType::C),
            ("entry-way", ZoneType::A)
        ]
    );
}

#[test]
fn waypoint_off_zone_and_wrong_cell_type_rejected() {
    let mut s = scenario();
    s.zones[0].waypoints.push([1, 1]);
    s.zones[1].cells.push([1, 2, 1, 2]);
    let v = s.violations();
    assert!(v.iter().any(|m| m.contains("waypoint 1:1 is outside")), "{v:?}");
    assert!(
        v.iter().any(|m| m.contains("KITCHEN-COUNTER-1 cell 1:2")),
        "{v:?}"
    );
    assert!(matches!(s.validate(), Err(WorldError::Invalid(_))));
}

#[test]
fn bad_toml_is_a_parse_error() {
    assert!(matches!(
        Scenario::from_toml("name = 3"),
        Err(WorldError::Toml(_))
    ));
}

#[test]
fn passability_by_class() {
    assert!(RobotClass::Ugv.passable(Cell::Under));
    assert!(!RobotClass::Ugv.passable(Cell::Elevated));
    assert!(RobotClass::Drone.passable(Cell::Elevated));
    assert!(!RobotClass::Drone.passable(Cell::Under));
    assert!(!RobotClass::Drone.passable(Cell::Wall));
}

#[test]
fn lower_id_wins_contested_cell() {
    let mut s = scenario();
    s.robots[0].base = [11, 2];
    s.robots[1].base = [13, 2];
    let mut w = World::new(s, 1).unwrap();
    let acts = BTreeMap::from([
        ("UGV-1".to_string(), Actuation::Move((12, 2))),
        ("DRONE-1".to_string(), Actuation::Move((12, 2))),
    ]);
    let r = w.step(&acts);
    assert_eq!(r.moved, ["DRONE-1"]);
    assert_eq!(r.flagged, ["UGV-1"]);
    assert!(w.body("UGV-1").unwrap().blocked);
    assert_eq!(w.body("DRONE-1").unwrap().pose, (12, 2));
}

#[test]
fn sensing_respects_range_and_zone_visibility() {
    let mut s = scenario();
    // both robots right next to the mug on the counter
    s.robots[0].base = [5, 2];
    s.robots[1].base = [4, 1];
    let w = World::new(s, 1).unwrap();
    assert!(w.sense("UGV-1").is_empty(), "ugv cannot see elevated surfaces");
    let d = w.sense("DRONE-1");
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].object_type, "MUG");
    assert_eq!(d[0].zone.as_deref(), Some("KITCHEN-COUNTER-1"));
    assert_eq!(d[0].confidence, 1.0);
}

#[test]
fn bfs_prefers_north_then_east() {
    let w = World::new(scenario(), 1).unwrap();
    let none = BTreeSet::new();
    assert_eq!(
        w.next_step(RobotClass::Ugv, (11, 5), (12, 4), &none),
        Some((11, 4))
    );
    assert_eq!(
        w.next_step(RobotClass::Ugv, (11, 5), (11, 5), &none),
        Some((11, 5))
    );
    // the counter is out of reach for ground robots
    assert_eq!(w.next_step(RobotClass::Ugv, (4, 2), (4, 1), &none), None);
}

#[test]
fn digest_tracks_state_and_seed() {
    let a = World::new(scenario(), 1).unwrap();
    let b = World::new(scenario(), 1).unwrap();
    let c = World::new(scenario(), 2).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), c.digest());
    assert_eq!(a.digest().len(), 64);
}

#[test]
fn default_seed_picks_ugv_leader() {
    let s = scenario();
    let seed = s.seed;
    let mut w = World::new(s, seed).unwrap();
    assert_eq!(w.choose_leader(), "UGV-1");
}

#[test]
fn map_snapshot_shape() {
    let w = World::new(scenario(), 1).unwrap();
    let m = w.map_snapshot();
    assert_eq!(m["width"], 20);
    assert_eq!(m["zones"].as_array().unwrap().len(), 4);
    assert_eq!(m["robots"][0]["id"], "DRONE-1");
}
