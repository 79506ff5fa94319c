use std::sync::Arc;

use super::*;
use crate::protocol::{MsgId, Scope};
use crate::taxonomy::{ConceptTree, SubjectCatalog};

const TREE: &str = "root\talpha\nroot\tbeta\nalpha\ta1\nalpha\ta2\nbeta\tb1\nbeta\tb2\n";
const CATALOG: &str = "subject alpha: alpha\ntopic alpha/ta1: a1\ntopic alpha/ta2: a2\n\
                       subject beta: beta\ntopic beta/tb1: b1\ntopic beta/tb2: b2\n";

fn base() -> SimConfig {
    let tree = ConceptTree::parse(TREE).unwrap();
    let catalog = SubjectCatalog::parse(&tree, CATALOG).unwrap();
    SimConfig::new(Arc::new(tree), Arc::new(catalog))
}

fn placed(points: &[(f64, f64, &str)]) -> SimConfig {
    let mut c = base();
    c.population = points.len() as u32;
    c.placements = points
        .iter()
        .map(|&(x, y, s)| Placement {
            x,
            y,
            subject: s.into(),
        })
        .collect();
    c
}

fn request(origin: NodeId) -> Message {
    Message::ExpertiseRequest {
        origin,
        scope: Scope::Subject(SubjectId(0)),
        id: MsgId::new(origin, 999),
        hop: 0,
    }
}

#[test]
fn broadcast_without_neighbours_counts_one_transmission() {
    let mut w = World::new(placed(&[(1.0, 1.0, "alpha"), (40.0, 40.0, "alpha")])).unwrap();
    w.broadcast(0, request(0));
    assert_eq!(w.metrics().transmissions, 1);
    assert_eq!(w.metrics().deliveries, 0);
    assert_eq!(w.in_flight_count(), 0);
}

#[test]
fn broadcast_reaches_every_node_in_range_next_tick() {
    let mut w = World::new(placed(&[
        (10.0, 10.0, "alpha"),
        (12.0, 10.0, "alpha"),
        (10.0, 15.0, "beta"),
        (4.0, 4.0, "beta"),
        (30.0, 30.0, "alpha"),
    ]))
    .unwrap();
    w.broadcast(0, request(0));
    assert_eq!(w.metrics().deliveries, 3);
    assert_eq!(w.in_flight_count(), 3);
    assert_eq!(w.in_flight.keys().copied().collect::<Vec<_>>(), vec![1]);
}

#[test]
fn receiver_exactly_at_range_is_reached() {
    let mut c = placed(&[
        (0.0, 0.0, "alpha"),
        (6.0, 8.0, "alpha"),
        (6.0, 8.000_001, "beta"),
    ]);
    c.hall_width = 20.0;
    c.hall_height = 20.0;
    let mut w = World::new(c).unwrap();
    w.broadcast(0, request(0));
    let receivers: Vec<NodeId> = w.in_flight[&1].iter().map(|(r, _)| *r).collect();
    assert_eq!(receivers, vec![1]);
}

#[test]
fn quiet_world_only_advances_the_clock() {
    let mut c = placed(&[(5.0, 5.0, "alpha")]);
    c.phases.discover = 40;
    let mut w = World::new(c).unwrap();
    w.clock = 5;
    w.step();
    assert_eq!(w.clock(), 6);
    assert_eq!(w.metrics().transmissions, 0);
    assert_eq!(w.nodes()[0].state.location, Location::new(5.0, 5.0));
}

#[test]
fn ten_metres_at_one_metre_per_tick_arrives_after_eight() {
    let target = Location::new(10.0, 0.0);
    let mut p = Location::new(0.0, 0.0);
    let mut ticks = 0;
    while p.distance(target) > 2.0 {
        p = advance_toward(p, target, 1.0, 2.0);
        ticks += 1;
    }
    assert_eq!(ticks, 8);
    assert_eq!(advance_toward(p, target, 1.0, 2.0), p);
}

#[test]
fn advance_never_overshoots_the_radius() {
    let p = advance_toward(Location::new(0.0, 0.0), Location::new(2.5, 0.0), 1.0, 2.0);
    assert!((p.x - 0.5).abs() < 1e-12);
}

#[test]
fn identical_seeds_give_identical_logs() {
    let mut c = base();
    c.population = 40;
    c.seed = 11;
    let a = run(c.clone()).unwrap();
    let b = run(c).unwrap();
    assert_eq!(a.traffic_rows(), b.traffic_rows());
    assert_eq!(a.census, b.census);
    assert_eq!(a.formation_rows(), b.formation_rows());
}

#[test]
fn reachability_cases() {
    let a = SubjectId(0);
    let b = SubjectId(1);
    let close = [
        Location::new(0.0, 0.0),
        Location::new(3.0, 0.0),
        Location::new(0.0, 4.0),
    ];
    assert_eq!(
        reachability_components(&close, &[a, a, a], a, 10.0),
        vec![vec![0, 1, 2]]
    );

    let apart = [Location::new(0.0, 0.0), Location::new(25.0, 0.0)];
    assert_eq!(
        reachability_components(&apart, &[a, a], a, 10.0),
        vec![vec![0], vec![1]]
    );

    let chain = [
        Location::new(0.0, 0.0),
        Location::new(9.0, 0.0),
        Location::new(18.0, 0.0),
    ];
    assert_eq!(
        reachability_components(&chain, &[a, b, a], a, 10.0),
        vec![vec![0, 2]]
    );
    assert_eq!(
        reachability_components(&chain, &[a, b, a], b, 10.0),
        vec![vec![1]]
    );
}

#[test]
fn single_node_is_its_own_cluster() {
    let log = run(placed(&[(20.0, 20.0, "alpha")])).unwrap();
    assert_eq!(log.time_to_form("alpha").unwrap(), 0);
    assert_eq!(log.census.len(), 1);
    assert_eq!(log.census[0].cluster_point, 0);
}

#[test]
fn two_nearby_nodes_share_a_cluster_by_end_of_converge() {
    let mut w = World::new(placed(&[(10.0, 10.0, "alpha"), (16.0, 10.0, "alpha")])).unwrap();
    let sched = w.schedule();
    w.run_until(sched.sub_cluster - 1);
    let a = w.nodes()[0].state.joined_cluster();
    assert!(a.is_some());
    assert_eq!(a, w.nodes()[1].state.joined_cluster());
}

#[test]
fn nodes_stay_inside_the_hall() {
    let mut c = base();
    c.population = 30;
    c.hall_width = 20.0;
    c.hall_height = 15.0;
    c.seed = 4;
    let mut w = World::new(c).unwrap();
    let end = w.schedule().end;
    while w.clock() < end {
        let before: Vec<(Location, Option<Location>)> = w
            .nodes()
            .iter()
            .map(|n| (n.state.location, n.state.elected_target()))
            .collect();
        w.step();
        for (n, (prev, target)) in w.nodes().iter().zip(before) {
            let p = n.state.location;
            assert!((0.0..=20.0).contains(&p.x) && (0.0..=15.0).contains(&p.y));
            if let (Some(t), Some(now_t)) = (target, n.state.elected_target()) {
                if t == now_t && prev.distance(t) > 2.0 + 1e-9 {
                    assert!(p.distance(t) < prev.distance(t));
                }
            }
        }
    }
}

#[test]
fn every_delivery_was_transmitted() {
    let mut c = base();
    c.population = 25;
    c.seed = 2;
    let log = run(c).unwrap();
    let counted: u64 = log.traffic_rows().iter().map(|r| r.count).sum();
    assert_eq!(counted, log.transmissions);
    assert!(log.deliveries >= log.transmissions / 2);
}

#[test]
fn invalid_config_is_rejected_before_stepping() {
    let mut c = base();
    c.arrival_radius = 12.0;
    assert!(matches!(
        World::new(c),
        Err(ConfigError::Invalid {
            field: "arrival_radius",
            ..
        })
    ));
}
