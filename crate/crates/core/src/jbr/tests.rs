use std::collections::BTreeSet;

use super::*;
use crate::config::ScenarioConfig;
use crate::simcore::{
    Action, Agent, DataPacket, Dest, Mobility, NodeCtx, NodeId, PacketId, Point, ScriptedMove,
    Simulation,
};

fn cfg(n: usize) -> ScenarioConfig {
    ScenarioConfig {
        node_count: n,
        flow_count: 0,
        ..ScenarioConfig::default()
    }
}

fn sim_at(positions: Vec<Point>) -> Simulation<JbrNode> {
    let c = cfg(positions.len());
    let agents = JbrNode::for_scenario(&c);
    Simulation::new(c, Mobility::fixed(positions), vec![], agents).unwrap()
}

fn line(n: usize, gap: f64) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new(50.0 + gap * i as f64, 500.0))
        .collect()
}

/// Center node 0 with `k` leaves on a circle of radius 100.
fn star(k: usize) -> Vec<Point> {
    let mut p = vec![Point::new(600.0, 600.0)];
    for i in 0..k {
        let a = i as f64 * std::f64::consts::TAU / k as f64;
        p.push(Point::new(600.0 + 100.0 * a.cos(), 600.0 + 100.0 * a.sin()));
    }
    p
}

fn packet(id: u64, source: u32, destination: u32) -> DataPacket {
    DataPacket {
        id: PacketId(id),
        flow: 0,
        source: NodeId(source),
        destination: NodeId(destination),
        payload_bytes: 64,
        created_at: 0.0,
        recoveries: 0,
    }
}

fn params() -> JbrParams {
    JbrParams::from_config(&ScenarioConfig::default())
}

/// Runs one callback on a bare node and returns what it emitted.
fn poke<F>(
    node: &mut JbrNode,
    now: f64,
    neighbors: &[u32],
    f: F,
) -> Vec<Action<JbrMessage, JbrTimer>>
where
    F: FnOnce(&mut JbrNode, &mut NodeCtx<JbrMessage, JbrTimer>),
{
    let nbrs: BTreeSet<NodeId> = neighbors.iter().map(|&i| NodeId(i)).collect();
    let mut actions = Vec::new();
    let mut ctx = NodeCtx::new(now, node.id(), &nbrs, &mut actions);
    f(node, &mut ctx);
    actions
}

fn sends(actions: &[Action<JbrMessage, JbrTimer>]) -> Vec<(Dest, &'static str)> {
    use crate::simcore::WireMessage;
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send { dest, msg } => Some((*dest, msg.kind())),
            _ => None,
        })
        .collect()
}

#[test]
fn isolated_node_times_out_and_retries() {
    let mut sim = sim_at(vec![Point::new(0.0, 0.0), Point::new(1000.0, 1000.0)]);
    sim.run_until(1.0);
    let a = sim.agent(NodeId(0));
    assert!(a.hello_active());
    assert_eq!(a.counters().hello_replies_received, 0);
    assert_eq!(a.my_janitor(), None);
    sim.run_until(15.5);
    assert_eq!(sim.agent(NodeId(0)).counters().hello_sessions, 2);
    assert_eq!(sim.stats().count_of("HelloReply"), 0);
}

#[test]
fn three_neighbors_three_replies() {
    let mut sim = sim_at(star(3));
    sim.run_until(1.0);
    assert_eq!(sim.agent(NodeId(0)).counters().hello_replies_received, 3);
    assert_eq!(sim.stats().count_of("Hello"), 4);
}

#[test]
fn hello_during_session_is_suppressed() {
    let mut n = JbrNode::new(NodeId(0), params());
    let first = poke(&mut n, 0.0, &[1], |n, ctx| n.on_node_up(ctx));
    assert_eq!(sends(&first), vec![(Dest::Broadcast, "Hello")]);
    let second = poke(&mut n, 0.001, &[1], |n, ctx| n.on_node_up(ctx));
    assert!(sends(&second).is_empty());
    assert_eq!(n.counters().hello_suppressed, 1);
}

#[test]
fn each_hello_gets_one_reply_and_degree_overwrites() {
    let mut n = JbrNode::new(NodeId(0), params());
    let hello = |d| JbrMessage::Hello {
        degree: d,
        affiliation: Affiliation::default(),
    };
    let a = poke(&mut n, 0.0, &[7], |n, ctx| {
        n.on_message(ctx, NodeId(7), hello(2))
    });
    assert_eq!(sends(&a), vec![(Dest::Unicast(NodeId(7)), "HelloReply")]);
    let b = poke(&mut n, 1.0, &[7], |n, ctx| {
        n.on_message(ctx, NodeId(7), hello(5))
    });
    assert_eq!(sends(&b), vec![(Dest::Unicast(NodeId(7)), "HelloReply")]);
    assert_eq!(n.neighbor_degree(NodeId(7)), Some(5));
}

#[test]
fn two_nodes_are_janitors_of_each_other() {
    let mut sim = sim_at(vec![Point::new(100.0, 100.0), Point::new(300.0, 200.0)]);
    sim.run_until(1.0);
    for (me, other) in [(0, 1), (1, 0)] {
        let a = sim.agent(NodeId(me));
        assert_eq!(a.my_janitor(), Some(NodeId(other)));
        assert!(a.is_janitor());
    }
    assert_eq!(sim.stats().count_of("NewJanitor"), 0);
}

#[test]
fn chain_node_follows_higher_degree_end() {
    // m = 1 sits between l = 0 (degree 3) and n = 2 (degree 2)
    let pos = vec![
        Point::new(500.0, 500.0),
        Point::new(700.0, 500.0),
        Point::new(900.0, 500.0),
        Point::new(500.0, 700.0),
        Point::new(500.0, 300.0),
        Point::new(1100.0, 500.0),
    ];
    let mut sim = sim_at(pos);
    assert_eq!(sim.graph().degree(NodeId(0)), 3);
    assert_eq!(sim.graph().degree(NodeId(2)), 2);
    sim.run_until(1.0);
    assert_eq!(sim.agent(NodeId(1)).my_janitor(), Some(NodeId(0)));
    assert!(sim.agent(NodeId(0)).is_janitor());
}

#[test]
fn higher_degree_claimant_wins() {
    let mut n = JbrNode::new(NodeId(0), params());
    let nbrs = [1, 2];
    poke(&mut n, 0.0, &nbrs, |n, ctx| {
        n.on_message(
            ctx,
            NodeId(1),
            JbrMessage::Hello {
                degree: 5,
                affiliation: Affiliation::default(),
            },
        );
        n.on_message(
            ctx,
            NodeId(2),
            JbrMessage::Hello {
                degree: 3,
                affiliation: Affiliation::default(),
            },
        );
    });
    poke(&mut n, 0.1, &nbrs, |n, ctx| {
        n.on_new_janitor(ctx, NodeId(2), 3)
    });
    assert_eq!(n.my_janitor(), None);
    poke(&mut n, 0.2, &nbrs, |n, ctx| {
        n.on_new_janitor(ctx, NodeId(1), 5)
    });
    assert_eq!(n.my_janitor(), Some(NodeId(1)));
    assert!(!n.hello_active());
    assert!(n.keepalive_armed());
    // a lower claimant afterwards changes nothing
    poke(&mut n, 0.3, &nbrs, |n, ctx| {
        n.on_new_janitor(ctx, NodeId(2), 3)
    });
    assert_eq!(n.my_janitor(), Some(NodeId(1)));
}

#[test]
fn single_claimant_ends_session() {
    let mut n = JbrNode::new(NodeId(4), params());
    poke(&mut n, 0.0, &[1], |n, ctx| n.on_node_up(ctx));
    assert!(n.hello_active());
    let out = poke(&mut n, 0.001, &[1], |n, ctx| {
        n.on_new_janitor(ctx, NodeId(1), 1)
    });
    assert_eq!(n.my_janitor(), Some(NodeId(1)));
    assert!(!n.hello_active());
    assert!(sends(&out).contains(&(Dest::Overheard(NodeId(1)), "JanitorAliveRequest")));
}

#[test]
fn idle_followers_keepalive_each_period() {
    let mut sim = sim_at(star(3));
    sim.run_until(61.0);
    for leaf in 1..=3 {
        let a = sim.agent(NodeId(leaf));
        assert_eq!(a.my_janitor(), Some(NodeId(0)));
        // registration plus one request at 15, 30, 45 and 60 s
        assert_eq!(a.counters().keepalives_sent, 5);
    }
    assert_eq!(sim.stats().count_of("JanitorAliveRequest"), 15);
    assert_eq!(sim.stats().count_of("JanitorAliveReply"), 15);
    // keepalives count as contact: no idle hello at the janitor
    assert_eq!(sim.agent(NodeId(0)).counters().hello_sessions, 1);
}

#[test]
fn data_flow_suppresses_keepalives() {
    // 0 - 1 - 2 line plus a far pair; node 0 streams to 2 through janitor 1
    let mut sim = sim_at(line(3, 200.0));
    sim.run_until(1.0);
    assert_eq!(sim.agent(NodeId(0)).my_janitor(), Some(NodeId(1)));
    for i in 0..400 {
        sim.inject_packet(20.0 + i as f64 * 0.5, NodeId(0), NodeId(2));
    }
    sim.run_until(20.0);
    let before = sim.agent(NodeId(0)).counters().keepalives_sent;
    sim.run_until(220.0);
    let a = sim.agent(NodeId(0));
    assert_eq!(a.counters().keepalives_sent, before);
    assert!(a.counters().keepalives_suppressed >= 12);
    assert_eq!(sim.stats().data_delivered, 400);
}

#[test]
fn lost_janitor_triggers_one_hello_session() {
    // leaf 1 hangs off janitor 0 and also sees node 2, which sees nobody else
    let pos = vec![
        Point::new(500.0, 500.0),
        Point::new(700.0, 500.0),
        Point::new(900.0, 500.0),
        Point::new(500.0, 700.0),
        Point::new(500.0, 300.0),
    ];
    let moves = vec![ScriptedMove {
        at: 20.0,
        node: NodeId(0),
        to: Point::new(50.0, 1250.0),
    }];
    let c = cfg(5);
    let agents = JbrNode::for_scenario(&c);
    let mut sim = Simulation::new(
        c,
        Mobility::Scripted {
            positions: pos,
            moves,
        },
        vec![],
        agents,
    )
    .unwrap();
    sim.run_until(19.0);
    assert_eq!(sim.agent(NodeId(1)).my_janitor(), Some(NodeId(0)));
    let before = sim.agent(NodeId(1)).counters().hello_sessions;
    sim.run_until(120.0);
    let a = sim.agent(NodeId(1));
    assert_eq!(a.counters().hello_sessions, before + 1);
    assert_eq!(a.my_janitor(), Some(NodeId(2)));
    assert!(
        sim.stats().invariant_violations.is_empty(),
        "{:?}",
        sim.stats().invariant_violations
    );
}

#[test]
fn idle_janitor_rules() {
    let mut j = JbrNode::new(NodeId(0), params());
    let req = JbrMessage::JanitorAliveRequest {
        degree: 1,
        neighbors: vec![],
    };
    poke(&mut j, 0.0, &[1], |n, ctx| {
        n.on_message(ctx, NodeId(1), req.clone())
    });
    assert!(j.is_janitor());
    // a keepalive arrived since the timer was armed: no session
    let out = poke(&mut j, 30.0, &[1], |n, ctx| {
        n.on_message(ctx, NodeId(1), req.clone());
        n.janitor_idle_tick(ctx);
    });
    assert!(!sends(&out).contains(&(Dest::Broadcast, "Hello")));
    // nothing since: exactly one session
    let out = poke(&mut j, 40.0, &[1], |n, ctx| n.janitor_idle_tick(ctx));
    assert_eq!(sends(&out), vec![(Dest::Broadcast, "Hello")]);
}

#[test]
fn neighbor_destination_needs_no_control() {
    let mut sim = sim_at(line(3, 200.0));
    sim.run_until(10.0);
    let control = sim.stats().control_packets;
    sim.inject_packet(10.0, NodeId(0), NodeId(1));
    sim.run_until(10.5);
    assert_eq!(sim.stats().control_packets, control);
    assert_eq!(sim.stats().count_of("Data"), 1);
    assert_eq!(sim.stats().data_delivered, 1);
}

#[test]
fn far_destination_goes_through_janitor() {
    let mut sim = sim_at(line(3, 200.0));
    sim.run_until(10.0);
    sim.enable_trace();
    sim.inject_packet(10.0, NodeId(0), NodeId(2));
    sim.run_until(10.5);
    let trace = sim.take_trace();
    assert!(trace
        .iter()
        .any(|l| l.contains("from=0 to=1") && l.contains("to_janitor")));
    assert_eq!(sim.stats().count_of("RouteQuery"), 0);
    assert_eq!(sim.stats().data_delivered, 1);
}

#[test]
fn no_janitor_buffers_and_says_hello() {
    let mut n = JbrNode::new(NodeId(3), params());
    let out = poke(&mut n, 0.0, &[], |n, ctx| n.send_data(ctx, packet(1, 3, 9)));
    assert_eq!(n.pending_len(), 1);
    assert_eq!(sends(&out), vec![(Dest::Broadcast, "Hello")]);
}

/// Line of five nodes 200 m apart: janitors 1, 2 and 3; node 0 follows 1.
fn five_line() -> Simulation<JbrNode> {
    let mut sim = sim_at(line(5, 200.0));
    sim.run_until(16.0);
    let janitors: Vec<bool> = sim.agents().iter().map(JbrNode::is_janitor).collect();
    assert_eq!(janitors, vec![false, true, true, true, false]);
    sim
}

#[test]
fn query_reply_is_cached_and_reused() {
    let mut sim = five_line();
    sim.inject_packet(20.0, NodeId(0), NodeId(4));
    sim.run_until(21.0);
    let queries = sim.stats().count_of("RouteQuery");
    assert!(queries > 0);
    assert_eq!(sim.stats().discoveries, 1);
    assert_eq!(sim.stats().data_delivered, 1);
    let cached = sim
        .agent(NodeId(1))
        .cache()
        .lookup(NodeId(4), sim.graph().neighbors(NodeId(1)));
    assert_eq!(cached, Some([1, 2, 3, 4].map(NodeId).as_slice()));
    sim.inject_packet(22.0, NodeId(0), NodeId(4));
    sim.run_until(23.0);
    assert_eq!(sim.stats().count_of("RouteQuery"), queries);
    assert_eq!(sim.stats().data_delivered, 2);
    assert_eq!(sim.stats().stale_cache_inserts, 0);
    assert_eq!(sim.stats().query_reprocessing, 0);
}

#[test]
fn hop_limit_exhaustion_reports_unreachable() {
    // janitors strung out along a line: the destination is beyond one janitor hop
    let n = 9;
    let mut c = cfg(n);
    c.hop_limit = 1;
    let agents = JbrNode::for_scenario(&c);
    let mut sim = Simulation::new(c, Mobility::fixed(line(n, 200.0)), vec![], agents).unwrap();
    sim.run_until(16.0);
    sim.inject_packet(20.0, NodeId(0), NodeId(8));
    sim.run_until(25.0);
    assert!(sim.stats().count_of("RouteUnreachable") > 0);
    assert!(sim
        .stats()
        .unreachable_pairs
        .contains(&(NodeId(0), NodeId(8))));
    assert_eq!(sim.stats().data_delivered, 0);
}

#[test]
fn partitioned_destination_is_unreachable() {
    let mut pos = line(4, 200.0);
    pos.push(Point::new(1250.0, 1250.0));
    pos.push(Point::new(1250.0, 1050.0));
    let mut sim = sim_at(pos);
    sim.run_until(16.0);
    sim.inject_packet(20.0, NodeId(0), NodeId(5));
    sim.run_until(25.0);
    assert!(sim
        .stats()
        .unreachable_pairs
        .contains(&(NodeId(0), NodeId(5))));
}

#[test]
fn broken_route_returns_error_to_source() {
    let moves = vec![ScriptedMove {
        at: 30.0,
        node: NodeId(3),
        to: Point::new(1250.0, 50.0),
    }];
    let c = cfg(5);
    let agents = JbrNode::for_scenario(&c);
    let mut sim = Simulation::new(
        c,
        Mobility::Scripted {
            positions: line(5, 200.0),
            moves,
        },
        vec![],
        agents,
    )
    .unwrap();
    sim.inject_packet(20.0, NodeId(0), NodeId(4));
    sim.run_until(29.0);
    assert_eq!(sim.stats().data_delivered, 1);
    assert_eq!(sim.stats().count_of("RouteError"), 0);
    sim.inject_packet(30.5, NodeId(0), NodeId(4));
    sim.run_until(30.51);
    // node 2 finds 3 gone; the error walks back 2 -> 1 -> 0
    assert_eq!(sim.stats().count_of("RouteError"), 2);
    assert!(sim
        .agent(NodeId(1))
        .cache()
        .lookup(NodeId(4), sim.graph().neighbors(NodeId(1)))
        .is_none());
    sim.run_until(40.0);
    assert!(sim
        .stats()
        .unreachable_pairs
        .contains(&(NodeId(0), NodeId(4))));
}

#[test]
fn static_line_never_sees_route_errors() {
    let mut sim = five_line();
    for i in 0..50 {
        sim.inject_packet(20.0 + i as f64, NodeId(i % 5), NodeId((i + 2) % 5));
    }
    sim.run_until(100.0);
    assert_eq!(sim.stats().count_of("RouteError"), 0);
    assert_eq!(sim.stats().data_delivered, 50);
    assert!(sim.stats().invariant_violations.is_empty());
}

#[test]
fn peer_janitors_reach_three_hops() {
    let sim = five_line();
    let a = sim.agent(NodeId(1));
    let peers = a.peer_janitors(sim.graph().neighbors(NodeId(1)));
    assert_eq!(peers.get(&NodeId(2)), Some(&vec![NodeId(2)]));
    assert_eq!(peers.get(&NodeId(3)), Some(&vec![NodeId(2), NodeId(3)]));
}
