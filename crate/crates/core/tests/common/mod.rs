#![allow(dead_code)]

use std::collections::BTreeSet;

use jbr_core::jbr::JbrNode;
use jbr_core::simcore::{ConnectivityGraph, Mobility, NodeId, Point, Simulation};
use jbr_core::ScenarioConfig;
use rand::Rng;

/// What the global degree rule assigns to one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub janitor: bool,
    pub my_janitor: Option<NodeId>,
}

/// Global brute force: every node looks at all of its neighbors, ranks them
/// by degree then lowest id, and follows the top one unless it ranks above
/// it. Two degree-one nodes facing each other pick each other. A node is a
/// janitor if it elected itself, is in such a pair, or is followed.
pub fn brute_force_election(graph: &ConnectivityGraph) -> Vec<Assignment> {
    let n = graph.node_count();
    let deg = |v: usize| graph.degree(NodeId(v as u32));
    let mut out = vec![
        Assignment {
            janitor: false,
            my_janitor: None
        };
        n
    ];
    let mut followed = BTreeSet::new();
    #[allow(clippy::needless_range_loop)]
    for v in 0..n {
        let nb = graph.neighbors(NodeId(v as u32));
        let Some(best) = nb
            .iter()
            .map(|m| m.0 as usize)
            .max_by(|&a, &b| deg(a).cmp(&deg(b)).then(b.cmp(&a)))
        else {
            continue;
        };
        let beats_best = deg(v) > deg(best) || (deg(v) == deg(best) && v < best);
        if deg(v) == 1 && deg(best) == 1 {
            out[v] = Assignment {
                janitor: true,
                my_janitor: Some(NodeId(best as u32)),
            };
        } else if beats_best {
            out[v].janitor = true;
        } else {
            out[v].my_janitor = Some(NodeId(best as u32));
            followed.insert(best);
        }
    }
    for f in followed {
        out[f].janitor = true;
    }
    out
}

pub fn static_config(n: usize) -> ScenarioConfig {
    ScenarioConfig {
        node_count: n,
        flow_count: 0,
        speed_min: 0.0,
        speed_max: 0.0,
        ..ScenarioConfig::default()
    }
}

pub fn static_jbr(positions: Vec<Point>) -> Simulation<JbrNode> {
    let c = static_config(positions.len());
    let agents = JbrNode::for_scenario(&c);
    Simulation::new(c, Mobility::fixed(positions), vec![], agents).expect("valid scenario")
}

pub fn random_positions<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect()
}

/// Runs the hello exchange on a static placement and returns each node's
/// outcome next to the brute-force one.
pub fn election_outcomes(positions: Vec<Point>) -> (Vec<Assignment>, Vec<Assignment>) {
    let mut sim = static_jbr(positions);
    sim.run_until(1.0);
    let oracle = brute_force_election(sim.graph());
    let got = sim
        .agents()
        .iter()
        .map(|a| Assignment {
            janitor: a.is_janitor(),
            my_janitor: a.my_janitor(),
        })
        .collect();
    (got, oracle)
}
