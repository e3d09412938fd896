//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

mod common;

use std::time::{Duration, Instant};

use jbr_core::analytics::{
    binomial_janitor_count, janitor_tau, p_route_broken, route_broken_mc, AnalyticParams,
};
use jbr_core::harness::{
    evaluate_analytics, make_flows, run_detailed, run_experiment, run_sweep_detailed,
    write_records, Formula, McSettings, Protocol, SweepSpec,
};
use jbr_core::simcore::{ConnectivityGraph, Flow, Mobility, NodeId, Point};
use jbr_core::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, ok: bool, started: Instant, limit: Duration, detail: String) {
    let took = started.elapsed();
    let pass = ok && took < limit;
    println!(
        "criterion {id} [{name}]: {} ({detail}; {:.2}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        limit.as_secs()
    );
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(
        took < limit,
        "criterion {id} took {took:?}, limit {limit:?}"
    );
}

#[test]
fn criterion_1_two_nodes_elect_each_other() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    for _ in 0..1000 {
        let a = Point::new(rng.random_range(0.0..1300.0), rng.random_range(0.0..1300.0));
        let r = rng.random_range(0.0..250.0);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let b = Point::new(a.x + r * phi.cos(), a.y + r * phi.sin());
        let mut sim = common::static_jbr(vec![a, b]);
        sim.run_until(0.1);
        let x = sim.agent(NodeId(0));
        let y = sim.agent(NodeId(1));
        let ok = x.my_janitor() == Some(NodeId(1))
            && y.my_janitor() == Some(NodeId(0))
            && x.is_janitor()
            && y.is_janitor()
            && sim.stats().count_of("Hello") == 2;
        failures += usize::from(!ok);
    }
    verdict(
        1,
        "mutual janitors",
        failures == 0,
        t,
        Duration::from_secs(5),
        format!("{failures} failures in 1000 placements"),
    );
}

#[test]
fn criterion_2_election_matches_brute_force() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        let side = rng.random_range(300.0..1000.0);
        let (got, want) = common::election_outcomes(common::random_positions(&mut rng, n, side));
        mismatches += usize::from(got != want);
    }
    verdict(
        2,
        "election oracle",
        mismatches == 0,
        t,
        Duration::from_secs(30),
        format!("{mismatches} mismatches in 200 graphs"),
    );
}

#[test]
fn criterion_3_route_broken_race() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mu = rng.random_range(0.01..10.0);
        let lambda = rng.random_range(0.01..10.0);
        let e = route_broken_mc(mu, lambda, 1_000_000, 100 + i).unwrap();
        worst = worst.max((e.estimate - p_route_broken(mu, lambda).unwrap()).abs());
    }
    verdict(
        3,
        "break race monte carlo",
        worst <= 0.005,
        t,
        Duration::from_secs(60),
        format!("max deviation {worst:.5} over 20 pairs"),
    );
}

#[test]
fn criterion_4_analytics_cover_defaults() {
    let t = Instant::now();
    let p = AnalyticParams::default();
    let rows = evaluate_analytics(
        &p,
        &Formula::ALL,
        Some(McSettings {
            trials: 100_000,
            seed: 4,
        }),
    );
    let (covered, bad_probs) = match &rows {
        Ok(rows) => {
            let covered = Formula::ALL.iter().all(|f| {
                rows.iter()
                    .any(|r| r.formula == f.name() && r.value.is_some())
            });
            let bad = rows
                .iter()
                .filter(|r| {
                    r.formula
                        .parse::<Formula>()
                        .is_ok_and(Formula::is_probability)
                })
                .filter(|r| {
                    r.formula != "expected_success_ratio" && r.formula != "expected_failure_ratio"
                })
                .filter(|r| r.value.is_some_and(|v| !(0.0..=1.0).contains(&v)))
                .count();
            (covered, bad)
        }
        Err(_) => (false, 0),
    };
    let tau = janitor_tau(p_route_broken(p.mu, p.lambda_rate).unwrap()).unwrap();
    let total: f64 = (0..=p.e_n)
        .map(|k| binomial_janitor_count(p.e_n, tau, k).unwrap())
        .sum();
    let norm = (total - 1.0).abs();
    verdict(
        4,
        "analytics coverage",
        rows.is_ok() && covered && bad_probs == 0 && norm <= 1e-12,
        t,
        Duration::from_secs(5),
        format!(
            "{} rows, all formulas present: {covered}, out-of-range probabilities: {bad_probs}, binomial |sum-1| = {norm:e}",
            rows.as_ref().map_or(0, Vec::len)
        ),
    );
}

/// A connected placement of `n` nodes with a given seed.
fn connected_placement(seed: u64, n: usize, side: f64, range: f64) -> (Vec<Point>, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let pos = common::random_positions(&mut rng, n, side);
        let g = ConnectivityGraph::from_positions(&pos, range);
        if g.components().iter().all(|&c| c == 0) {
            return (pos, g.diameter());
        }
    }
}

#[test]
fn criterion_5_static_delivery_and_partition() {
    let t = Instant::now();
    let base = common::static_config(50);
    let (pos, diameter) = connected_placement(5, 50, 1000.0, base.tx_range);
    let config = ScenarioConfig {
        flow_count: 10,
        sim_duration: 300.0,
        hop_limit: diameter.max(1),
        ..base.clone()
    };
    let run = run_detailed(
        &config,
        Protocol::Jbr,
        Mobility::fixed(pos.clone()),
        make_flows(&config),
        false,
    )
    .unwrap();
    let delivered_all = run.record.delivery_ratio == 1.0 && run.record.data_generated > 0;
    let errors = run.stats.count_of("RouteError");

    // the same cluster with one node moved out of everyone's reach
    let mut cut = pos;
    cut[49] = Point::new(1290.0, 1290.0);
    for p in cut.iter_mut().take(49) {
        *p = Point::new(p.x * 0.8, p.y * 0.8);
    }
    let partitioned = ScenarioConfig {
        field_width: 1300.0,
        field_height: 1300.0,
        flow_count: 10,
        sim_duration: 120.0,
        ..base
    };
    let flows: Vec<Flow> = (0..10)
        .map(|i| Flow {
            id: i,
            source: NodeId(i * 4),
            destination: NodeId(49),
        })
        .collect();
    let cut_run = run_detailed(
        &partitioned,
        Protocol::Jbr,
        Mobility::fixed(cut),
        flows.clone(),
        false,
    )
    .unwrap();
    let told = flows
        .iter()
        .filter(|f| {
            cut_run
                .stats
                .unreachable_pairs
                .contains(&(f.source, f.destination))
        })
        .count();
    verdict(
        5,
        "static delivery",
        delivered_all && errors == 0 && told == flows.len(),
        t,
        Duration::from_secs(30),
        format!(
            "delivery {} of {} generated, {errors} RouteError, {told}/{} partitioned flows told unreachable",
            run.record.data_delivered,
            run.record.data_generated,
            flows.len()
        ),
    );
}

/// Shared by the overhead and loop-freedom checks.
fn overhead_sweep() -> (Vec<jbr_core::harness::SweepRun>, Duration) {
    let t = Instant::now();
    let spec = SweepSpec {
        pause_times: vec![60.0, 300.0, 900.0],
        node_counts: vec![50],
        seeds: (1..=10).collect(),
        protocols: Protocol::ALL.to_vec(),
    };
    let runs = run_sweep_detailed(&spec, &ScenarioConfig::default()).unwrap();
    (runs, t.elapsed())
}

#[test]
fn criteria_6_and_8_overhead_and_loop_freedom() {
    let t = Instant::now();
    let (runs, _) = overhead_sweep();
    let mean = |proto: &str, pause: f64, f: &dyn Fn(&jbr_core::harness::MetricsRecord) -> u64| {
        let rs: Vec<_> = runs
            .iter()
            .filter(|r| r.record.protocol == proto && r.record.pause_time == pause)
            .collect();
        rs.iter().map(|r| f(&r.record) as f64).sum::<f64>() / rs.len() as f64
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for pause in [60.0, 300.0, 900.0] {
        let jp = mean("jbr", pause, &|r| r.control_packet_count);
        let fp = mean("flood", pause, &|r| r.control_packet_count);
        let jb = mean("jbr", pause, &|r| r.control_byte_count);
        let fb = mean("flood", pause, &|r| r.control_byte_count);
        ok &= jp < fp && jb < fb;
        detail.push(format!(
            "pause {pause}: packets {jp:.0} vs {fp:.0}, bytes {jb:.0} vs {fb:.0}"
        ));
    }
    verdict(
        6,
        "overhead ordering",
        ok,
        t,
        Duration::from_secs(600),
        detail.join("; "),
    );

    let reprocessed: u64 = runs
        .iter()
        .filter(|r| r.record.protocol == "jbr")
        .map(|r| r.stats.query_reprocessing)
        .sum();
    let violations: usize = runs
        .iter()
        .map(|r| r.stats.invariant_violations.len())
        .sum();
    verdict(
        8,
        "loop freedom",
        reprocessed == 0 && violations == 0,
        t,
        Duration::from_secs(600),
        format!("{reprocessed} reprocessed queries, {violations} invariant violations"),
    );
}

#[test]
fn criterion_7_csv_is_reproducible() {
    let t = Instant::now();
    let configs = [
        (ScenarioConfig::default(), Protocol::Jbr),
        (
            ScenarioConfig {
                pause_time: 0.0,
                rng_seed: 7,
                ..ScenarioConfig::default()
            },
            Protocol::Flood,
        ),
        (
            ScenarioConfig {
                node_count: 100,
                pause_time: 300.0,
                rng_seed: 3,
                sim_duration: 300.0,
                ..ScenarioConfig::default()
            },
            Protocol::Jbr,
        ),
    ];
    let csv = |c: &ScenarioConfig, p: Protocol| {
        let mut buf = Vec::new();
        write_records(&[run_experiment(c, p).unwrap()], &mut buf).unwrap();
        buf
    };
    let same = configs
        .iter()
        .filter(|(c, p)| csv(c, *p) == csv(c, *p))
        .count();
    verdict(
        7,
        "determinism",
        same == configs.len(),
        t,
        Duration::from_secs(120),
        format!("{same}/{} configurations byte-identical", configs.len()),
    );
}
