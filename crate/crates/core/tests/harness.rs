mod common;

use jbr_core::harness::{
    make_flows, run_detailed, run_experiment, run_sweep, summarize, write_records, write_summary,
    Protocol, SweepSpec,
};
use jbr_core::simcore::{Flow, Mobility, NodeId, Point};
use jbr_core::{ConfigError, ScenarioConfig, SweepError};

fn small(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        node_count: 20,
        sim_duration: 120.0,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn two_static_nodes_need_only_hello_and_keepalive() {
    let c = ScenarioConfig {
        flow_count: 1,
        ..common::static_config(2)
    };
    let flows = vec![Flow {
        id: 0,
        source: NodeId(0),
        destination: NodeId(1),
    }];
    let pos = vec![Point::new(100.0, 100.0), Point::new(200.0, 100.0)];
    let out = run_detailed(&c, Protocol::Jbr, Mobility::fixed(pos), flows, false).unwrap();
    let s = &out.stats;
    assert_eq!(out.record.delivery_ratio, 1.0);
    assert!(out.record.data_generated > 0);
    // one hello session each, answered once
    assert_eq!(s.count_of("Hello"), 2);
    assert_eq!(s.count_of("HelloReply"), 2);
    assert_eq!(
        s.count_of("JanitorAliveRequest"),
        s.count_of("JanitorAliveReply")
    );
    let keepalive_bound = 2 * (c.sim_duration / c.timer_alive).ceil() as u64 + 2;
    assert!(s.count_of("JanitorAliveRequest") <= keepalive_bound);
    let control: u64 = [
        "Hello",
        "HelloReply",
        "JanitorAliveRequest",
        "JanitorAliveReply",
    ]
    .iter()
    .map(|k| s.count_of(k))
    .sum();
    assert_eq!(out.record.control_packet_count, control);
}

#[test]
fn zero_flows_report_full_delivery() {
    for p in Protocol::ALL {
        let r = run_experiment(
            &ScenarioConfig {
                flow_count: 0,
                ..small(3)
            },
            p,
        )
        .unwrap();
        assert_eq!(r.data_generated, 0);
        assert_eq!(r.delivery_ratio, 1.0);
    }
}

#[test]
fn same_seed_same_record() {
    for p in Protocol::ALL {
        assert_eq!(
            run_experiment(&small(5), p).unwrap(),
            run_experiment(&small(5), p).unwrap()
        );
    }
}

#[test]
fn protocols_see_the_same_traffic() {
    let spec = SweepSpec {
        pause_times: vec![30.0],
        node_counts: vec![20],
        seeds: vec![4],
        protocols: Protocol::ALL.to_vec(),
    };
    let recs = run_sweep(&spec, &small(0)).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].data_generated, recs[1].data_generated);
    assert_eq!(make_flows(&small(4)), make_flows(&small(4)));
}

#[test]
fn sweep_orders_rows_and_summarizes() {
    let spec = SweepSpec {
        pause_times: vec![300.0, 0.0],
        node_counts: vec![12],
        seeds: vec![2, 1],
        protocols: vec![Protocol::Jbr, Protocol::Flood],
    };
    let base = ScenarioConfig {
        sim_duration: 60.0,
        ..ScenarioConfig::default()
    };
    let recs = run_sweep(&spec, &base).unwrap();
    let keys: Vec<_> = recs
        .iter()
        .map(|r| (r.protocol, r.pause_time as u32, r.seed))
        .collect();
    assert_eq!(
        keys,
        vec![
            ("flood", 0, 1),
            ("flood", 0, 2),
            ("flood", 300, 1),
            ("flood", 300, 2),
            ("jbr", 0, 1),
            ("jbr", 0, 2),
            ("jbr", 300, 1),
            ("jbr", 300, 2),
        ]
    );
    let summary = summarize(&recs);
    assert_eq!(summary.len(), 4);
    let mut buf = Vec::new();
    write_summary(&summary, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
}

#[test]
fn csv_header_follows_record_fields() {
    let r = run_experiment(&small(1), Protocol::Flood).unwrap();
    let mut buf = Vec::new();
    write_records(&[r], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(
        text.lines().next().unwrap(),
        "protocol,pause_time,node_count,seed,control_packet_count,control_byte_count,data_delivered,\
         data_generated,delivery_ratio,route_errors,route_unreachables,discovery_latency_mean"
    );
}

#[test]
fn bad_inputs_are_rejected_before_running() {
    let bad = ScenarioConfig {
        tx_range: -1.0,
        ..ScenarioConfig::default()
    };
    assert!(matches!(
        run_experiment(&bad, Protocol::Jbr),
        Err(ConfigError::Invalid(_))
    ));
    let empty = SweepSpec {
        seeds: vec![],
        ..SweepSpec::default()
    };
    assert!(matches!(
        run_sweep(&empty, &small(1)),
        Err(SweepError::Empty(_))
    ));
    let spec = SweepSpec {
        pause_times: vec![0.0],
        node_counts: vec![1],
        seeds: vec![1],
        protocols: vec![Protocol::Jbr],
    };
    let err = run_sweep(&spec, &small(1)).unwrap_err();
    assert!(err.to_string().contains("nodes=1"), "{err}");
}
