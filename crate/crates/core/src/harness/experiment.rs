//! Single simulation runs and their metrics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::baseline::FloodNode;
use crate::config::ScenarioConfig;
use crate::error::{ConfigError, SweepError};
use crate::jbr::JbrNode;
use crate::simcore::{stream_rng, Agent, Flow, Mobility, NodeId, SimStats, Simulation};

const FLOW_SELECTION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Flood,
    Jbr,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Flood, Protocol::Jbr];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Flood => "flood",
            Protocol::Jbr => "jbr",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jbr" => Ok(Protocol::Jbr),
            "flood" => Ok(Protocol::Flood),
            other => Err(SweepError::UnknownProtocol(other.to_string())),
        }
    }
}

/// One CSV row: the outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub protocol: &'static str,
    pub pause_time: f64,
    pub node_count: usize,
    pub seed: u64,
    pub control_packet_count: u64,
    pub control_byte_count: u64,
    pub data_delivered: u64,
    pub data_generated: u64,
    pub delivery_ratio: f64,
    pub route_errors: u64,
    pub route_unreachables: u64,
    pub discovery_latency_mean: f64,
}

impl MetricsRecord {
    pub fn from_stats(protocol: Protocol, config: &ScenarioConfig, stats: &SimStats) -> Self {
        let errors = match protocol {
            Protocol::Jbr => stats.count_of("RouteError"),
            Protocol::Flood => stats.count_of("FloodError"),
        };
        Self {
            protocol: protocol.name(),
            pause_time: config.pause_time,
            node_count: config.node_count,
            seed: config.rng_seed,
            control_packet_count: stats.control_packets,
            control_byte_count: stats.control_bytes,
            data_delivered: stats.data_delivered,
            data_generated: stats.data_generated,
            delivery_ratio: stats.delivery_ratio(),
            route_errors: errors,
            route_unreachables: stats.unreachable_reports,
            discovery_latency_mean: stats.discovery_latency_mean(),
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: MetricsRecord,
    pub stats: SimStats,
    pub trace: Vec<String>,
}

/// Flow endpoints drawn from the run seed, so every protocol sees the same
/// pairs; arrival times come from per-flow streams inside the engine.
/// Expects a validated config (at least two nodes).
pub fn make_flows(config: &ScenarioConfig) -> Vec<Flow> {
    let mut rng = stream_rng(config.rng_seed, FLOW_SELECTION_STREAM);
    let n = config.node_count;
    (0..config.flow_count)
        .map(|i| {
            let source = rng.random_range(0..n);
            let mut destination = rng.random_range(0..n - 1);
            if destination >= source {
                destination += 1;
            }
            Flow {
                id: i as u32,
                source: NodeId::from(source),
                destination: NodeId::from(destination),
            }
        })
        .collect()
}

fn simulate<A: Agent>(
    config: &ScenarioConfig,
    mobility: Mobility,
    flows: Vec<Flow>,
    agents: Vec<A>,
    trace: bool,
) -> Result<(SimStats, Vec<String>), ConfigError> {
    let mut sim = Simulation::new(config.clone(), mobility, flows, agents)?;
    if trace {
        sim.enable_trace();
    }
    sim.run();
    let lines = sim.take_trace();
    Ok((sim.into_stats(), lines))
}

/// Runs `protocol` on a random waypoint scenario built from `config`.
pub fn run_experiment(
    config: &ScenarioConfig,
    protocol: Protocol,
) -> Result<MetricsRecord, ConfigError> {
    config.validate()?;
    run_detailed(
        config,
        protocol,
        Mobility::RandomWaypoint,
        make_flows(config),
        false,
    )
    .map(|o| o.record)
}

/// Like [`run_experiment`] with explicit mobility and flows, keeping the
/// full statistics and optionally the event trace.
pub fn run_detailed(
    config: &ScenarioConfig,
    protocol: Protocol,
    mobility: Mobility,
    flows: Vec<Flow>,
    trace: bool,
) -> Result<RunOutcome, ConfigError> {
    config.validate()?;
    let (stats, trace) = match protocol {
        Protocol::Jbr => simulate(
            config,
            mobility,
            flows,
            JbrNode::for_scenario(config),
            trace,
        )?,
        Protocol::Flood => simulate(
            config,
            mobility,
            flows,
            FloodNode::for_scenario(config),
            trace,
        )?,
    };
    Ok(RunOutcome {
        record: MetricsRecord::from_stats(protocol, config, &stats),
        stats,
        trace,
    })
}
