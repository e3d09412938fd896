//! Parameter sweeps and CSV output.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::experiment::{make_flows, run_detailed, MetricsRecord, Protocol};
use crate::config::ScenarioConfig;
use crate::error::SweepError;
use crate::simcore::{Mobility, SimStats};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub pause_times: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub protocols: Vec<Protocol>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            pause_times: vec![0.0, 30.0, 60.0, 120.0, 300.0, 600.0, 900.0],
            node_counts: vec![50, 100],
            seeds: (1..=10).collect(),
            protocols: Protocol::ALL.to_vec(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.pause_times.is_empty() {
            return Err(SweepError::Empty("pause times"));
        }
        if self.node_counts.is_empty() {
            return Err(SweepError::Empty("node counts"));
        }
        if self.seeds.is_empty() {
            return Err(SweepError::Empty("seeds"));
        }
        if self.protocols.is_empty() {
            return Err(SweepError::Empty("protocols"));
        }
        Ok(())
    }

    /// Every combination once, ordered by (protocol, node_count,
    /// pause_time, seed) whatever order the lists were given in.
    pub fn combinations(&self) -> Vec<(Protocol, usize, f64, u64)> {
        let mut out = Vec::new();
        for &p in &self.protocols {
            for &n in &self.node_counts {
                for &pause in &self.pause_times {
                    for &seed in &self.seeds {
                        out.push((p, n, pause, seed));
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (a.0.name(), a.1)
                .cmp(&(b.0.name(), b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1 && a.2.total_cmp(&b.2).is_eq() && a.3 == b.3);
        out
    }
}

/// One finished sweep run, including statistics the CSV does not carry.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub record: MetricsRecord,
    pub stats: SimStats,
}

/// Runs the Cartesian product of `spec` on top of `base`, in parallel.
/// Results come back ordered by (protocol, node_count, pause_time, seed).
pub fn run_sweep_detailed(
    spec: &SweepSpec,
    base: &ScenarioConfig,
) -> Result<Vec<SweepRun>, SweepError> {
    spec.validate()?;
    spec.combinations()
        .into_par_iter()
        .map(|(protocol, node_count, pause_time, seed)| {
            let config = ScenarioConfig {
                node_count,
                pause_time,
                rng_seed: seed,
                ..base.clone()
            };
            config
                .validate()
                .and_then(|()| {
                    run_detailed(
                        &config,
                        protocol,
                        Mobility::RandomWaypoint,
                        make_flows(&config),
                        false,
                    )
                })
                .map(|o| SweepRun {
                    record: o.record,
                    stats: o.stats,
                })
                .map_err(|source| SweepError::Run {
                    protocol: protocol.name(),
                    pause_time,
                    node_count,
                    seed,
                    source,
                })
        })
        .collect()
}

pub fn run_sweep(
    spec: &SweepSpec,
    base: &ScenarioConfig,
) -> Result<Vec<MetricsRecord>, SweepError> {
    Ok(run_sweep_detailed(spec, base)?
        .into_iter()
        .map(|r| r.record)
        .collect())
}

pub fn write_records<W: Write>(records: &[MetricsRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation over seeds for one scenario point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub protocol: &'static str,
    pub pause_time: f64,
    pub node_count: usize,
    pub seeds: usize,
    pub control_packet_mean: f64,
    pub control_packet_stddev: f64,
    pub control_byte_mean: f64,
    pub control_byte_stddev: f64,
    pub delivery_ratio_mean: f64,
    pub delivery_ratio_stddev: f64,
    pub route_errors_mean: f64,
    pub route_unreachables_mean: f64,
    pub discovery_latency_mean: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups consecutive records of the same scenario point; expects the
/// ordering produced by [`run_sweep`].
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let same = |a: &MetricsRecord, b: &MetricsRecord| {
        a.protocol == b.protocol && a.node_count == b.node_count && a.pause_time == b.pause_time
    };
    for group in records.chunk_by(same) {
        let col = |f: fn(&MetricsRecord) -> f64| group.iter().map(f).collect::<Vec<_>>();
        let (cp, cps) = mean_sd(&col(|r| r.control_packet_count as f64));
        let (cb, cbs) = mean_sd(&col(|r| r.control_byte_count as f64));
        let (dr, drs) = mean_sd(&col(|r| r.delivery_ratio));
        rows.push(SummaryRow {
            protocol: group[0].protocol,
            pause_time: group[0].pause_time,
            node_count: group[0].node_count,
            seeds: group.len(),
            control_packet_mean: cp,
            control_packet_stddev: cps,
            control_byte_mean: cb,
            control_byte_stddev: cbs,
            delivery_ratio_mean: dr,
            delivery_ratio_stddev: drs,
            route_errors_mean: mean_sd(&col(|r| r.route_errors as f64)).0,
            route_unreachables_mean: mean_sd(&col(|r| r.route_unreachables as f64)).0,
            discovery_latency_mean: mean_sd(&col(|r| r.discovery_latency_mean)).0,
        });
    }
    rows
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
