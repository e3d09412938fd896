//! Experiment runner: single runs, pause-time sweeps, analytic tables, CSV.

mod analytic;
mod experiment;
mod sweep;

pub use analytic::{evaluate_analytics, write_analytics, AnalyticRow, Formula, McSettings};
pub use experiment::{
    make_flows, run_detailed, run_experiment, MetricsRecord, Protocol, RunOutcome,
};
pub use sweep::{
    run_sweep, run_sweep_detailed, summarize, write_records, write_summary, SummaryRow, SweepRun,
    SweepSpec,
};
