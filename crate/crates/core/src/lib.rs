//! Janitor based routing for mobile ad hoc networks: a discrete-event
//! simulator, a flooding baseline for comparison, and the closed-form
//! reliability and cost model with Monte Carlo cross-checks.

pub mod analytics;
pub mod baseline;
pub mod config;
pub mod error;
pub mod harness;
pub mod jbr;
pub mod simcore;

pub use config::{ScenarioConfig, WireSizes};
pub use error::{ConfigError, DomainError, ScheduleError, SweepError};
pub use simcore::NodeId;
