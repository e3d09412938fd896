use thiserror::Error;

/// Problems with a scenario description, either while parsing the
/// key=value file or while validating the resulting values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("unknown key `{0}`")]
    NoSuchKey(String),
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("constraint violated: {0}")]
    Invalid(String),
    #[error("i/o error reading {path}: {message}")]
    Io { path: String, message: String },
}

/// Arguments outside the domain of an analytic formula.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} = {value} is outside [0, 1]")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("{name} = {value} must be nonnegative")]
    Negative { name: &'static str, value: f64 },
    #[error("{0}")]
    Undefined(String),
    #[error("{formula}: {source}")]
    InFormula {
        formula: &'static str,
        #[source]
        source: Box<DomainError>,
    },
}

impl DomainError {
    pub fn in_formula(self, formula: &'static str) -> Self {
        DomainError::InFormula {
            formula,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScheduleError {
    #[error("event at t={at} is earlier than the current time t={now}")]
    InPast { at: f64, now: f64 },
    #[error("event time is not a finite number")]
    NotFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("empty sweep: no {0} given")]
    Empty(&'static str),
    #[error("unknown protocol `{0}` (expected jbr or flood)")]
    UnknownProtocol(String),
    #[error("{protocol} pause={pause_time} nodes={node_count} seed={seed}: {source}")]
    Run {
        protocol: &'static str,
        pause_time: f64,
        node_count: usize,
        seed: u64,
        #[source]
        source: ConfigError,
    },
}
