use std::path::PathBuf;

use thiserror::Error;

/// Invalid or inconsistent simulation input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("grid needs at least 2 points along {axis} (got {points})")]
    TooFewPoints { axis: &'static str, points: usize },
    #[error(
        "time step of {step_ns:.3} ns cannot resolve the {pulse_ns:.3} ns pump pulse; \
         increase time_points"
    )]
    PumpUnresolved { step_ns: f64, pulse_ns: f64 },
    #[error("simulated time {total_ns:.3} ns ends before the pump pulse ({pulse_end_ns:.3} ns)")]
    WindowTooShort { total_ns: f64, pulse_end_ns: f64 },
    #[error("n_mu must be non-negative (got {0})")]
    NegativeNMu(f64),
    #[error("failed to parse configuration: {0}")]
    Parse(String),
}

/// Top-level failure of a run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{discarded} of {requested} trajectories were discarded (limit {limit_percent}%)")]
    TooManyDiscarded {
        discarded: u64,
        requested: u64,
        limit_percent: u32,
    },
    #[error("observable unavailable: {0}")]
    Observable(String),
}

impl SimError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            context: context.into(),
            source,
        }
    }
}
