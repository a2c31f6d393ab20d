use crate::model::{FuelKind, Violation};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no fuel price configured for {0}")]
    MissingFuelPrice(FuelKind),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series `{name}` has {found} values, expected {expected}")]
    LengthMismatch {
        name: String,
        found: usize,
        expected: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unit `{0}` has no heat capacity")]
    NotChp(String),

    #[error("cannot decommission {target_gw} GW of {fuel}: only {installed_gw} GW installed")]
    TargetExceedsInstalled {
        fuel: FuelKind,
        target_gw: f64,
        installed_gw: f64,
    },

    #[error("fleet validation failed with {} violation(s): {}", .0.len(), summarize(.0))]
    InvalidFleet(Vec<Violation>),

    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
