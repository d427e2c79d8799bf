use thiserror::Error;

use crate::wsr::SolveReport;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("zero-forcing needs more antennas than pilots (N = {antennas}, T_p = {pilots})")]
    ZfAntennaDeficit { antennas: usize, pilots: usize },
    #[error("inconsistent scenario: {0}")]
    Scenario(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("expansion point must be strictly positive (user {user} has p = {value:e})")]
    NonPositiveExpansion { user: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no positive power vector satisfies the fronthaul constraints")]
    InfeasibleStart,
    #[error("SCA iteration limit reached after {} iterations", .0.sca_iterations)]
    IterationLimit(Box<SolveReport>),
    #[error("multiplier bisection did not converge for RRU {rru}")]
    Bisection { rru: usize },
    #[error("invalid solver input: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
