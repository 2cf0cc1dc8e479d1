use thiserror::Error;

use crate::strategy::AdmissibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid return distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid coin: {0}")]
    InvalidCoin(String),

    #[error("stage count must be at least 1")]
    EmptyHorizon,

    #[error("initial account value must be positive and finite, got {0}")]
    InvalidInitialValue(f64),

    #[error("enumeration of {outcomes}^{stages} paths exceeds the cap of {cap}")]
    EnumerationTooLarge {
        outcomes: usize,
        stages: usize,
        cap: u64,
    },

    #[error("invalid account state: {0}")]
    InvalidState(String),

    #[error("drawdown {drawdown} exceeds d_max {d_max}")]
    DrawdownBreach { drawdown: f64, d_max: f64 },

    #[error("account value went negative ({value}) at stage {stage}: inadmissible investment")]
    Bankruptcy { stage: usize, value: f64 },

    #[error("inadmissible strategy: {0}")]
    Inadmissible(AdmissibilityReport),

    #[error("return series has length {got}, horizon is {expected}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error("drawdown of an empty value series is undefined")]
    EmptySeries,

    #[error("invalid account value series: {0}")]
    InvalidSeries(String),

    #[error("no closed form available: {0}")]
    ClosedFormUnavailable(String),

    #[error("Monte-Carlo path count must be at least 1")]
    NoPaths,

    #[error("log growth undefined: terminal account value is zero on a reachable path")]
    LogOfZero,

    #[error("invalid frontier query: {0}")]
    InvalidQuery(String),

    #[error("{0}")]
    Infeasible(Box<crate::frontier::InfeasibleTarget>),
}
