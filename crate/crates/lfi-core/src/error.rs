//! Crate-wide error type.

use crate::abc::WeightedPopulation;
use crate::num::Matrix;
use crate::trace::RoundTrace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("datapoint {index} lies outside the histogram range")]
    OutOfRange { index: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    #[error("covariance is not positive-definite")]
    CovarianceNotPd,

    #[error("corrected precision for component {component} is not positive-definite")]
    NonPositiveDefinite { component: usize },

    #[error("simulation budget exhausted after {n_simulated} simulations ({n_accepted} accepted)")]
    BudgetExhausted {
        n_simulated: u64,
        n_accepted: usize,
        partial: Box<Matrix>,
    },

    #[error("simulation budget exhausted in SMC round {round} after {n_simulated} simulations")]
    SmcBudgetExhausted {
        round: usize,
        n_simulated: u64,
        completed_rounds: Vec<RoundTrace>,
        last_population: Option<Box<WeightedPopulation>>,
    },

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("round {round} of {algorithm} failed: {source}")]
    Round {
        algorithm: &'static str,
        round: usize,
        completed_rounds: Vec<RoundTrace>,
        #[source]
        source: Box<Error>,
    },

    #[error("chain initialization failed: {0}")]
    ChainInit(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("degenerate acquisition: {0}")]
    DegenerateAcquisition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
