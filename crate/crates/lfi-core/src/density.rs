//! The conditional-density contract shared by every model in the zoo:
//! log-density evaluation and ancestral sampling given a context. The
//! unconditional case is context dimension zero.

use crate::error::Result;
use crate::num::{Matrix, RngStream};

pub trait ConditionalDensity {
    fn target_dim(&self) -> usize;

    /// Zero for unconditional models.
    fn context_dim(&self) -> usize;

    fn log_prob(&self, target: &[f64], context: &[f64]) -> Result<f64>;

    fn sample(&self, n: usize, context: &[f64], rng: &mut RngStream) -> Result<Matrix>;
}
