//! Deterministic numeric substrate: matrices, masked affine layers with
//! reverse-mode gradients, the Adam update, a finite-difference oracle, and
//! seeded random streams.

mod adam;
mod fd;
mod layer;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fd::finite_diff_grad;
pub use layer::{Activation, LayerGrads, MaskedLayer};
pub use matrix::{
    cholesky, log_sum_exp, logabsdet, logdet_from_cholesky, solve_lower, solve_lower_transpose,
    solve_spd, spd_inverse, Matrix,
};
pub use rng::RngStream;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Standard-normal log-density.
#[inline]
pub fn std_normal_log_pdf(z: f64) -> f64 {
    -0.5 * (LN_2PI + z * z)
}
