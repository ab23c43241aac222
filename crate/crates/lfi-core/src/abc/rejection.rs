//! Rejection ABC, smooth-rejection ABC, and importance-sampling ABC.

use crate::abc::{AbcConfig, ParamDensity, Simulator, WeightedPopulation};
use crate::classic::KdeKernel;
use crate::error::{Error, Result};
use crate::num::{Matrix, RngStream, LN_2PI};

/// Accepted parameters with the data that produced them (kept for
/// regression adjustment) and the simulation count.
#[derive(Debug, Clone)]
pub struct RejectionOutput {
    pub params: Matrix,
    pub data: Matrix,
    pub n_simulated: u64,
}

/// Repeat {θ ~ prior, x ~ simulator} until ‖x − x₀‖ ≤ ε, for each of
/// `n_accept` slots. Errors with the partial results when the simulation
/// budget runs out first.
pub fn rejection_abc(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &AbcConfig,
    n_accept: usize,
    rng: &mut RngStream,
) -> Result<RejectionOutput> {
    let mut params = Matrix::zeros(n_accept, sim.param_dim());
    let mut data = Matrix::zeros(n_accept, sim.data_dim());
    let mut n_simulated: u64 = 0;
    for slot in 0..n_accept {
        loop {
            if n_simulated >= cfg.max_simulations {
                let mut partial = Matrix::zeros(slot, sim.param_dim());
                for r in 0..slot {
                    partial.row_mut(r).copy_from_slice(params.row(r));
                }
                return Err(Error::BudgetExhausted {
                    n_simulated,
                    n_accepted: slot,
                    partial: Box::new(partial),
                });
            }
            let theta = sim.prior_sample(rng);
            let x = sim.simulate(&theta, rng);
            n_simulated += 1;
            if cfg.distance.eval(&x, x0) <= cfg.epsilon {
                params.row_mut(slot).copy_from_slice(&theta);
                data.row_mut(slot).copy_from_slice(&x);
                break;
            }
        }
    }
    Ok(RejectionOutput {
        params,
        data,
        n_simulated,
    })
}

/// Smoothing kernels for smooth-rejection ABC. The uniform kernel reproduces
/// plain rejection's indicator weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingKernel {
    Uniform,
    Gaussian,
    Epanechnikov,
}

impl SmoothingKernel {
    /// log k_ε(u), up to a constant shared across evaluations (the weights
    /// are normalized afterwards).
    fn log_eval(self, diff: &[f64], eps: f64, distance: crate::abc::Distance) -> f64 {
        match self {
            SmoothingKernel::Uniform => {
                let zero = vec![0.0; diff.len()];
                if distance.eval(diff, &zero) <= eps {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            SmoothingKernel::Gaussian => {
                let q: f64 = diff.iter().map(|v| (v / eps) * (v / eps)).sum();
                -0.5 * (diff.len() as f64 * LN_2PI + q)
            }
            SmoothingKernel::Epanechnikov => {
                let mut logk = 0.0;
                for &v in diff {
                    let u = v / eps;
                    if u.abs() > 1.0 {
                        return f64::NEG_INFINITY;
                    }
                    logk += (1.0 - u * u).max(0.0).ln();
                }
                logk
            }
        }
    }
}

impl From<KdeKernel> for SmoothingKernel {
    fn from(k: KdeKernel) -> Self {
        match k {
            KdeKernel::Gaussian => SmoothingKernel::Gaussian,
            KdeKernel::Epanechnikov => SmoothingKernel::Epanechnikov,
        }
    }
}

/// Weight each of N prior samples by k_ε(x₀ − xₙ) instead of accepting or
/// rejecting. Zero total kernel mass is a degenerate population.
pub fn smooth_rejection_abc(
    sim: &dyn Simulator,
    x0: &[f64],
    kernel: SmoothingKernel,
    eps: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<WeightedPopulation> {
    let mut params = Matrix::zeros(n, sim.param_dim());
    let mut log_weights = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        let theta = sim.prior_sample(rng);
        let x = sim.simulate(&theta, rng);
        params.row_mut(i).copy_from_slice(&theta);
        let diff: Vec<f64> = x0.iter().zip(&x).map(|(a, b)| a - b).collect();
        log_weights[i] = kernel.log_eval(&diff, eps, crate::abc::Distance::Euclidean);
    }
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegeneratePopulation(
            "every kernel weight is zero".into(),
        ));
    }
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    WeightedPopulation::new(params, weights)
}

/// Importance-sampling ABC: repeat-until-accept per slot under the proposal,
/// then weight accepted θₙ by p(θₙ)/p̃(θₙ), normalized. An accepted particle
/// with zero proposal density but prior support is a support violation and
/// reported as a degenerate population rather than silently renormalized.
pub fn is_abc(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &AbcConfig,
    proposal: &dyn ParamDensity,
    n: usize,
    rng: &mut RngStream,
) -> Result<(WeightedPopulation, u64)> {
    let mut params = Matrix::zeros(n, sim.param_dim());
    let mut log_ratio = vec![0.0; n];
    let mut n_simulated: u64 = 0;
    for slot in 0..n {
        loop {
            if n_simulated >= cfg.max_simulations {
                let mut partial = Matrix::zeros(slot, sim.param_dim());
                for r in 0..slot {
                    partial.row_mut(r).copy_from_slice(params.row(r));
                }
                return Err(Error::BudgetExhausted {
                    n_simulated,
                    n_accepted: slot,
                    partial: Box::new(partial),
                });
            }
            let theta = proposal.sample(rng);
            let x = sim.simulate(&theta, rng);
            n_simulated += 1;
            if cfg.distance.eval(&x, x0) <= cfg.epsilon {
                let lp = sim.prior_log_prob(&theta);
                let lq = proposal.log_prob(&theta);
                if lp.is_finite() && !lq.is_finite() {
                    return Err(Error::DegeneratePopulation(format!(
                        "proposal has zero density at accepted particle {slot} inside the prior support"
                    )));
                }
                params.row_mut(slot).copy_from_slice(&theta);
                log_ratio[slot] = lp - lq;
                break;
            }
        }
    }
    let max = log_ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegeneratePopulation(
            "all importance ratios are zero".into(),
        ));
    }
    let weights: Vec<f64> = log_ratio.iter().map(|lr| (lr - max).exp()).collect();
    Ok((WeightedPopulation::new(params, weights)?, n_simulated))
}
