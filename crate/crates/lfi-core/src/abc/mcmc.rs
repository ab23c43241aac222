//! MCMC-ABC and pseudo-marginal Metropolis-Hastings.
//!
//! Both use a Gaussian random-walk proposal, which is symmetric, so the
//! proposal ratio drops out of the acceptance probability.

use crate::abc::{AbcConfig, Simulator};
use crate::error::Result;
use crate::num::{Matrix, RngStream};

/// Markov chain targeting p(θ | ‖x−x₀‖ ≤ ε). Each step proposes
/// θ' = θ + σ⊙z, simulates once, and accepts only when the simulation lands
/// within ε and the prior ratio passes; otherwise the chain stays put. The
/// initial state is taken as given (unchecked); a poor initialization shows
/// up as a stuck chain in diagnostics, not as an error.
pub fn mcmc_abc_chain(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &AbcConfig,
    proposal_std: &[f64],
    theta_init: &[f64],
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    let d = sim.param_dim();
    let mut chain = Matrix::zeros(n_steps, d);
    let mut theta = theta_init.to_vec();
    let mut theta_lp = sim.prior_log_prob(&theta);
    for step in 0..n_steps {
        let proposed: Vec<f64> = theta
            .iter()
            .zip(proposal_std)
            .map(|(t, s)| t + s * rng.normal())
            .collect();
        let x = sim.simulate(&proposed, rng);
        if cfg.distance.eval(&x, x0) <= cfg.epsilon {
            let proposed_lp = sim.prior_log_prob(&proposed);
            let log_alpha = proposed_lp - theta_lp;
            if log_alpha >= 0.0 || rng.uniform_open().ln() <= log_alpha {
                theta = proposed;
                theta_lp = proposed_lp;
            }
        }
        chain.row_mut(step).copy_from_slice(&theta);
    }
    Ok(chain)
}

/// Pseudo-marginal chain state: the current parameters and the kept
/// approximate-likelihood estimate L̂ (the fraction of inner simulations
/// within ε).
#[derive(Debug, Clone, PartialEq)]
pub struct PmState {
    pub theta: Vec<f64>,
    pub likelihood_estimate: f64,
}

/// One pseudo-marginal Metropolis-Hastings step: propose, simulate
/// `n_inner` times, estimate L̂' as the within-ε fraction, and accept with
/// min(1, L̂'p(θ')/L̂p(θ)). With `n_inner = 1` this is exactly the MCMC-ABC
/// rule.
pub fn pseudo_marginal_mh_step(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &AbcConfig,
    n_inner: usize,
    state: &PmState,
    proposal_std: &[f64],
    rng: &mut RngStream,
) -> Result<PmState> {
    let proposed: Vec<f64> = state
        .theta
        .iter()
        .zip(proposal_std)
        .map(|(t, s)| t + s * rng.normal())
        .collect();
    let mut hits = 0usize;
    for _ in 0..n_inner {
        let x = sim.simulate(&proposed, rng);
        if cfg.distance.eval(&x, x0) <= cfg.epsilon {
            hits += 1;
        }
    }
    let proposed_l = hits as f64 / n_inner as f64;
    let num = proposed_l * sim.prior_log_prob(&proposed).exp();
    let den = state.likelihood_estimate * sim.prior_log_prob(&state.theta).exp();
    let accept = if num <= 0.0 {
        false
    } else if den <= 0.0 {
        true
    } else {
        rng.uniform() <= num / den
    };
    if accept {
        Ok(PmState {
            theta: proposed,
            likelihood_estimate: proposed_l,
        })
    } else {
        Ok(state.clone())
    }
}
