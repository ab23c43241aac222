//! MaxVar acquisition: pick the next simulation point by maximizing the
//! empirical variance, across an ensemble of likelihood models, of the
//! unnormalized posterior density q(x₀|θ)·p(θ). The ensemble of
//! independently initialized and trained models stands in for a Bayesian
//! posterior over network weights.

use crate::abc::Simulator;
use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::num::RngStream;

#[derive(Debug, Clone)]
pub struct MaxVarSearch {
    /// Prior-sampled starting points for the coordinate search.
    pub n_starts: usize,
    /// Coordinate-descent sweeps per start.
    pub sweeps: usize,
}

impl Default for MaxVarSearch {
    fn default() -> Self {
        MaxVarSearch {
            n_starts: 64,
            sweeps: 12,
        }
    }
}

/// Log of the empirical-variance objective, stable under density scaling:
/// with aₘ = log qₘ(x₀|θ) + log p(θ) and M = max aₘ, the objective is
/// 2M + log Var(exp(aₘ − M)). Returns −∞ outside prior support or when the
/// ensemble members agree exactly.
fn log_objective(
    ensemble: &[&dyn ConditionalDensity],
    prior: &dyn Simulator,
    x0: &[f64],
    theta: &[f64],
) -> Result<f64> {
    let prior_lp = prior.prior_log_prob(theta);
    if !prior_lp.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut a = Vec::with_capacity(ensemble.len());
    for model in ensemble {
        a.push(model.log_prob(x0, theta)? + prior_lp);
    }
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let var = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / e.len() as f64;
    if var <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(2.0 * m + var.ln())
}

/// Multi-start coordinate search for the MaxVar point. Needs at least two
/// ensemble members; errors when the variance objective vanishes everywhere
/// probed (identical members).
pub fn maxvar_acquire(
    ensemble: &[&dyn ConditionalDensity],
    prior: &dyn Simulator,
    x0: &[f64],
    search: &MaxVarSearch,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if ensemble.len() < 2 {
        return Err(Error::DegenerateAcquisition(
            "MaxVar needs an ensemble of at least two models".into(),
        ));
    }
    let d = prior.param_dim();
    // Starting points and per-axis step scale from the prior.
    let mut starts = Vec::with_capacity(search.n_starts);
    for _ in 0..search.n_starts {
        starts.push(prior.prior_sample(rng));
    }
    let mut step = vec![0.0; d];
    for axis in 0..d {
        let mean = starts.iter().map(|s| s[axis]).sum::<f64>() / starts.len() as f64;
        let var = starts
            .iter()
            .map(|s| (s[axis] - mean) * (s[axis] - mean))
            .sum::<f64>()
            / starts.len() as f64;
        step[axis] = var.sqrt().max(1e-3);
    }

    let mut best_theta: Option<Vec<f64>> = None;
    let mut best_obj = f64::NEG_INFINITY;
    for start in starts {
        let mut theta = start;
        let mut obj = log_objective(ensemble, prior, x0, &theta)?;
        let mut local_step = step.clone();
        for _ in 0..search.sweeps {
            let mut improved = false;
            for axis in 0..d {
                for dir in [-1.0, 1.0] {
                    let mut cand = theta.clone();
                    cand[axis] += dir * local_step[axis];
                    let cand_obj = log_objective(ensemble, prior, x0, &cand)?;
                    if cand_obj > obj {
                        theta = cand;
                        obj = cand_obj;
                        improved = true;
                    }
                }
            }
            if !improved {
                for s in &mut local_step {
                    *s *= 0.5;
                }
            }
        }
        if obj > best_obj {
            best_obj = obj;
            best_theta = Some(theta);
        }
    }
    match best_theta {
        Some(theta) if best_obj.is_finite() => Ok(theta),
        _ => Err(Error::DegenerateAcquisition(
            "variance objective is zero everywhere probed".into(),
        )),
    }
}
