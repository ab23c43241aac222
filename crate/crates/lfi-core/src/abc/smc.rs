//! SMC-ABC: a sequence of importance-sampling ABC rounds with decreasing
//! tolerances, proposing each round from the weighted Gaussian-perturbation
//! mixture built on the previous population.

use crate::abc::{ess_estimate, rejection_abc, AbcConfig, Distance, Simulator, WeightedPopulation};
use crate::error::{Error, Result};
use crate::num::{log_sum_exp, Matrix, RngStream, LN_2PI};
use crate::trace::RoundTrace;

#[derive(Debug, Clone)]
pub struct SmcConfig {
    /// Strictly decreasing tolerance schedule; round 1 runs rejection ABC at
    /// the first value.
    pub schedule: Vec<f64>,
    pub population_size: usize,
    /// Resample to uniform weights when Ŝ drops below this (default N/2).
    pub ess_min: f64,
    pub distance: Distance,
    pub max_simulations: u64,
}

impl SmcConfig {
    pub fn new(schedule: Vec<f64>, population_size: usize) -> Self {
        SmcConfig {
            schedule,
            population_size,
            ess_min: population_size as f64 / 2.0,
            distance: Distance::Euclidean,
            max_simulations: 10_000_000,
        }
    }
}

/// Per-axis perturbation kernel scale: √2 × weighted population std,
/// floored so the proposal mixture never degenerates to point masses.
fn perturb_std(pop: &WeightedPopulation) -> Vec<f64> {
    pop.weighted_std()
        .into_iter()
        .map(|s| (std::f64::consts::SQRT_2 * s).max(1e-6))
        .collect()
}

/// log density of the weighted perturbation mixture Σ wₘ N(θ; θₘ, diag(σ²)).
fn log_mixture_density(pop: &WeightedPopulation, std: &[f64], theta: &[f64]) -> f64 {
    let d = theta.len();
    let log_norm: f64 = -0.5 * d as f64 * LN_2PI - std.iter().map(|s| s.ln()).sum::<f64>();
    let terms: Vec<f64> = pop
        .params
        .iter_rows()
        .zip(&pop.weights)
        .map(|(row, w)| {
            let q: f64 = row
                .iter()
                .zip(theta)
                .zip(std)
                .map(|((m, t), s)| {
                    let z = (t - m) / s;
                    z * z
                })
                .sum();
            w.ln() + log_norm - 0.5 * q
        })
        .collect();
    log_sum_exp(&terms)
}

/// Run the full schedule. The first round is rejection ABC driven by the
/// same stream, so its output is bit-identical to calling `rejection_abc`
/// directly. Budget exhaustion mid-schedule reports the completed rounds.
pub fn smc_abc(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &SmcConfig,
    rng: &mut RngStream,
) -> Result<(WeightedPopulation, Vec<RoundTrace>)> {
    if cfg.schedule.is_empty() || cfg.schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Numeric(
            "SMC schedule must be non-empty and strictly decreasing".into(),
        ));
    }
    if cfg.population_size < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: cfg.population_size,
        });
    }
    let n = cfg.population_size;
    let mut traces = Vec::with_capacity(cfg.schedule.len());
    let mut cumulative: u64 = 0;

    let round1 = AbcConfig {
        epsilon: cfg.schedule[0],
        distance: cfg.distance,
        max_simulations: cfg.max_simulations,
    };
    let out = rejection_abc(sim, x0, &round1, n, rng).map_err(|e| wrap_budget(e, 0, &traces))?;
    cumulative += out.n_simulated;
    let mut pop = WeightedPopulation::uniform(out.params)?;
    let mut trace = RoundTrace::new(1, out.n_simulated, cumulative, "prior (rejection)");
    trace.summarize_samples(&pop.params);
    trace.ess = Some(ess_estimate(&pop));
    traces.push(trace);

    for (round_idx, &eps) in cfg.schedule.iter().enumerate().skip(1) {
        let std = perturb_std(&pop);
        let mut params = Matrix::zeros(n, sim.param_dim());
        let mut used: u64 = 0;
        for slot in 0..n {
            loop {
                if cumulative + used >= cfg.max_simulations {
                    return Err(Error::SmcBudgetExhausted {
                        round: round_idx + 1,
                        n_simulated: cumulative + used,
                        completed_rounds: traces,
                        last_population: Some(Box::new(pop)),
                    });
                }
                let pick = rng.categorical(&pop.weights);
                let theta: Vec<f64> = pop
                    .params
                    .row(pick)
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| m + s * rng.normal())
                    .collect();
                let x = sim.simulate(&theta, rng);
                used += 1;
                if cfg.distance.eval(&x, x0) <= eps {
                    params.row_mut(slot).copy_from_slice(&theta);
                    break;
                }
            }
        }
        cumulative += used;
        let log_weights: Vec<f64> = (0..n)
            .map(|i| {
                let theta = params.row(i);
                let lp = sim.prior_log_prob(theta);
                if !lp.is_finite() {
                    return f64::NEG_INFINITY;
                }
                lp - log_mixture_density(&pop, &std, theta)
            })
            .collect();
        let max = log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegeneratePopulation(format!(
                "round {}: no particle has prior support",
                round_idx + 1
            )));
        }
        let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
        pop = WeightedPopulation::new(params, weights)?;
        let ess = ess_estimate(&pop);
        let mut trace = RoundTrace::new(
            round_idx + 1,
            used,
            cumulative,
            &format!("perturbation mixture at eps {eps}"),
        );
        trace.summarize_samples(&pop.params);
        trace.ess = Some(ess);
        traces.push(trace);
        if ess < cfg.ess_min {
            pop = pop.resample(rng);
        }
    }
    Ok((pop, traces))
}

fn wrap_budget(e: Error, round: usize, traces: &[RoundTrace]) -> Error {
    match e {
        Error::BudgetExhausted { n_simulated, .. } => Error::SmcBudgetExhausted {
            round: round + 1,
            n_simulated,
            completed_rounds: traces.to_vec(),
            last_population: None,
        },
        other => other,
    }
}
