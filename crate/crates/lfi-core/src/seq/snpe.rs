//! Sequential neural posterior estimation, types A and B.
//!
//! Both train a conditional MDN q(θ|x) over rounds, proposing each round's
//! simulation parameters from the current posterior estimate. SNPE-A trains
//! on the raw proposal draws and corrects the conditional at x₀ analytically
//! (prior over proposal); when the corrected precision loses positive
//! definiteness it stops and returns the previous round's estimate. SNPE-B
//! instead importance-weights the training loss by prior/proposal and needs
//! no correction, at the cost of weight variance.

use crate::abc::{simulate_batch, Simulator};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::flows::TrainConfig;
use crate::gauss::{Gaussian, GaussianMixture};
use crate::mdn::{snpea_correct, train_mdn, CorrectionPrior, MdnModel};
use crate::num::{Matrix, RngStream};
use crate::seq::diagnostics::neg_log_true_params;
use crate::trace::RoundTrace;

#[derive(Debug, Clone)]
pub struct SnpeConfig {
    pub rounds: usize,
    pub sims_per_round: usize,
    pub n_components: usize,
    pub trunk: Vec<usize>,
    pub train: TrainConfig,
    /// Reuse the previous round's weights instead of re-initializing.
    pub warm_start: bool,
    /// Optional per-round cap on training epochs (index = round − 1).
    pub round_epochs: Option<Vec<usize>>,
    /// Samples drawn from each round's estimate for trace summaries and the
    /// final posterior table.
    pub n_posterior_samples: usize,
    /// Attempt cap when resampling proposals into a bounded prior's support.
    pub max_proposal_attempts: u64,
}

impl Default for SnpeConfig {
    fn default() -> Self {
        SnpeConfig {
            rounds: 2,
            sims_per_round: 1000,
            n_components: 8,
            trunk: vec![50, 50],
            train: TrainConfig::default(),
            warm_start: true,
            round_epochs: None,
            n_posterior_samples: 1000,
            max_proposal_attempts: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnpeAResult {
    pub posterior: GaussianMixture,
    pub posterior_samples: Matrix,
    pub traces: Vec<RoundTrace>,
    pub terminated_early: bool,
    pub n_simulations: u64,
    pub model: MdnModel,
}

#[derive(Debug, Clone)]
pub struct SnpeBResult {
    pub model: MdnModel,
    pub posterior: GaussianMixture,
    pub posterior_samples: Matrix,
    pub traces: Vec<RoundTrace>,
    pub n_simulations: u64,
}

enum Proposal {
    Prior,
    Gaussian(Gaussian),
    Mixture(GaussianMixture),
}

impl Proposal {
    fn describe(&self) -> String {
        match self {
            Proposal::Prior => "prior".to_string(),
            Proposal::Gaussian(g) => format!("gaussian(mean {:?})", g.mean()),
            Proposal::Mixture(m) => format!("mdn mixture ({} components)", m.weights().len()),
        }
    }

    fn log_prob(&self, sim: &dyn Simulator, theta: &[f64]) -> f64 {
        match self {
            Proposal::Prior => sim.prior_log_prob(theta),
            Proposal::Gaussian(g) => g.log_prob(theta),
            Proposal::Mixture(m) => m.log_prob(theta),
        }
    }

    /// Draw inside the prior's support, resampling rejected points.
    fn sample_supported(
        &self,
        sim: &dyn Simulator,
        cap: u64,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        let mut attempts = 0;
        loop {
            let theta = match self {
                Proposal::Prior => sim.prior_sample(rng),
                Proposal::Gaussian(g) => g.sample(rng),
                Proposal::Mixture(m) => m.sample(rng),
            };
            if sim.prior_log_prob(&theta).is_finite() {
                return Ok(theta);
            }
            attempts += 1;
            if attempts >= cap {
                return Err(Error::DegeneratePopulation(format!(
                    "proposal produced no point inside the prior support in {cap} attempts"
                )));
            }
        }
    }
}

fn propose_batch(
    proposal: &Proposal,
    sim: &dyn Simulator,
    n: usize,
    cap: u64,
    rng: &mut RngStream,
) -> Result<Matrix> {
    let mut thetas = Matrix::zeros(n, sim.param_dim());
    for i in 0..n {
        let theta = proposal.sample_supported(sim, cap, rng)?;
        thetas.row_mut(i).copy_from_slice(&theta);
    }
    Ok(thetas)
}

pub(crate) fn validate_loop(rounds: usize, sims_per_round: usize) -> Result<()> {
    if rounds < 1 || sims_per_round < 1 {
        return Err(Error::Numeric(format!(
            "sequential runs need rounds >= 1 and sims_per_round >= 1, got {rounds} and {sims_per_round}"
        )));
    }
    Ok(())
}

fn round_train_config(cfg: &SnpeConfig, round: usize) -> TrainConfig {
    let mut tc = cfg.train.clone();
    if let Some(epochs) = &cfg.round_epochs {
        if let Some(&e) = epochs.get(round) {
            tc.max_epochs = e;
        }
    }
    tc
}

fn fresh_or_warm(
    model: Option<MdnModel>,
    sim: &dyn Simulator,
    cfg: &SnpeConfig,
    warm: bool,
    rng: &mut RngStream,
) -> MdnModel {
    match model {
        Some(m) if warm => m,
        _ => MdnModel::new(
            sim.data_dim(),
            sim.param_dim(),
            cfg.n_components,
            &cfg.trunk,
            rng,
        ),
    }
}

/// SNPE-A. `prior_gaussian` carries the Gaussian prior when there is one;
/// `None` invokes the uniform-prior form of the correction (p(θ) ∝ 1, with
/// bounded supports handled by resampling proposals into the support).
pub fn snpe_a_run(
    sim: &dyn Simulator,
    x0: &[f64],
    prior_gaussian: Option<&Gaussian>,
    cfg: &SnpeConfig,
    theta_true: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<SnpeAResult> {
    validate_loop(cfg.rounds, cfg.sims_per_round)?;
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut cumulative = 0u64;
    let mut model: Option<MdnModel> = None;
    let mut proposal = Proposal::Prior;
    let mut best: Option<(GaussianMixture, Matrix)> = None;
    let mut terminated_early = false;

    for round in 0..cfg.rounds {
        let start = std::time::Instant::now();
        let thetas = propose_batch(
            &proposal,
            sim,
            cfg.sims_per_round,
            cfg.max_proposal_attempts,
            rng,
        )?;
        let xs = simulate_batch(sim, &thetas, rng)?;
        cumulative += cfg.sims_per_round as u64;
        let data = Dataset::conditional(thetas, xs)?;

        let mut m = fresh_or_warm(model.take(), sim, cfg, cfg.warm_start, rng);
        let tc = round_train_config(cfg, round);
        train_mdn(&mut m, &data, None, &tc, rng).map_err(|e| Error::Round {
            algorithm: "snpe-a",
            round: round + 1,
            completed_rounds: traces.clone(),
            source: Box::new(e),
        })?;
        let raw = m.mixture_at(x0)?;

        let corrected = match &proposal {
            Proposal::Prior => Ok(raw),
            Proposal::Gaussian(g) => {
                let prior = match prior_gaussian {
                    Some(p) => CorrectionPrior::Gaussian(p),
                    None => CorrectionPrior::Uniform,
                };
                snpea_correct(&raw, g, prior)
            }
            Proposal::Mixture(_) => unreachable!("SNPE-A proposals are prior or Gaussian"),
        };
        let corrected = match corrected {
            Ok(c) => c,
            Err(Error::NonPositiveDefinite { .. }) => {
                // Improper estimate: stop and keep the previous round's.
                terminated_early = true;
                model = Some(m);
                break;
            }
            Err(e) => return Err(e),
        };

        let samples = corrected.sample_n(cfg.n_posterior_samples, rng);
        let mut trace = RoundTrace::new(
            round + 1,
            cfg.sims_per_round as u64,
            cumulative,
            &proposal.describe(),
        );
        trace.summarize_samples(&samples);
        if let Some(tt) = theta_true {
            trace.neg_log_true_params = neg_log_true_params(&samples, tt).ok();
        }
        trace.wall_clock_seconds = start.elapsed().as_secs_f64();
        traces.push(trace);

        proposal = Proposal::Gaussian(corrected.moment_match()?);
        best = Some((corrected, samples));
        model = Some(m);
    }

    let (posterior, posterior_samples) = best.ok_or_else(|| Error::Round {
        algorithm: "snpe-a",
        round: 1,
        completed_rounds: traces.clone(),
        source: Box::new(Error::NonPositiveDefinite { component: 0 }),
    })?;
    Ok(SnpeAResult {
        posterior,
        posterior_samples,
        traces,
        terminated_early,
        n_simulations: cumulative,
        model: model.expect("at least one round trained"),
    })
}

/// SNPE-B: importance-weighted training with wₙ = p(θₙ)/p̃(θₙ); the posterior
/// estimate is the trained conditional at x₀ directly and the loop never
/// terminates early.
pub fn snpe_b_run(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &SnpeConfig,
    theta_true: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<SnpeBResult> {
    validate_loop(cfg.rounds, cfg.sims_per_round)?;
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut cumulative = 0u64;
    let mut model: Option<MdnModel> = None;
    let mut proposal = Proposal::Prior;
    let mut last: Option<(GaussianMixture, Matrix)> = None;

    for round in 0..cfg.rounds {
        let start = std::time::Instant::now();
        let thetas = propose_batch(
            &proposal,
            sim,
            cfg.sims_per_round,
            cfg.max_proposal_attempts,
            rng,
        )?;
        let xs = simulate_batch(sim, &thetas, rng)?;
        cumulative += cfg.sims_per_round as u64;

        // Round 1 uses the prior, so the ratio is exactly 1 for every row.
        let weights: Vec<f64> = match &proposal {
            Proposal::Prior => vec![1.0; cfg.sims_per_round],
            p => {
                let log_ratios: Vec<f64> = thetas
                    .iter_rows()
                    .map(|t| sim.prior_log_prob(t) - p.log_prob(sim, t))
                    .collect();
                // Normalize to mean 1 so the loss scale stays comparable
                // across rounds; a common factor does not move the optimum.
                let max = log_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(Error::Round {
                        algorithm: "snpe-b",
                        round: round + 1,
                        completed_rounds: traces.clone(),
                        source: Box::new(Error::DegenerateWeights(
                            "all importance weights are zero".into(),
                        )),
                    });
                }
                let raw: Vec<f64> = log_ratios.iter().map(|lr| (lr - max).exp()).collect();
                let mean = raw.iter().sum::<f64>() / raw.len() as f64;
                raw.into_iter().map(|w| w / mean).collect()
            }
        };
        let weight_variance = {
            let mean = weights.iter().sum::<f64>() / weights.len() as f64;
            weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / weights.len() as f64
        };

        let data = Dataset::conditional(thetas, xs)?;
        let mut m = fresh_or_warm(model.take(), sim, cfg, cfg.warm_start, rng);
        let tc = round_train_config(cfg, round);
        train_mdn(&mut m, &data, Some(&weights), &tc, rng).map_err(|e| Error::Round {
            algorithm: "snpe-b",
            round: round + 1,
            completed_rounds: traces.clone(),
            source: Box::new(e),
        })?;

        let posterior = m.mixture_at(x0)?;
        let samples = posterior.sample_n(cfg.n_posterior_samples, rng);
        let mut trace = RoundTrace::new(
            round + 1,
            cfg.sims_per_round as u64,
            cumulative,
            &proposal.describe(),
        );
        trace.summarize_samples(&samples);
        trace.weight_variance = Some(weight_variance);
        if let Some(tt) = theta_true {
            trace.neg_log_true_params = neg_log_true_params(&samples, tt).ok();
        }
        trace.wall_clock_seconds = start.elapsed().as_secs_f64();
        traces.push(trace);

        proposal = Proposal::Mixture(posterior.clone());
        last = Some((posterior, samples));
        model = Some(m);
    }

    let (posterior, posterior_samples) = last.expect("rounds >= 1");
    Ok(SnpeBResult {
        model: model.expect("trained"),
        posterior,
        posterior_samples,
        traces,
        n_simulations: cumulative,
    })
}
