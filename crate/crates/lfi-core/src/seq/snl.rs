//! Sequential Neural Likelihood: train a conditional density model of data
//! given parameters on every round's simulations pooled together, and sample
//! the induced posterior p̂(θ|x₀) ∝ q(x₀|θ)·p(θ) with axis-aligned slice
//! sampling. Parameter proposals for the next round are MCMC draws from the
//! current posterior estimate.

use serde::{Deserialize, Serialize};

use crate::abc::{simulate_batch, Simulator};
use crate::dataset::Dataset;
use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::flows::{train_mle, MafModel, TrainConfig};
use crate::mdn::MdnModel;
use crate::num::{Matrix, RngStream};
use crate::seq::diagnostics::neg_log_true_params;
use crate::seq::maxvar::{maxvar_acquire, MaxVarSearch};
use crate::seq::mmd::mmd_statistic;
use crate::seq::slice::slice_sample_axis;
use crate::trace::RoundTrace;

/// Architecture of the likelihood model q(x|θ).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodArch {
    Maf {
        layers: usize,
        hidden: Vec<usize>,
    },
    Mdn {
        components: usize,
        trunk: Vec<usize>,
    },
}

impl Default for LikelihoodArch {
    fn default() -> Self {
        LikelihoodArch::Maf {
            layers: 5,
            hidden: vec![50],
        }
    }
}

/// The trained likelihood model, either flavor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodModel {
    Maf(MafModel),
    Mdn(MdnModel),
}

impl LikelihoodModel {
    fn build(
        arch: &LikelihoodArch,
        data_dim: usize,
        param_dim: usize,
        rng: &mut RngStream,
    ) -> Self {
        match arch {
            LikelihoodArch::Maf { layers, hidden } => {
                LikelihoodModel::Maf(MafModel::new(data_dim, param_dim, *layers, hidden, rng))
            }
            LikelihoodArch::Mdn { components, trunk } => {
                LikelihoodModel::Mdn(MdnModel::new(param_dim, data_dim, *components, trunk, rng))
            }
        }
    }

    fn train(&mut self, data: &Dataset, cfg: &TrainConfig, rng: &mut RngStream) -> Result<()> {
        match self {
            LikelihoodModel::Maf(m) => train_mle(m, data, None, cfg, rng).map(|_| ()),
            LikelihoodModel::Mdn(m) => train_mle(m, data, None, cfg, rng).map(|_| ()),
        }
    }
}

impl ConditionalDensity for LikelihoodModel {
    fn target_dim(&self) -> usize {
        match self {
            LikelihoodModel::Maf(m) => m.target_dim(),
            LikelihoodModel::Mdn(m) => ConditionalDensity::target_dim(m),
        }
    }

    fn context_dim(&self) -> usize {
        match self {
            LikelihoodModel::Maf(m) => ConditionalDensity::context_dim(m),
            LikelihoodModel::Mdn(m) => ConditionalDensity::context_dim(m),
        }
    }

    fn log_prob(&self, target: &[f64], context: &[f64]) -> Result<f64> {
        match self {
            LikelihoodModel::Maf(m) => ConditionalDensity::log_prob(m, target, context),
            LikelihoodModel::Mdn(m) => ConditionalDensity::log_prob(m, target, context),
        }
    }

    fn sample(&self, n: usize, context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        match self {
            LikelihoodModel::Maf(m) => ConditionalDensity::sample(m, n, context, rng),
            LikelihoodModel::Mdn(m) => ConditionalDensity::sample(m, n, context, rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub burn_in: usize,
    /// Sweeps drawn per retained sample (M proposals come from
    /// `oversample`·M post-burn-in states).
    pub oversample: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 200,
            oversample: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnlConfig {
    pub rounds: usize,
    pub sims_per_round: usize,
    pub arch: LikelihoodArch,
    pub train: TrainConfig,
    pub warm_start: bool,
    pub mcmc: McmcConfig,
    pub n_posterior_samples: usize,
    /// Record the simulator-vs-model MMD diagnostic each round. The
    /// diagnostic's simulator calls are not counted as training simulations.
    pub mmd_diagnostic: bool,
    /// Number of draws per side for the MMD diagnostic.
    pub mmd_draws: usize,
}

impl Default for SnlConfig {
    fn default() -> Self {
        SnlConfig {
            rounds: 3,
            sims_per_round: 334,
            arch: LikelihoodArch::default(),
            train: TrainConfig::default(),
            warm_start: true,
            mcmc: McmcConfig::default(),
            n_posterior_samples: 1000,
            mmd_diagnostic: false,
            mmd_draws: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnlResult {
    pub model: LikelihoodModel,
    pub posterior_samples: Matrix,
    pub traces: Vec<RoundTrace>,
    pub n_simulations: u64,
    /// The cumulative training set, exposed for reuse checks.
    pub training_set: Dataset,
}

/// Posterior access for a trained likelihood model: log p̂(θ|x₀) up to a
/// constant, and a slice-sampling closure over it.
pub struct SnlPosterior<'a> {
    pub model: &'a LikelihoodModel,
    pub sim: &'a dyn Simulator,
    pub x0: &'a [f64],
}

impl SnlPosterior<'_> {
    pub fn log_prob(&self, theta: &[f64]) -> f64 {
        let prior = self.sim.prior_log_prob(theta);
        if !prior.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.model.log_prob(self.x0, theta) {
            Ok(lp) => lp + prior,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub fn sample(
        &self,
        n: usize,
        init: &[f64],
        widths: &[f64],
        mcmc: &McmcConfig,
        rng: &mut RngStream,
    ) -> Result<Matrix> {
        let mut target = |t: &[f64]| self.log_prob(t);
        let total = mcmc.burn_in + mcmc.oversample * n;
        let chain = slice_sample_axis(&mut target, init, total, widths, rng)?;
        let mut out = Matrix::zeros(n, self.sim.param_dim());
        for i in 0..n {
            let row = mcmc.burn_in + (i + 1) * mcmc.oversample - 1;
            out.row_mut(i).copy_from_slice(chain.row(row));
        }
        Ok(out)
    }
}

/// Per-axis slice widths and a support-safe chain start from prior draws.
fn prior_widths_and_init(sim: &dyn Simulator, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
    let n = 256;
    let mut draws = Matrix::zeros(n, sim.param_dim());
    for i in 0..n {
        draws.row_mut(i).copy_from_slice(&sim.prior_sample(rng));
    }
    let widths: Vec<f64> = draws.column_stds().iter().map(|s| s.max(1e-3)).collect();
    (widths, draws.column_means())
}

/// Chain start: the best available θ under the target, falling back to the
/// prior mean-ish point when the dataset is empty.
fn best_start(target: &SnlPosterior<'_>, thetas: &Matrix, fallback: &[f64]) -> Vec<f64> {
    let mut best = fallback.to_vec();
    let mut best_lp = target.log_prob(&best);
    for row in thetas.iter_rows() {
        let lp = target.log_prob(row);
        if lp > best_lp {
            best_lp = lp;
            best = row.to_vec();
        }
    }
    best
}

pub fn snl_run(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &SnlConfig,
    theta_true: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<SnlResult> {
    run_inner(sim, x0, cfg, theta_true, None, rng)
}

/// SNL with MaxVar acquisition: parameters for rounds after the first are
/// chosen by maximizing the ensemble variance of the unnormalized posterior
/// instead of sampling the posterior estimate.
pub fn snl_run_maxvar(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &SnlConfig,
    ensemble_size: usize,
    search: &MaxVarSearch,
    theta_true: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<SnlResult> {
    if ensemble_size < 2 {
        return Err(Error::DegenerateAcquisition(
            "MaxVar-SNL needs an ensemble of at least two models".into(),
        ));
    }
    run_inner(sim, x0, cfg, theta_true, Some((ensemble_size, search)), rng)
}

fn snl_round_err(round: usize, traces: &[RoundTrace], e: Error) -> Error {
    Error::Round {
        algorithm: "snl",
        round: round + 1,
        completed_rounds: traces.to_vec(),
        source: Box::new(e),
    }
}

fn run_inner(
    sim: &dyn Simulator,
    x0: &[f64],
    cfg: &SnlConfig,
    theta_true: Option<&[f64]>,
    maxvar: Option<(usize, &MaxVarSearch)>,
    rng: &mut RngStream,
) -> Result<SnlResult> {
    crate::seq::snpe::validate_loop(cfg.rounds, cfg.sims_per_round)?;
    let (widths, prior_center) = prior_widths_and_init(sim, &mut rng.substream());
    let mut dataset: Option<Dataset> = None;
    let mut model: Option<LikelihoodModel> = None;
    let mut ensemble: Vec<LikelihoodModel> = Vec::new();
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut cumulative = 0u64;
    let mut next_thetas: Option<Matrix> = None;

    for round in 0..cfg.rounds {
        let start = std::time::Instant::now();
        let thetas = match next_thetas.take() {
            Some(t) => t,
            None => {
                let mut t = Matrix::zeros(cfg.sims_per_round, sim.param_dim());
                for i in 0..cfg.sims_per_round {
                    t.row_mut(i).copy_from_slice(&sim.prior_sample(rng));
                }
                t
            }
        };
        let xs = simulate_batch(sim, &thetas, rng)?;
        cumulative += cfg.sims_per_round as u64;
        // SNL reuses every previous round's simulations for training.
        let round_data = Dataset::conditional(xs, thetas)?;
        match &mut dataset {
            Some(d) => d.append(&round_data)?,
            None => dataset = Some(round_data),
        }
        let data = dataset.as_ref().unwrap();

        match maxvar {
            None => {
                let mut m = match (model.take(), cfg.warm_start) {
                    (Some(m), true) => m,
                    _ => LikelihoodModel::build(&cfg.arch, sim.data_dim(), sim.param_dim(), rng),
                };
                m.train(data, &cfg.train, rng)
                    .map_err(|e| snl_round_err(round, &traces, e))?;
                model = Some(m);
            }
            Some((size, _)) => {
                if ensemble.is_empty() || !cfg.warm_start {
                    ensemble = (0..size)
                        .map(|_| {
                            LikelihoodModel::build(&cfg.arch, sim.data_dim(), sim.param_dim(), rng)
                        })
                        .collect();
                }
                for member in &mut ensemble {
                    member
                        .train(data, &cfg.train, rng)
                        .map_err(|e| snl_round_err(round, &traces, e))?;
                }
                model = Some(ensemble[0].clone());
            }
        }

        // Posterior samples from the current estimate; these double as the
        // next round's proposals for plain SNL.
        let m = model.as_ref().unwrap();
        let posterior = SnlPosterior { model: m, sim, x0 };
        let trained_thetas = dataset.as_ref().unwrap().contexts.as_ref().unwrap();
        let init = best_start(&posterior, trained_thetas, &prior_center);
        if !posterior.log_prob(&init).is_finite() {
            return Err(Error::Round {
                algorithm: "snl",
                round: round + 1,
                completed_rounds: traces.clone(),
                source: Box::new(Error::ChainInit(
                    "posterior is non-finite at every candidate start".into(),
                )),
            });
        }
        let n_draw = cfg.n_posterior_samples.max(cfg.sims_per_round);
        let samples = posterior
            .sample(n_draw, &init, &widths, &cfg.mcmc, rng)
            .map_err(|e| snl_round_err(round, &traces, e))?;

        let mut trace = RoundTrace::new(
            round + 1,
            cfg.sims_per_round as u64,
            cumulative,
            if round == 0 {
                "prior"
            } else if maxvar.is_some() {
                "maxvar acquisition"
            } else {
                "snl posterior mcmc"
            },
        );
        trace.summarize_samples(&samples);
        if let Some(tt) = theta_true {
            trace.neg_log_true_params = neg_log_true_params(&samples, tt).ok();
        }
        if cfg.mmd_diagnostic {
            trace.mmd = mmd_diag(sim, m, &trace.posterior_mean, cfg.mmd_draws, rng);
        }
        trace.wall_clock_seconds = start.elapsed().as_secs_f64();
        traces.push(trace);

        // Proposals for the next round.
        if round + 1 < cfg.rounds {
            let thetas_next = match maxvar {
                None => {
                    let mut t = Matrix::zeros(cfg.sims_per_round, sim.param_dim());
                    for i in 0..cfg.sims_per_round {
                        t.row_mut(i)
                            .copy_from_slice(samples.row(i % samples.rows()));
                    }
                    t
                }
                Some((_, search)) => {
                    let refs: Vec<&dyn ConditionalDensity> = ensemble
                        .iter()
                        .map(|m| m as &dyn ConditionalDensity)
                        .collect();
                    let mut t = Matrix::zeros(cfg.sims_per_round, sim.param_dim());
                    for i in 0..cfg.sims_per_round {
                        let mut slot_rng = rng.substream();
                        let theta = maxvar_acquire(&refs, sim, x0, search, &mut slot_rng)
                            .map_err(|e| snl_round_err(round, &traces, e))?;
                        t.row_mut(i).copy_from_slice(&theta);
                    }
                    t
                }
            };
            next_thetas = Some(thetas_next);
        }
    }

    let posterior = SnlPosterior {
        model: model.as_ref().unwrap(),
        sim,
        x0,
    };
    let init = best_start(
        &posterior,
        dataset.as_ref().unwrap().contexts.as_ref().unwrap(),
        &prior_center,
    );
    let posterior_samples =
        posterior.sample(cfg.n_posterior_samples, &init, &widths, &cfg.mcmc, rng)?;

    Ok(SnlResult {
        model: model.expect("trained"),
        posterior_samples,
        traces,
        n_simulations: cumulative,
        training_set: dataset.expect("nonempty"),
    })
}

/// Two-sample MMD between simulator draws and model draws at a parameter
/// point (the current posterior mean).
fn mmd_diag(
    sim: &dyn Simulator,
    model: &LikelihoodModel,
    theta: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Option<f64> {
    if !sim.prior_log_prob(theta).is_finite() {
        return None;
    }
    let mut sim_draws = Matrix::zeros(n, sim.data_dim());
    for i in 0..n {
        sim_draws
            .row_mut(i)
            .copy_from_slice(&sim.simulate(theta, rng));
    }
    let model_draws = model.sample(n, theta, rng).ok()?;
    mmd_statistic(&sim_draws, &model_draws).ok()
}
