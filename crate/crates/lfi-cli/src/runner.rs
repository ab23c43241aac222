//! Algorithm dispatch: resolve the simulator, run the configured algorithm,
//! and collect posterior samples, weights, and traces.

use lfi_core::abc::{
    ess_estimate, is_abc, linear_regression_adjust, mcmc_abc_chain, rejection_abc, smc_abc,
    smooth_rejection_abc, AbcConfig, Simulator, SmcConfig, SmoothingKernel,
};
use lfi_core::gauss::Gaussian;
use lfi_core::num::{Matrix, RngStream};
use lfi_core::seq::{
    neg_log_true_params, snl_run, snl_run_maxvar, snpe_a_run, snpe_b_run, MaxVarSearch, SnlConfig,
    SnpeConfig,
};
use lfi_core::sim::SimulatorConfig;
use lfi_core::trace::RoundTrace;
use lfi_core::{Error, Result};

use crate::config::{AlgorithmConfig, ExperimentConfig};

pub struct RunOutcome {
    pub posterior: Matrix,
    pub weights: Vec<f64>,
    pub traces: Vec<RoundTrace>,
    pub n_simulations: u64,
    pub early_terminated: bool,
    pub neg_log_true_params: Option<f64>,
    pub mmd: Option<f64>,
}

/// Per-axis prior standard deviations estimated from a fixed block of
/// prior draws; used for default proposal scales.
fn prior_stds(sim: &dyn Simulator, rng: &RngStream) -> Vec<f64> {
    let mut sub = rng.derive(0xC0DE);
    let n = 256;
    let mut draws = Matrix::zeros(n, sim.param_dim());
    for i in 0..n {
        draws
            .row_mut(i)
            .copy_from_slice(&sim.prior_sample(&mut sub));
    }
    draws.column_stds().iter().map(|s| s.max(1e-3)).collect()
}

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n.max(1) as f64; n]
}

fn single_trace(n_sims: u64, proposal: &str, samples: &Matrix) -> Vec<RoundTrace> {
    let mut t = RoundTrace::new(1, n_sims, n_sims, proposal);
    t.summarize_samples(samples);
    vec![t]
}

pub fn resolve_x0(cfg: &ExperimentConfig, sim: &dyn Simulator) -> Result<Vec<f64>> {
    if let Some(x0) = &cfg.x0 {
        if x0.len() != sim.data_dim() {
            return Err(Error::Shape {
                context: "config x0",
                expected: format!("{} entries", sim.data_dim()),
                got: format!("{}", x0.len()),
            });
        }
        return Ok(x0.clone());
    }
    match &cfg.theta_true {
        Some(theta) => {
            let mut rng = RngStream::new(cfg.seed, 0x0B5E).derive(1);
            Ok(sim.simulate(theta, &mut rng))
        }
        None => Err(Error::Numeric(
            "config needs x0 or theta_true to define the observation".into(),
        )),
    }
}

/// The toy simulator's Gaussian prior when the config allows the SNPE-A
/// Gaussian-prior correction.
fn gaussian_prior_of(cfg_sim: &SimulatorConfig) -> Option<Gaussian> {
    match cfg_sim {
        SimulatorConfig::GaussianToy(t) => {
            Gaussian::diagonal(vec![t.prior_mean; t.dim], &vec![t.prior_var; t.dim]).ok()
        }
        _ => None,
    }
}

/// Numeric sanity checks beyond what serde can express; failures are
/// config-validation errors (exit 2), not runtime errors.
fn validate(cfg: &ExperimentConfig, sim_cfg: &SimulatorConfig) -> Result<()> {
    let bad = |msg: String| Err(Error::Numeric(format!("E_CONFIG_ALGORITHM {msg}")));
    match sim_cfg {
        SimulatorConfig::GaussianToy(t) => {
            if !(t.prior_var > 0.0 && t.noise_var > 0.0) || t.dim == 0 {
                return Err(Error::Numeric(
                    "E_CONFIG_SIMULATOR gaussian_toy needs positive variances and dim >= 1".into(),
                ));
            }
        }
        SimulatorConfig::LotkaVolterra(l) => {
            if !(l.duration > 0.0) || l.grid_points < 2 || l.log_rate_hi <= l.log_rate_lo {
                return Err(Error::Numeric(
                    "E_CONFIG_SIMULATOR lotka_volterra needs duration > 0, grid >= 2, and a proper rate box".into(),
                ));
            }
        }
        SimulatorConfig::Mg1(m) => {
            if m.n_customers < 10 || !(m.rate_max > 0.0) {
                return Err(Error::Numeric(
                    "E_CONFIG_SIMULATOR mg1 needs at least 10 customers and a positive rate bound".into(),
                ));
            }
        }
    }
    match &cfg.algorithm {
        AlgorithmConfig::Rejection { n_accept, .. } if *n_accept == 0 => {
            bad("rejection needs n_accept >= 1".into())
        }
        AlgorithmConfig::Smooth { n, .. } if *n == 0 => bad("smooth needs n >= 1".into()),
        AlgorithmConfig::McmcAbc { n_steps, .. } if *n_steps == 0 => {
            bad("mcmc-abc needs n_steps >= 1".into())
        }
        AlgorithmConfig::SnpeA {
            rounds,
            sims_per_round,
            components,
            ..
        }
        | AlgorithmConfig::SnpeB {
            rounds,
            sims_per_round,
            components,
            ..
        } if *rounds == 0 || *sims_per_round == 0 || *components == 0 => {
            bad("snpe needs rounds, sims_per_round, and components >= 1".into())
        }
        AlgorithmConfig::MaxvarSnl { ensemble, .. } if *ensemble < 2 => {
            bad("maxvar-snl needs an ensemble of at least two models".into())
        }
        AlgorithmConfig::Snl {
            rounds,
            sims_per_round,
            model,
            ..
        }
        | AlgorithmConfig::MaxvarSnl {
            rounds,
            sims_per_round,
            model,
            ..
        } => {
            if *rounds == 0 || *sims_per_round == 0 {
                return bad("snl needs rounds and sims_per_round >= 1".into());
            }
            match model {
                Some(lfi_core::seq::LikelihoodArch::Maf { layers, .. }) if *layers == 0 => {
                    bad("maf likelihood model needs at least one layer".into())
                }
                Some(lfi_core::seq::LikelihoodArch::Mdn { components, .. }) if *components == 0 => {
                    bad("mdn likelihood model needs at least one component".into())
                }
                _ => Ok(()),
            }
        }
        _ => Ok(()),
    }
}

pub fn run_algorithm(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let sim_cfg: SimulatorConfig = serde_json::from_value(cfg.simulator.clone())
        .map_err(|e| Error::Numeric(format!("E_CONFIG_SIMULATOR {e}")))?;
    validate(cfg, &sim_cfg)?;
    let sim = sim_cfg.build();
    let sim: &dyn Simulator = sim.as_ref();
    let x0 = resolve_x0(cfg, sim)?;
    let mut rng = RngStream::new(cfg.seed, 1);
    let theta_true = cfg.theta_true.as_deref();

    let mut outcome = match &cfg.algorithm {
        AlgorithmConfig::Rejection {
            epsilon,
            n_accept,
            distance,
            max_simulations,
            regression_adjust,
        } => {
            let abc_cfg = AbcConfig {
                epsilon: *epsilon,
                distance: *distance,
                max_simulations: *max_simulations,
            };
            let out = rejection_abc(sim, &x0, &abc_cfg, *n_accept, &mut rng)?;
            let posterior = if *regression_adjust {
                linear_regression_adjust(&out.params, &out.data, &x0)?
            } else {
                out.params
            };
            RunOutcome {
                weights: uniform_weights(posterior.rows()),
                traces: single_trace(out.n_simulated, "prior (rejection)", &posterior),
                posterior,
                n_simulations: out.n_simulated,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::Smooth { epsilon, n, kernel } => {
            let kernel = match kernel.as_str() {
                "uniform" => SmoothingKernel::Uniform,
                "gaussian" => SmoothingKernel::Gaussian,
                "epanechnikov" => SmoothingKernel::Epanechnikov,
                other => {
                    return Err(Error::Numeric(format!(
                        "E_CONFIG_ALGORITHM unknown smoothing kernel '{other}'"
                    )))
                }
            };
            let pop = smooth_rejection_abc(sim, &x0, kernel, *epsilon, *n, &mut rng)?;
            let mut trace = single_trace(*n as u64, "prior (smooth rejection)", &pop.params);
            trace[0].ess = Some(ess_estimate(&pop));
            RunOutcome {
                posterior: pop.params,
                weights: pop.weights,
                traces: trace,
                n_simulations: *n as u64,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::McmcAbc {
            epsilon,
            n_steps,
            distance,
            proposal_std,
            thin,
            max_simulations,
        } => {
            let abc_cfg = AbcConfig {
                epsilon: *epsilon,
                distance: *distance,
                max_simulations: *max_simulations,
            };
            // Initialize from rejection ABC run to a single acceptance.
            let init = rejection_abc(sim, &x0, &abc_cfg, 1, &mut rng)?;
            let std = match proposal_std {
                Some(s) => s.clone(),
                None => prior_stds(sim, &rng).iter().map(|s| 0.5 * s).collect(),
            };
            let chain = mcmc_abc_chain(
                sim,
                &x0,
                &abc_cfg,
                &std,
                init.params.row(0),
                *n_steps,
                &mut rng,
            )?;
            let kept: Vec<Vec<f64>> = chain
                .iter_rows()
                .step_by((*thin).max(1))
                .map(|r| r.to_vec())
                .collect();
            let posterior = Matrix::from_rows(&kept)?;
            let n_sims = init.n_simulated + *n_steps as u64;
            RunOutcome {
                weights: uniform_weights(posterior.rows()),
                traces: single_trace(n_sims, "gaussian random walk", &posterior),
                posterior,
                n_simulations: n_sims,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::IsAbc {
            epsilon,
            n,
            proposal_mean,
            proposal_var,
            max_simulations,
        } => {
            let proposal = Gaussian::diagonal(proposal_mean.clone(), proposal_var)?;
            let abc_cfg = AbcConfig {
                epsilon: *epsilon,
                distance: Default::default(),
                max_simulations: *max_simulations,
            };
            let (pop, n_sims) = is_abc(sim, &x0, &abc_cfg, &proposal, *n, &mut rng)?;
            let mut trace = single_trace(n_sims, "gaussian importance proposal", &pop.params);
            trace[0].ess = Some(ess_estimate(&pop));
            RunOutcome {
                posterior: pop.params,
                weights: pop.weights,
                traces: trace,
                n_simulations: n_sims,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::SmcAbc {
            schedule,
            population,
            ess_min,
            max_simulations,
        } => {
            let mut smc_cfg = SmcConfig::new(schedule.clone(), *population);
            if let Some(e) = ess_min {
                smc_cfg.ess_min = *e;
            }
            smc_cfg.max_simulations = *max_simulations;
            let (pop, traces) = smc_abc(sim, &x0, &smc_cfg, &mut rng)?;
            let n_simulations = traces.last().map_or(0, |t| t.cumulative_simulations);
            RunOutcome {
                posterior: pop.params,
                weights: pop.weights,
                traces,
                n_simulations,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::SnpeA {
            rounds,
            sims_per_round,
            components,
            trunk,
            train,
            warm_start,
            round_epochs,
            prior,
            n_posterior_samples,
        } => {
            let snpe_cfg = SnpeConfig {
                rounds: *rounds,
                sims_per_round: *sims_per_round,
                n_components: *components,
                trunk: trunk.clone(),
                train: train.to_core(),
                warm_start: *warm_start,
                round_epochs: round_epochs.clone(),
                n_posterior_samples: *n_posterior_samples,
                ..Default::default()
            };
            let prior_gaussian = match prior.as_str() {
                "uniform" => None,
                "gaussian" => {
                    let g = gaussian_prior_of(&sim_cfg);
                    if g.is_none() {
                        return Err(Error::Numeric(
                            "E_CONFIG_ALGORITHM snpe-a gaussian prior requires a Gaussian-prior simulator"
                                .into(),
                        ));
                    }
                    g
                }
                other => {
                    return Err(Error::Numeric(format!(
                        "E_CONFIG_ALGORITHM unknown snpe-a prior mode '{other}'"
                    )))
                }
            };
            let res = snpe_a_run(
                sim,
                &x0,
                prior_gaussian.as_ref(),
                &snpe_cfg,
                theta_true,
                &mut rng,
            )?;
            RunOutcome {
                weights: uniform_weights(res.posterior_samples.rows()),
                posterior: res.posterior_samples,
                traces: res.traces,
                n_simulations: res.n_simulations,
                early_terminated: res.terminated_early,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::SnpeB {
            rounds,
            sims_per_round,
            components,
            trunk,
            train,
            warm_start,
            n_posterior_samples,
        } => {
            let snpe_cfg = SnpeConfig {
                rounds: *rounds,
                sims_per_round: *sims_per_round,
                n_components: *components,
                trunk: trunk.clone(),
                train: train.to_core(),
                warm_start: *warm_start,
                n_posterior_samples: *n_posterior_samples,
                ..Default::default()
            };
            let res = snpe_b_run(sim, &x0, &snpe_cfg, theta_true, &mut rng)?;
            RunOutcome {
                weights: uniform_weights(res.posterior_samples.rows()),
                posterior: res.posterior_samples,
                traces: res.traces,
                n_simulations: res.n_simulations,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
        AlgorithmConfig::Snl {
            rounds,
            sims_per_round,
            model,
            train,
            warm_start,
            n_posterior_samples,
            mmd_diagnostic,
        } => {
            let snl_cfg = SnlConfig {
                rounds: *rounds,
                sims_per_round: *sims_per_round,
                arch: model.clone().unwrap_or_default(),
                train: train.to_core(),
                warm_start: *warm_start,
                n_posterior_samples: *n_posterior_samples,
                mmd_diagnostic: *mmd_diagnostic,
                ..Default::default()
            };
            let res = snl_run(sim, &x0, &snl_cfg, theta_true, &mut rng)?;
            let mmd = res.traces.last().and_then(|t| t.mmd);
            RunOutcome {
                weights: uniform_weights(res.posterior_samples.rows()),
                posterior: res.posterior_samples,
                traces: res.traces,
                n_simulations: res.n_simulations,
                early_terminated: false,
                neg_log_true_params: None,
                mmd,
            }
        }
        AlgorithmConfig::MaxvarSnl {
            rounds,
            sims_per_round,
            model,
            train,
            ensemble,
            n_posterior_samples,
        } => {
            let snl_cfg = SnlConfig {
                rounds: *rounds,
                sims_per_round: *sims_per_round,
                arch: model.clone().unwrap_or_default(),
                train: train.to_core(),
                n_posterior_samples: *n_posterior_samples,
                ..Default::default()
            };
            let res = snl_run_maxvar(
                sim,
                &x0,
                &snl_cfg,
                *ensemble,
                &MaxVarSearch::default(),
                theta_true,
                &mut rng,
            )?;
            RunOutcome {
                weights: uniform_weights(res.posterior_samples.rows()),
                posterior: res.posterior_samples,
                traces: res.traces,
                n_simulations: res.n_simulations,
                early_terminated: false,
                neg_log_true_params: None,
                mmd: None,
            }
        }
    };

    if let Some(theta) = theta_true {
        // Weighted populations are resampled to equal weights before the KDE.
        let samples = if outcome
            .weights
            .iter()
            .any(|w| (w - outcome.weights[0]).abs() > 1e-15)
        {
            let pop = lfi_core::abc::WeightedPopulation::new(
                outcome.posterior.clone(),
                outcome.weights.clone(),
            )?;
            pop.resample(&mut RngStream::new(cfg.seed, 0x7E57)).params
        } else {
            outcome.posterior.clone()
        };
        outcome.neg_log_true_params = neg_log_true_params(&samples, theta).ok();
    }
    Ok(outcome)
}
