//! The ABC family: rejection, smooth rejection, MCMC-ABC, pseudo-marginal
//! Metropolis-Hastings, importance-sampling ABC, SMC-ABC with effective
//! sample size monitoring and resampling, and linear regression adjustment.

mod adjust;
mod mcmc;
mod population;
mod rejection;
mod smc;

pub use adjust::linear_regression_adjust;
pub use mcmc::{mcmc_abc_chain, pseudo_marginal_mh_step, PmState};
pub use population::{ess_estimate, WeightedPopulation};
pub use rejection::{
    is_abc, rejection_abc, smooth_rejection_abc, RejectionOutput, SmoothingKernel,
};
pub use smc::{smc_abc, SmcConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gauss::Gaussian;
use crate::num::{Matrix, RngStream};

/// Distance between summary vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    Max,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Max => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AbcConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub distance: Distance,
    /// Total simulation budget for repeat-until-accept loops.
    pub max_simulations: u64,
}

impl AbcConfig {
    pub fn new(epsilon: f64) -> Self {
        AbcConfig {
            epsilon,
            distance: Distance::Euclidean,
            max_simulations: 10_000_000,
        }
    }
}

/// The simulator-model contract: prior sampling and density, forward
/// simulation θ → x (emitting summary vectors directly), and an optional
/// exact-posterior oracle used by acceptance tests.
pub trait Simulator: Sync {
    fn param_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn prior_sample(&self, rng: &mut RngStream) -> Vec<f64>;
    /// Finite on the prior support, −∞ outside.
    fn prior_log_prob(&self, theta: &[f64]) -> f64;
    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64>;
    fn exact_posterior(&self, _x0: &[f64]) -> Option<Gaussian> {
        None
    }
}

/// A parameter density a sampler can both draw from and evaluate; the
/// importance-sampling proposal contract.
pub trait ParamDensity {
    fn sample(&self, rng: &mut RngStream) -> Vec<f64>;
    fn log_prob(&self, theta: &[f64]) -> f64;
}

impl ParamDensity for Gaussian {
    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        Gaussian::sample(self, rng)
    }

    fn log_prob(&self, theta: &[f64]) -> f64 {
        Gaussian::log_prob(self, theta)
    }
}

impl ParamDensity for crate::gauss::GaussianMixture {
    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        crate::gauss::GaussianMixture::sample(self, rng)
    }

    fn log_prob(&self, theta: &[f64]) -> f64 {
        crate::gauss::GaussianMixture::log_prob(self, theta)
    }
}

/// The prior of a simulator as a proposal density.
pub struct PriorDensity<'a>(pub &'a dyn Simulator);

impl ParamDensity for PriorDensity<'_> {
    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.0.prior_sample(rng)
    }

    fn log_prob(&self, theta: &[f64]) -> f64 {
        self.0.prior_log_prob(theta)
    }
}

/// Simulation fan-out width: `LFI_THREADS` when set, otherwise the machine's
/// available parallelism.
pub fn simulation_threads() -> usize {
    std::env::var("LFI_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Simulate a fixed batch of parameters. Slot i always uses the stream
/// `base.derive(i)`, so the result is identical whether the batch runs on
/// one thread or many.
pub fn simulate_batch(sim: &dyn Simulator, thetas: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    let base = rng.substream();
    let n = thetas.rows();
    let mut out = Matrix::zeros(n, sim.data_dim());
    let threads = simulation_threads().min(n.max(1));
    if threads <= 1 || n < 2 {
        for i in 0..n {
            let mut slot = base.derive(i as u64);
            out.row_mut(i)
                .copy_from_slice(&sim.simulate(thetas.row(i), &mut slot));
        }
        return Ok(out);
    }
    let chunk = n.div_ceil(threads);
    let results: Vec<Vec<(usize, Vec<f64>)>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(n);
            if lo >= hi {
                continue;
            }
            let base = base.clone();
            let thetas = &*thetas;
            handles.push(scope.spawn(move || {
                let mut part = Vec::with_capacity(hi - lo);
                for i in lo..hi {
                    let mut slot = base.derive(i as u64);
                    part.push((i, sim.simulate(thetas.row(i), &mut slot)));
                }
                part
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    for part in results {
        for (i, x) in part {
            out.row_mut(i).copy_from_slice(&x);
        }
    }
    Ok(out)
}
