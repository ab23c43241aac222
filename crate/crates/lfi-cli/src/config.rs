//! Experiment configuration: one JSON document per run.

use serde::{Deserialize, Serialize};

use lfi_core::abc::Distance;
use lfi_core::seq::LikelihoodArch;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Config schema version; currently 1.
    pub schema: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Observed summary vector. When omitted, it is generated by simulating
    /// once at `theta_true` on a dedicated stream.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,
    pub simulator: serde_json::Value,
    pub algorithm: AlgorithmConfig,
}

/// Training hyperparameters exposed to configs; defaults mirror the library.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub minibatch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub learning_rate: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            minibatch: 100,
            max_epochs: 300,
            patience: 20,
            validation_fraction: 0.1,
            learning_rate: 1e-3,
        }
    }
}

impl TrainSettings {
    pub fn to_core(&self) -> lfi_core::flows::TrainConfig {
        let mut cfg = lfi_core::flows::TrainConfig {
            minibatch: self.minibatch,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            ..Default::default()
        };
        cfg.adam.learning_rate = self.learning_rate;
        cfg
    }
}

fn default_n_posterior() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    Rejection {
        epsilon: f64,
        n_accept: usize,
        #[serde(default)]
        distance: Distance,
        #[serde(default = "default_budget")]
        max_simulations: u64,
        /// Apply linear regression adjustment to the accepted samples.
        #[serde(default)]
        regression_adjust: bool,
    },
    Smooth {
        epsilon: f64,
        n: usize,
        #[serde(default = "default_kernel")]
        kernel: String,
    },
    McmcAbc {
        epsilon: f64,
        n_steps: usize,
        #[serde(default)]
        distance: Distance,
        #[serde(default)]
        proposal_std: Option<Vec<f64>>,
        #[serde(default = "default_thin")]
        thin: usize,
        #[serde(default = "default_budget")]
        max_simulations: u64,
    },
    IsAbc {
        epsilon: f64,
        n: usize,
        proposal_mean: Vec<f64>,
        proposal_var: Vec<f64>,
        #[serde(default = "default_budget")]
        max_simulations: u64,
    },
    SmcAbc {
        schedule: Vec<f64>,
        population: usize,
        #[serde(default)]
        ess_min: Option<f64>,
        #[serde(default = "default_budget")]
        max_simulations: u64,
    },
    SnpeA {
        rounds: usize,
        sims_per_round: usize,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_trunk")]
        trunk: Vec<usize>,
        #[serde(default)]
        train: TrainSettings,
        #[serde(default = "default_true")]
        warm_start: bool,
        #[serde(default)]
        round_epochs: Option<Vec<usize>>,
        /// "gaussian" (derived from a Gaussian-prior simulator) or "uniform".
        #[serde(default = "default_prior_mode")]
        prior: String,
        #[serde(default = "default_n_posterior")]
        n_posterior_samples: usize,
    },
    SnpeB {
        rounds: usize,
        sims_per_round: usize,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_trunk")]
        trunk: Vec<usize>,
        #[serde(default)]
        train: TrainSettings,
        #[serde(default = "default_true")]
        warm_start: bool,
        #[serde(default = "default_n_posterior")]
        n_posterior_samples: usize,
    },
    Snl {
        rounds: usize,
        sims_per_round: usize,
        #[serde(default)]
        model: Option<LikelihoodArch>,
        #[serde(default)]
        train: TrainSettings,
        #[serde(default = "default_true")]
        warm_start: bool,
        #[serde(default = "default_n_posterior")]
        n_posterior_samples: usize,
        #[serde(default = "default_true")]
        mmd_diagnostic: bool,
    },
    MaxvarSnl {
        rounds: usize,
        sims_per_round: usize,
        #[serde(default)]
        model: Option<LikelihoodArch>,
        #[serde(default)]
        train: TrainSettings,
        #[serde(default = "default_ensemble")]
        ensemble: usize,
        #[serde(default = "default_n_posterior")]
        n_posterior_samples: usize,
    },
}

fn default_budget() -> u64 {
    10_000_000
}

fn default_kernel() -> String {
    "gaussian".into()
}

fn default_thin() -> usize {
    1
}

fn default_components() -> usize {
    8
}

fn default_trunk() -> Vec<usize> {
    vec![50, 50]
}

fn default_true() -> bool {
    true
}

fn default_prior_mode() -> String {
    "gaussian".into()
}

fn default_ensemble() -> usize {
    5
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Rejection { .. } => "rejection",
            AlgorithmConfig::Smooth { .. } => "smooth",
            AlgorithmConfig::McmcAbc { .. } => "mcmc-abc",
            AlgorithmConfig::IsAbc { .. } => "is-abc",
            AlgorithmConfig::SmcAbc { .. } => "smc-abc",
            AlgorithmConfig::SnpeA { .. } => "snpe-a",
            AlgorithmConfig::SnpeB { .. } => "snpe-b",
            AlgorithmConfig::Snl { .. } => "snl",
            AlgorithmConfig::MaxvarSnl { .. } => "maxvar-snl",
        }
    }
}
