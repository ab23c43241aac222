//! Per-round records of an inference run.

use serde::{Deserialize, Serialize};

use crate::num::Matrix;

/// One round of a sequential (or one-shot) inference run. Wall-clock time is
/// kept out of the serialized form so that traces from identical seeded runs
/// are byte-identical; timing lives in the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub n_simulations: u64,
    pub cumulative_simulations: u64,
    pub proposal: String,
    pub posterior_mean: Vec<f64>,
    pub posterior_cov: Matrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub neg_log_true_params: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mmd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weight_variance: Option<f64>,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl RoundTrace {
    pub fn new(round: usize, n_simulations: u64, cumulative: u64, proposal: &str) -> Self {
        RoundTrace {
            round,
            n_simulations,
            cumulative_simulations: cumulative,
            proposal: proposal.to_string(),
            posterior_mean: Vec::new(),
            posterior_cov: Matrix::zeros(0, 0),
            neg_log_true_params: None,
            mmd: None,
            ess: None,
            weight_variance: None,
            wall_clock_seconds: 0.0,
        }
    }

    /// Fill the posterior summary from drawn samples.
    pub fn summarize_samples(&mut self, samples: &Matrix) {
        let d = samples.cols();
        let mean = samples.column_means();
        let mut cov = Matrix::zeros(d, d);
        if samples.rows() > 1 {
            for row in samples.iter_rows() {
                for i in 0..d {
                    for j in 0..d {
                        cov.set(
                            i,
                            j,
                            cov.get(i, j) + (row[i] - mean[i]) * (row[j] - mean[j]),
                        );
                    }
                }
            }
            let n = samples.rows() as f64;
            for v in cov.data_mut() {
                *v /= n;
            }
        }
        self.posterior_mean = mean;
        self.posterior_cov = cov;
    }
}
