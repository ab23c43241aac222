//! Weighted particle populations and the effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Matrix, RngStream};

/// Parameter samples with normalized importance weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedPopulation {
    pub params: Matrix,
    pub weights: Vec<f64>,
}

impl WeightedPopulation {
    /// Normalizes the weights. Rejects empty, negative, non-finite, or
    /// all-zero weight vectors.
    pub fn new(params: Matrix, weights: Vec<f64>) -> Result<Self> {
        if params.rows() == 0 || params.rows() != weights.len() {
            return Err(Error::DegeneratePopulation(format!(
                "{} particles with {} weights",
                params.rows(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegeneratePopulation(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegeneratePopulation("all weights are zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(WeightedPopulation { params, weights })
    }

    pub fn uniform(params: Matrix) -> Result<Self> {
        let n = params.rows();
        WeightedPopulation::new(params, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.params.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.params.cols()
    }

    pub fn weighted_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (row, w) in self.params.iter_rows().zip(&self.weights) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += w * v;
            }
        }
        mean
    }

    /// Per-axis weighted standard deviation.
    pub fn weighted_std(&self) -> Vec<f64> {
        let mean = self.weighted_mean();
        let d = self.dim();
        let mut var = vec![0.0; d];
        for (row, w) in self.params.iter_rows().zip(&self.weights) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                let diff = x - m;
                *v += w * diff * diff;
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    pub fn weighted_cov(&self) -> Matrix {
        let mean = self.weighted_mean();
        let d = self.dim();
        let mut cov = Matrix::zeros(d, d);
        for (row, w) in self.params.iter_rows().zip(&self.weights) {
            for i in 0..d {
                for j in 0..d {
                    cov.set(
                        i,
                        j,
                        cov.get(i, j) + w * (row[i] - mean[i]) * (row[j] - mean[j]),
                    );
                }
            }
        }
        cov
    }

    /// Multinomial resampling to uniform weights.
    pub fn resample(&self, rng: &mut RngStream) -> WeightedPopulation {
        let n = self.len();
        let mut params = Matrix::zeros(n, self.dim());
        for r in 0..n {
            let idx = rng.categorical(&self.weights);
            params.row_mut(r).copy_from_slice(self.params.row(idx));
        }
        WeightedPopulation {
            params,
            weights: vec![1.0 / n as f64; n],
        }
    }
}

/// Effective sample size Ŝ = 1/Σ wₙ² of a normalized population; lies in [1, N].
pub fn ess_estimate(pop: &WeightedPopulation) -> f64 {
    1.0 / pop.weights.iter().map(|w| w * w).sum::<f64>()
}
