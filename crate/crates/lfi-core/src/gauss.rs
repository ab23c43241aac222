//! Full-covariance Gaussians and Gaussian mixtures, stored with their
//! Cholesky factors. These carry the conjugate oracles, the MDN component
//! algebra, and the analytic proposal correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{
    cholesky, log_sum_exp, logdet_from_cholesky, solve_lower, solve_spd, spd_inverse, Matrix,
    RngStream, LN_2PI,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gaussian {
    mean: Vec<f64>,
    covariance: Matrix,
    #[serde(skip)]
    chol: Option<Matrix>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(Error::Shape {
                context: "Gaussian::new",
                expected: format!("{0}x{0} covariance", mean.len()),
                got: format!("{}x{}", covariance.rows(), covariance.cols()),
            });
        }
        let chol = cholesky(&covariance).ok_or(Error::CovarianceNotPd)?;
        Ok(Gaussian {
            mean,
            covariance,
            chol: Some(chol),
        })
    }

    pub fn standard(dim: usize) -> Self {
        Gaussian::new(vec![0.0; dim], Matrix::identity(dim)).unwrap()
    }

    /// Independent axes from per-axis means and variances.
    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        let d = mean.len();
        let mut cov = Matrix::zeros(d, d);
        for (i, &v) in variances.iter().enumerate() {
            cov.set(i, i, v);
        }
        Gaussian::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    fn chol(&self) -> &Matrix {
        self.chol.as_ref().expect("Cholesky factor present")
    }

    /// Rebuild the factor after deserialization.
    pub fn restore(&mut self) -> Result<()> {
        if self.chol.is_none() {
            self.chol = Some(cholesky(&self.covariance).ok_or(Error::CovarianceNotPd)?);
        }
        Ok(())
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = solve_lower(self.chol(), &diff);
        let q: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * (d as f64 * LN_2PI + logdet_from_cholesky(self.chol()) + q)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let z = rng.normal_vec(self.dim());
        let mut x = self.mean.clone();
        let l = self.chol();
        for i in 0..self.dim() {
            for k in 0..=i {
                x[i] += l.get(i, k) * z[k];
            }
        }
        x
    }

    pub fn sample_n(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let mut out = Matrix::zeros(n, self.dim());
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&self.sample(rng));
        }
        out
    }

    /// Precision matrix S⁻¹.
    pub fn precision(&self) -> Matrix {
        spd_inverse(self.chol())
    }

    /// S⁻¹ m, the natural location parameter.
    pub fn precision_times_mean(&self) -> Vec<f64> {
        solve_spd(self.chol(), &self.mean)
    }

    /// Exponent-completion constant −½(log det(2πS) + mᵀS⁻¹m), so that
    /// N(x; m, S) = exp(logz + mᵀS⁻¹x − ½xᵀS⁻¹x).
    pub fn log_norm_constant(&self) -> f64 {
        let d = self.dim() as f64;
        let quad: f64 = self
            .precision_times_mean()
            .iter()
            .zip(&self.mean)
            .map(|(a, b)| a * b)
            .sum();
        -0.5 * (d * LN_2PI + logdet_from_cholesky(self.chol()) + quad)
    }
}

/// Mixture of full-covariance Gaussians with normalized weights. The
/// constructor rejects non-positive-definite components, so holding a value
/// of this type certifies the mixture is a proper density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(Error::Shape {
                context: "GaussianMixture::new",
                expected: "equal, nonzero numbers of weights and components".into(),
                got: format!("{} weights, {} components", weights.len(), components.len()),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateWeights(
                "mixture weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateWeights(
                "mixture weights sum to zero".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::Shape {
                context: "GaussianMixture::new",
                expected: format!("all components of dimension {dim}"),
                got: "mixed dimensions".into(),
            });
        }
        Ok(GaussianMixture {
            weights,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn restore(&mut self) -> Result<()> {
        for c in &mut self.components {
            c.restore()?;
        }
        Ok(())
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_prob(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let k = rng.categorical(&self.weights);
        self.components[k].sample(rng)
    }

    pub fn sample_n(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let mut out = Matrix::zeros(n, self.dim());
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&self.sample(rng));
        }
        out
    }

    /// Mixture mean Σ wₖ mₖ.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for (m, v) in mean.iter_mut().zip(c.mean()) {
                *m += w * v;
            }
        }
        mean
    }

    /// Full mixture covariance Σ wₖ (Sₖ + mₖmₖᵀ) − μμᵀ.
    pub fn covariance(&self) -> Matrix {
        let d = self.dim();
        let mu = self.mean();
        let mut cov = Matrix::zeros(d, d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let m = c.mean();
            let s = c.covariance();
            for i in 0..d {
                for j in 0..d {
                    cov.set(i, j, cov.get(i, j) + w * (s.get(i, j) + m[i] * m[j]));
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov.set(i, j, cov.get(i, j) - mu[i] * mu[j]);
            }
        }
        cov
    }

    /// Moment-matched single Gaussian (used as the next-round SNPE-A proposal).
    pub fn moment_match(&self) -> Result<Gaussian> {
        Gaussian::new(self.mean(), self.covariance())
    }
}
