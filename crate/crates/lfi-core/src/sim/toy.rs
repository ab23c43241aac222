//! Conjugate Gaussian toy simulator: θ per-axis under a Gaussian prior,
//! x ~ N(θ, σ²I). The exact posterior is available in closed form, which
//! makes this the ground-truth oracle behind every quantitative acceptance
//! test in the toolkit.

use serde::{Deserialize, Serialize};

use crate::abc::Simulator;
use crate::gauss::Gaussian;
use crate::num::{RngStream, LN_2PI};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianToy {
    pub dim: usize,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub noise_var: f64,
}

impl Default for GaussianToy {
    fn default() -> Self {
        GaussianToy {
            dim: 1,
            prior_mean: 0.0,
            prior_var: 1.0,
            noise_var: 1.0,
        }
    }
}

impl GaussianToy {
    pub fn new(dim: usize, prior_mean: f64, prior_var: f64, noise_var: f64) -> Self {
        assert!(
            prior_var > 0.0 && noise_var > 0.0,
            "variances must be positive"
        );
        GaussianToy {
            dim,
            prior_mean,
            prior_var,
            noise_var,
        }
    }
}

impl Simulator for GaussianToy {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn data_dim(&self) -> usize {
        self.dim
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..self.dim)
            .map(|_| self.prior_mean + self.prior_var.sqrt() * rng.normal())
            .collect()
    }

    fn prior_log_prob(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .map(|t| {
                let z = (t - self.prior_mean) / self.prior_var.sqrt();
                -0.5 * (LN_2PI + self.prior_var.ln() + z * z)
            })
            .sum()
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        theta
            .iter()
            .map(|t| t + self.noise_var.sqrt() * rng.normal())
            .collect()
    }

    /// Per-axis conjugate posterior:
    /// N((μp/σp² + x₀/σ²)/(1/σp² + 1/σ²), (1/σp² + 1/σ²)⁻¹).
    fn exact_posterior(&self, x0: &[f64]) -> Option<Gaussian> {
        let prec = 1.0 / self.prior_var + 1.0 / self.noise_var;
        let var = 1.0 / prec;
        let mean: Vec<f64> = x0
            .iter()
            .map(|x| var * (self.prior_mean / self.prior_var + x / self.noise_var))
            .collect();
        Gaussian::diagonal(mean, &vec![var; self.dim]).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_conjugate_case() {
        let toy = GaussianToy::default();
        let post = toy.exact_posterior(&[1.0]).unwrap();
        assert!((post.mean()[0] - 0.5).abs() < 1e-12);
        assert!((post.covariance().get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uninformative_likelihood_returns_prior() {
        let toy = GaussianToy::new(1, 0.3, 2.0, 1e12);
        let post = toy.exact_posterior(&[5.0]).unwrap();
        assert!((post.mean()[0] - 0.3).abs() < 1e-9);
        assert!((post.covariance().get(0, 0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exact_observation_pins_posterior_to_x0() {
        let toy = GaussianToy::new(1, 0.0, 1.0, 1e-12);
        let post = toy.exact_posterior(&[1.7]).unwrap();
        assert!((post.mean()[0] - 1.7).abs() < 1e-9);
        assert!(post.covariance().get(0, 0) < 1e-9);
    }

    /// The closed form matches direct quadrature normalization of
    /// prior × likelihood pointwise.
    #[test]
    fn posterior_matches_quadrature() {
        let toy = GaussianToy::new(1, 0.2, 1.5, 0.7);
        let x0 = [0.9];
        let post = toy.exact_posterior(&x0).unwrap();
        let log_joint = |t: f64| {
            toy.prior_log_prob(&[t]) + {
                let z = (x0[0] - t) / toy.noise_var.sqrt();
                -0.5 * (LN_2PI + toy.noise_var.ln() + z * z)
            }
        };
        let (lo, hi, steps) = (-10.0, 10.0, 40_000);
        let h = (hi - lo) / steps as f64;
        let mut mass = 0.0;
        for i in 0..=steps {
            let t = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            mass += w * log_joint(t).exp();
        }
        mass *= h;
        for t in [-0.5, 0.3, 0.9, 1.4] {
            let quad = log_joint(t).exp() / mass;
            let exact = post.log_prob(&[t]).exp();
            assert!((quad - exact).abs() < 1e-8, "at {t}: {quad} vs {exact}");
        }
    }

    #[test]
    fn simulate_is_pure_given_stream() {
        let toy = GaussianToy::default();
        let a = toy.simulate(&[0.4], &mut RngStream::new(5, 9));
        let b = toy.simulate(&[0.4], &mut RngStream::new(5, 9));
        assert_eq!(a, b);
    }
}
