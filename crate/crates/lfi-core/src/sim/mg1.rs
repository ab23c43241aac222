//! M/G/1 queue benchmark: Poisson arrivals at rate θ₃, service times
//! uniform on [θ₁, θ₂], a single FIFO server. Departures follow the Lindley
//! recursion; the summary is five equally spaced quantiles of the
//! inter-departure times.

use serde::{Deserialize, Serialize};

use crate::abc::Simulator;
use crate::num::RngStream;
use crate::sim::constants::{MG1_SUMMARY_MEAN, MG1_SUMMARY_STD};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Mg1Sim {
    pub n_customers: usize,
    /// Prior: θ₁ ~ U(0, s1_max), θ₂ − θ₁ ~ U(0, gap_max), θ₃ ~ U(0, rate_max).
    pub s1_max: f64,
    pub gap_max: f64,
    pub rate_max: f64,
    pub standardize: bool,
}

impl Default for Mg1Sim {
    fn default() -> Self {
        Mg1Sim {
            n_customers: 50,
            s1_max: 10.0,
            gap_max: 10.0,
            rate_max: 1.0 / 3.0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mg1Outcome {
    pub summary: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
}

impl Mg1Sim {
    pub fn simulate_full(&self, theta: &[f64], rng: &mut RngStream) -> Mg1Outcome {
        assert_eq!(theta.len(), 3, "M/G/1 takes (s_lo, s_hi, arrival_rate)");
        let (s_lo, s_hi, rate) = (theta[0], theta[1], theta[2]);
        let n = self.n_customers;
        let mut arrivals = Vec::with_capacity(n);
        let mut departures = Vec::with_capacity(n);
        let mut arrival = 0.0;
        let mut depart = 0.0f64;
        for _ in 0..n {
            arrival += rng.exponential(rate);
            let service = rng.uniform_in(s_lo, s_hi);
            depart = depart.max(arrival) + service;
            arrivals.push(arrival);
            departures.push(depart);
        }
        let mut gaps = Vec::with_capacity(n);
        let mut prev = 0.0;
        for &d in &departures {
            gaps.push(d - prev);
            prev = d;
        }
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut summary: Vec<f64> = (0..5).map(|q| quantile(&gaps, q as f64 / 4.0)).collect();
        if self.standardize {
            for (i, v) in summary.iter_mut().enumerate() {
                *v = (*v - MG1_SUMMARY_MEAN[i]) / MG1_SUMMARY_STD[i];
            }
        }
        Mg1Outcome {
            summary,
            arrivals,
            departures,
        }
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

impl Simulator for Mg1Sim {
    fn param_dim(&self) -> usize {
        3
    }

    fn data_dim(&self) -> usize {
        5
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let s_lo = rng.uniform_in(0.0, self.s1_max);
        let gap = rng.uniform_in(0.0, self.gap_max);
        let rate = rng.uniform_open() * self.rate_max;
        vec![s_lo, s_lo + gap, rate]
    }

    fn prior_log_prob(&self, theta: &[f64]) -> f64 {
        let (s_lo, s_hi, rate) = (theta[0], theta[1], theta[2]);
        let inside = s_lo >= 0.0
            && s_lo <= self.s1_max
            && s_hi >= s_lo
            && s_hi - s_lo <= self.gap_max
            && rate > 0.0
            && rate <= self.rate_max;
        if inside {
            -(self.s1_max.ln() + self.gap_max.ln() + self.rate_max.ln())
        } else {
            f64::NEG_INFINITY
        }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        self.simulate_full(theta, rng).summary
    }
}
