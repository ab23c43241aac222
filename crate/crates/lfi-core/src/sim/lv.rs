//! Lotka-Volterra predator-prey benchmark simulated exactly with the
//! Gillespie algorithm.
//!
//! Four reaction channels with rates exp(θ):
//!   prey birth        prey → 2·prey            at θ₁·prey
//!   predation         prey + pred → 2·pred     at θ₂·prey·pred
//!   predator death    pred → ∅                 at θ₃·pred
//!   prey death        prey → ∅                 at θ₄·prey
//! Predation is one compound event (a prey death and a predator birth
//! together), so predator births from predation always equal prey deaths
//! from predation.
//!
//! The summary vector has 9 entries per series pair: means, log variances,
//! lag-1 and lag-2 autocorrelations of both series, and the
//! cross-correlation, each standardized by constants pinned in
//! [`super::constants`].

use serde::{Deserialize, Serialize};

use crate::abc::Simulator;
use crate::num::RngStream;
use crate::sim::constants::{LV_SUMMARY_MEAN, LV_SUMMARY_STD};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LotkaVolterraSim {
    /// Prior: log-rates uniform per axis on [lo, hi].
    pub log_rate_lo: f64,
    pub log_rate_hi: f64,
    pub initial_prey: u64,
    pub initial_predators: u64,
    pub duration: f64,
    pub grid_points: usize,
    /// Simulation stops (with the truncation flag) after this many events.
    pub event_cap: u64,
    /// Standardize summaries with the pinned prior-predictive constants.
    pub standardize: bool,
}

impl Default for LotkaVolterraSim {
    fn default() -> Self {
        LotkaVolterraSim {
            log_rate_lo: -5.0,
            log_rate_hi: 2.0,
            initial_prey: 50,
            initial_predators: 100,
            duration: 30.0,
            grid_points: 151,
            event_cap: 1_000_000,
            standardize: true,
        }
    }
}

/// Full simulation output, including counters used by invariant checks.
#[derive(Debug, Clone)]
pub struct LvOutcome {
    pub summary: Vec<f64>,
    pub truncated: bool,
    pub predation_events: u64,
    pub prey_deaths_from_predation: u64,
    pub predator_births: u64,
    pub prey_series: Vec<f64>,
    pub predator_series: Vec<f64>,
}

impl LotkaVolterraSim {
    pub fn simulate_full(&self, theta: &[f64], rng: &mut RngStream) -> LvOutcome {
        assert_eq!(theta.len(), 4, "Lotka-Volterra takes four log-rates");
        let rates: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let mut prey = self.initial_prey as f64;
        let mut pred = self.initial_predators as f64;
        let mut t = 0.0;
        let grid: Vec<f64> = (0..self.grid_points)
            .map(|i| self.duration * i as f64 / (self.grid_points - 1) as f64)
            .collect();
        let mut prey_series = Vec::with_capacity(self.grid_points);
        let mut pred_series = Vec::with_capacity(self.grid_points);
        let mut next_record = 0usize;
        let mut events: u64 = 0;
        let mut truncated = false;
        let mut predation_events: u64 = 0;
        let mut predator_births: u64 = 0;
        let mut prey_deaths_from_predation: u64 = 0;

        loop {
            let props = [
                rates[0] * prey,
                rates[1] * prey * pred,
                rates[2] * pred,
                rates[3] * prey,
            ];
            let total: f64 = props.iter().sum();
            let t_next = if total > 0.0 {
                t + rng.exponential(total)
            } else {
                f64::INFINITY
            };
            while next_record < grid.len() && grid[next_record] <= t_next {
                prey_series.push(prey);
                pred_series.push(pred);
                next_record += 1;
            }
            if next_record >= grid.len() {
                break;
            }
            if !t_next.is_finite() {
                // Frozen dynamics: populations stay constant to the end.
                while next_record < grid.len() {
                    prey_series.push(prey);
                    pred_series.push(pred);
                    next_record += 1;
                }
                break;
            }
            t = t_next;
            match rng.categorical(&props) {
                0 => prey += 1.0,
                1 => {
                    prey -= 1.0;
                    pred += 1.0;
                    predation_events += 1;
                    prey_deaths_from_predation += 1;
                    predator_births += 1;
                }
                2 => pred -= 1.0,
                _ => prey -= 1.0,
            }
            events += 1;
            if events >= self.event_cap {
                truncated = true;
                while next_record < grid.len() {
                    prey_series.push(prey);
                    pred_series.push(pred);
                    next_record += 1;
                }
                break;
            }
        }

        let mut summary = series_summary(&prey_series, &pred_series);
        if self.standardize {
            for (i, v) in summary.iter_mut().enumerate() {
                *v = (*v - LV_SUMMARY_MEAN[i]) / LV_SUMMARY_STD[i];
            }
        }
        LvOutcome {
            summary,
            truncated,
            predation_events,
            prey_deaths_from_predation,
            predator_births,
            prey_series,
            predator_series: pred_series,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

fn autocorr(xs: &[f64], m: f64, var: f64, lag: usize) -> f64 {
    if var <= 0.0 || xs.len() <= lag {
        return 0.0;
    }
    let n = xs.len();
    let cov: f64 = (0..n - lag)
        .map(|i| (xs[i] - m) * (xs[i + lag] - m))
        .sum::<f64>()
        / (n - lag) as f64;
    cov / var
}

/// Raw (unstandardized) 9-value summary.
pub fn series_summary(prey: &[f64], pred: &[f64]) -> Vec<f64> {
    let mp = mean(prey);
    let mq = mean(pred);
    let vp = variance(prey, mp);
    let vq = variance(pred, mq);
    let cross = if vp > 0.0 && vq > 0.0 {
        let n = prey.len();
        let cov: f64 = (0..n).map(|i| (prey[i] - mp) * (pred[i] - mq)).sum::<f64>() / n as f64;
        cov / (vp.sqrt() * vq.sqrt())
    } else {
        0.0
    };
    vec![
        mp,
        mq,
        (vp + 1.0).ln(),
        (vq + 1.0).ln(),
        autocorr(prey, mp, vp, 1),
        autocorr(prey, mp, vp, 2),
        autocorr(pred, mq, vq, 1),
        autocorr(pred, mq, vq, 2),
        cross,
    ]
}

impl Simulator for LotkaVolterraSim {
    fn param_dim(&self) -> usize {
        4
    }

    fn data_dim(&self) -> usize {
        9
    }

    fn prior_sample(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..4)
            .map(|_| rng.uniform_in(self.log_rate_lo, self.log_rate_hi))
            .collect()
    }

    fn prior_log_prob(&self, theta: &[f64]) -> f64 {
        let width = self.log_rate_hi - self.log_rate_lo;
        if theta
            .iter()
            .all(|t| *t >= self.log_rate_lo && *t <= self.log_rate_hi)
        {
            -4.0 * width.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        self.simulate_full(theta, rng).summary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_sim() -> LotkaVolterraSim {
        LotkaVolterraSim {
            standardize: false,
            ..LotkaVolterraSim::default()
        }
    }

    #[test]
    fn zero_rates_freeze_populations() {
        let sim = raw_sim();
        let mut rng = RngStream::new(1, 0);
        let out = sim.simulate_full(&[-700.0; 4], &mut rng);
        assert!(out.prey_series.iter().all(|&p| p == 50.0));
        assert!(out.predator_series.iter().all(|&p| p == 100.0));
        // Log-variance entries are ln(0 + 1) = 0.
        assert_eq!(out.summary[2], 0.0);
        assert_eq!(out.summary[3], 0.0);
    }

    #[test]
    fn prey_birth_only_is_monotone() {
        let sim = LotkaVolterraSim {
            event_cap: 200_000,
            standardize: false,
            ..LotkaVolterraSim::default()
        };
        let mut rng = RngStream::new(2, 0);
        let out = sim.simulate_full(&[-1.0, -700.0, -700.0, -700.0], &mut rng);
        for w in out.prey_series.windows(2) {
            assert!(w[1] >= w[0], "prey count decreased");
        }
    }

    #[test]
    fn repeat_calls_are_bit_identical() {
        let sim = LotkaVolterraSim::default();
        let theta = [-2.0, -4.0, -1.5, -3.0];
        let a = sim.simulate(&theta, &mut RngStream::new(7, 3));
        let b = sim.simulate(&theta, &mut RngStream::new(7, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn predation_conserves_event_counts() {
        let sim = raw_sim();
        let mut rng = RngStream::new(3, 0);
        let out = sim.simulate_full(&[-1.0, -4.0, -1.0, -2.0], &mut rng);
        assert_eq!(out.predation_events, out.predator_births);
        assert_eq!(out.predation_events, out.prey_deaths_from_predation);
        assert!(out.predation_events > 0, "predation never fired");
    }

    #[test]
    fn explosive_rates_truncate_but_still_return() {
        let sim = LotkaVolterraSim {
            event_cap: 20_000,
            standardize: false,
            ..LotkaVolterraSim::default()
        };
        let mut rng = RngStream::new(4, 0);
        let out = sim.simulate_full(&[2.0, -700.0, -700.0, -700.0], &mut rng);
        assert!(out.truncated);
        assert_eq!(out.summary.len(), 9);
        assert!(out.summary.iter().all(|v| v.is_finite()));
    }
}
