//! Posterior-quality diagnostics.

use crate::classic::{bandwidth_rule, BandwidthRule, KdeKernel, KdeModel};
use crate::error::Result;
use crate::num::Matrix;

/// Negative log density of the true parameters under a Gaussian-kernel KDE
/// (Scott bandwidth) fit to the posterior samples. Lower is better; this is
/// the per-round accuracy metric plotted against simulation counts.
pub fn neg_log_true_params(samples: &Matrix, theta_true: &[f64]) -> Result<f64> {
    let bw = bandwidth_rule(samples, BandwidthRule::Scott)?;
    let kde = KdeModel::new(samples.clone(), bw, KdeKernel::Gaussian)?;
    Ok(-kde.log_prob(theta_true))
}
