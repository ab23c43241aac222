//! Central finite differences, the oracle every analytic gradient in this
//! crate is checked against.

use crate::error::{Error, Result};

/// (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h per coordinate.
pub fn finite_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, at: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Numeric(format!(
            "finite_diff_grad needs h > 0, got {h}"
        )));
    }
    let mut x = at.to_vec();
    let mut grad = vec![0.0; at.len()];
    for i in 0..at.len() {
        x[i] = at[i] + h;
        let fp = f(&x);
        x[i] = at[i] - h;
        let fm = f(&x);
        x[i] = at[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                what: "finite-difference evaluation",
                index: i,
            });
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}
