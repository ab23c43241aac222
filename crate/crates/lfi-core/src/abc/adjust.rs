//! Linear regression adjustment: fit θ = A·x + β + u by least squares on
//! accepted pairs, then move every sample to θ'ₙ = A·(x₀ − xₙ) + θₙ.

use crate::error::{Error, Result};
use crate::num::{cholesky, solve_spd, Matrix};

/// Adjust accepted parameters toward the posterior at x₀. The normal
/// equations are solved via Cholesky; a ridge of 1e-8 is added only if the
/// design is rank-deficient.
pub fn linear_regression_adjust(
    pop_params: &Matrix,
    pop_data: &Matrix,
    x0: &[f64],
) -> Result<Matrix> {
    let n = pop_params.rows();
    if n != pop_data.rows() {
        return Err(Error::Shape {
            context: "linear_regression_adjust",
            expected: format!("{n} data rows"),
            got: format!("{}", pop_data.rows()),
        });
    }
    let dx = pop_data.cols();
    let dt = pop_params.cols();
    if x0.len() != dx {
        return Err(Error::Shape {
            context: "linear_regression_adjust",
            expected: format!("x0 of dimension {dx}"),
            got: format!("{}", x0.len()),
        });
    }
    // Design with intercept: [x | 1].
    let cols = dx + 1;
    let mut xtx = Matrix::zeros(cols, cols);
    let mut xty = Matrix::zeros(cols, dt);
    for r in 0..n {
        let x = pop_data.row(r);
        let th = pop_params.row(r);
        for i in 0..cols {
            let xi = if i < dx { x[i] } else { 1.0 };
            for j in 0..cols {
                let xj = if j < dx { x[j] } else { 1.0 };
                xtx.set(i, j, xtx.get(i, j) + xi * xj);
            }
            for t in 0..dt {
                xty.set(i, t, xty.get(i, t) + xi * th[t]);
            }
        }
    }
    let chol = match cholesky(&xtx) {
        Some(c) => c,
        None => {
            for i in 0..cols {
                xtx.set(i, i, xtx.get(i, i) + 1e-8);
            }
            cholesky(&xtx).ok_or_else(|| {
                Error::Numeric("regression normal equations stay singular under ridge".into())
            })?
        }
    };
    // Coefficient matrix: rows = design columns, cols = θ dims.
    let mut coeff = Matrix::zeros(cols, dt);
    for t in 0..dt {
        let rhs: Vec<f64> = (0..cols).map(|i| xty.get(i, t)).collect();
        let sol = solve_spd(&chol, &rhs);
        for i in 0..cols {
            coeff.set(i, t, sol[i]);
        }
    }
    let mut adjusted = pop_params.clone();
    for r in 0..n {
        let x = pop_data.row(r);
        for t in 0..dt {
            let mut shift = 0.0;
            for i in 0..dx {
                shift += coeff.get(i, t) * (x0[i] - x[i]);
            }
            adjusted.set(r, t, adjusted.get(r, t) + shift);
        }
    }
    Ok(adjusted)
}
