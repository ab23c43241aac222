//! Shared oracles for the integration suites: quadrature on 1-D and 2-D
//! grids, empirical CDF distances, and small statistics helpers. These stay
//! independent of the model code they check.

#![allow(dead_code)]

/// Trapezoid integral of `f` over [lo, hi] with `steps` panels.
pub fn trapezoid(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        total += w * f(x);
    }
    total * h
}

/// Trapezoid integral over the square [lo, hi]² with `steps` panels per axis.
pub fn trapezoid_2d(f: &mut dyn FnMut(f64, f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        let wi = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let x = lo + i as f64 * h;
        let mut row = 0.0;
        for j in 0..=steps {
            let wj = if j == 0 || j == steps { 0.5 } else { 1.0 };
            row += wj * f(x, lo + j as f64 * h);
        }
        total += wi * row;
    }
    total * h * h
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
pub fn ks_distance(samples: &mut [f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Standard normal CDF via erf expressed with the complementary error
/// function approximation (Abramowitz-Stegun 7.1.26, |err| < 1.5e-7).
pub fn std_normal_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.2316419 * x.abs());
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = pdf * poly;
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
