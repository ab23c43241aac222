//! Closed-form and non-parametric density baselines: Gaussian maximum
//! likelihood, histograms, and kernel density estimation.

use serde::{Deserialize, Serialize};

use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::gauss::Gaussian;
use crate::num::{cholesky, log_sum_exp, Matrix, RngStream, LN_2PI};

/// Maximum-likelihood Gaussian: empirical mean and covariance (1/N divisor).
/// If the empirical covariance has no Cholesky factor, a diagonal jitter of
/// `1e-9·trace(Σ)/D` is added (falling back to `1e-9` when the trace
/// vanishes, e.g. for coincident points).
pub fn gaussian_mle_fit(data: &Matrix) -> Result<Gaussian> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = data.column_means();
    let mut cov = Matrix::zeros(d, d);
    for row in data.iter_rows() {
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
    for v in cov.data_mut() {
        *v /= n as f64;
    }
    if cholesky(&cov).is_none() {
        let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
        let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
        let jitter = 1e-9 * scale;
        for i in 0..d {
            cov.set(i, i, cov.get(i, i) + jitter);
        }
    }
    Gaussian::new(mean, cov)
}

/// Piecewise-constant density on a per-axis grid of bins. Densities are the
/// maximum-likelihood solution N_k / (N·|B_k|).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramModel {
    /// Strictly increasing edge list per axis.
    pub edges: Vec<Vec<f64>>,
    /// Flattened bin densities, row-major over axes.
    pub densities: Vec<f64>,
}

impl HistogramModel {
    fn bins_per_axis(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.len() - 1).collect()
    }

    /// Bin index along one axis. Points on a shared edge go to the right bin;
    /// the last edge closes left. `None` when outside the outermost edges.
    fn axis_bin(edges: &[f64], x: f64) -> Option<usize> {
        let k = edges.len() - 1;
        if x < edges[0] || x > edges[k] {
            return None;
        }
        if x == edges[k] {
            return Some(k - 1);
        }
        // partition_point: first bin whose right edge exceeds x.
        let idx = edges[1..].partition_point(|&e| e <= x);
        Some(idx.min(k - 1))
    }

    fn flat_index(&self, point: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (edges, &x) in self.edges.iter().zip(point) {
            let b = Self::axis_bin(edges, x)?;
            idx = idx * (edges.len() - 1) + b;
        }
        Some(idx)
    }

    fn bin_volume(&self, flat: usize) -> f64 {
        let bins = self.bins_per_axis();
        let mut rem = flat;
        let mut vol = 1.0;
        for axis in (0..bins.len()).rev() {
            let b = rem % bins[axis];
            rem /= bins[axis];
            vol *= self.edges[axis][b + 1] - self.edges[axis][b];
        }
        vol
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        match self.flat_index(x) {
            Some(i) if self.densities[i] > 0.0 => self.densities[i].ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    /// Ancestral sampling: pick a bin by probability mass, then uniform
    /// within it.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let bins = self.bins_per_axis();
        let masses: Vec<f64> = (0..self.densities.len())
            .map(|b| self.densities[b] * self.bin_volume(b))
            .collect();
        let d = self.edges.len();
        let mut out = Matrix::zeros(n, d);
        for r in 0..n {
            let mut flat = rng.categorical(&masses);
            let row = out.row_mut(r);
            for axis in (0..d).rev() {
                let b = flat % bins[axis];
                flat /= bins[axis];
                row[axis] = rng.uniform_in(self.edges[axis][b], self.edges[axis][b + 1]);
            }
        }
        out
    }
}

impl ConditionalDensity for HistogramModel {
    fn target_dim(&self) -> usize {
        self.edges.len()
    }

    fn context_dim(&self) -> usize {
        0
    }

    fn log_prob(&self, target: &[f64], _context: &[f64]) -> Result<f64> {
        Ok(HistogramModel::log_prob(self, target))
    }

    fn sample(&self, n: usize, _context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        Ok(HistogramModel::sample(self, n, rng))
    }
}

/// Fit a histogram with the given per-axis edges. Every datapoint must lie
/// within the outermost edges.
pub fn histogram_fit(data: &Matrix, edges: &[Vec<f64>]) -> Result<HistogramModel> {
    if edges.len() != data.cols() {
        return Err(Error::Shape {
            context: "histogram_fit",
            expected: format!("{} edge lists", data.cols()),
            got: format!("{}", edges.len()),
        });
    }
    for axis in edges {
        if axis.len() < 2 || axis.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateData(
                "histogram edges must be strictly increasing with at least one bin".into(),
            ));
        }
    }
    let model_shell = HistogramModel {
        edges: edges.to_vec(),
        densities: Vec::new(),
    };
    let total_bins: usize = edges.iter().map(|e| e.len() - 1).product();
    let mut counts = vec![0u64; total_bins];
    for (i, row) in data.iter_rows().enumerate() {
        match model_shell.flat_index(row) {
            Some(b) => counts[b] += 1,
            None => return Err(Error::OutOfRange { index: i }),
        }
    }
    let n = data.rows() as f64;
    let mut model = HistogramModel {
        edges: edges.to_vec(),
        densities: vec![0.0; total_bins],
    };
    for b in 0..total_bins {
        model.densities[b] = counts[b] as f64 / (n * model.bin_volume(b));
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeKernel {
    Gaussian,
    /// Multiplicative Epanechnikov with normalizer (3/4)^D; support is the
    /// closed cube of half-width ε.
    Epanechnikov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeModel {
    pub points: Matrix,
    pub bandwidth: f64,
    pub kernel: KdeKernel,
}

impl KdeModel {
    pub fn new(points: Matrix, bandwidth: f64, kernel: KdeKernel) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if !(bandwidth > 0.0) {
            return Err(Error::DegenerateData(format!(
                "kde bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(KdeModel {
            points,
            bandwidth,
            kernel,
        })
    }

    /// log q_ε(x) = log (1/N) Σ k_ε(x−xₙ), via log-sum-exp. Epanechnikov
    /// queries outside every kernel support return −∞.
    pub fn log_prob(&self, x: &[f64]) -> f64 {
        let d = self.points.cols();
        let eps = self.bandwidth;
        let n = self.points.rows();
        let mut terms = Vec::with_capacity(n);
        match self.kernel {
            KdeKernel::Gaussian => {
                for row in self.points.iter_rows() {
                    let q: f64 = x
                        .iter()
                        .zip(row)
                        .map(|(a, b)| {
                            let u = (a - b) / eps;
                            u * u
                        })
                        .sum();
                    terms.push(-0.5 * (d as f64 * LN_2PI + q) - d as f64 * eps.ln());
                }
            }
            KdeKernel::Epanechnikov => {
                let log_norm = d as f64 * (0.75f64.ln() - eps.ln());
                for row in self.points.iter_rows() {
                    let mut logk = log_norm;
                    let mut inside = true;
                    for (a, b) in x.iter().zip(row) {
                        let u = (a - b) / eps;
                        if u.abs() > 1.0 {
                            inside = false;
                            break;
                        }
                        logk += (1.0 - u * u).max(0.0).ln();
                    }
                    terms.push(if inside { logk } else { f64::NEG_INFINITY });
                }
            }
        }
        log_sum_exp(&terms) - (n as f64).ln()
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let d = self.points.cols();
        let mut out = Matrix::zeros(n, d);
        for r in 0..n {
            let idx = rng.below(self.points.rows());
            let base = self.points.row(idx);
            let row = out.row_mut(r);
            for i in 0..d {
                let noise = match self.kernel {
                    KdeKernel::Gaussian => rng.normal(),
                    KdeKernel::Epanechnikov => epanechnikov_draw(rng),
                };
                row[i] = base[i] + self.bandwidth * noise;
            }
        }
        out
    }
}

impl ConditionalDensity for KdeModel {
    fn target_dim(&self) -> usize {
        self.points.cols()
    }

    fn context_dim(&self) -> usize {
        0
    }

    fn log_prob(&self, target: &[f64], _context: &[f64]) -> Result<f64> {
        Ok(KdeModel::log_prob(self, target))
    }

    fn sample(&self, n: usize, _context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        Ok(KdeModel::sample(self, n, rng))
    }
}

/// Inverse-free draw from the 1-D Epanechnikov density: the median of three
/// uniforms on [−1, 1] has exactly that distribution.
fn epanechnikov_draw(rng: &mut RngStream) -> f64 {
    let mut v = [
        rng.uniform_in(-1.0, 1.0),
        rng.uniform_in(-1.0, 1.0),
        rng.uniform_in(-1.0, 1.0),
    ];
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Scott,
    Silverman,
}

/// Rule-of-thumb kernel bandwidths. σ̂ is the arithmetic mean of per-axis
/// sample standard deviations (N−1 divisor).
pub fn bandwidth_rule(data: &Matrix, rule: BandwidthRule) -> Result<f64> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let sigma = data.column_stds().iter().sum::<f64>() / d as f64;
    if sigma <= 0.0 {
        return Err(Error::DegenerateData(
            "bandwidth rules need nonzero variance".into(),
        ));
    }
    let n_term = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    Ok(match rule {
        BandwidthRule::Scott => sigma * n_term,
        BandwidthRule::Silverman => {
            sigma * (4.0 / (d as f64 + 2.0)).powf(1.0 / (d as f64 + 4.0)) * n_term
        }
    })
}

/// The fitted Gaussian as a zero-context density model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianModel(pub Gaussian);

impl ConditionalDensity for GaussianModel {
    fn target_dim(&self) -> usize {
        self.0.dim()
    }

    fn context_dim(&self) -> usize {
        0
    }

    fn log_prob(&self, target: &[f64], _context: &[f64]) -> Result<f64> {
        Ok(self.0.log_prob(target))
    }

    fn sample(&self, n: usize, _context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        Ok(self.0.sample_n(n, rng))
    }
}
