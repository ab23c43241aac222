//! Conditional Gaussian mixture-density network with full covariances, and
//! the analytic proposal correction used by SNPE-A: divide the conditional
//! mixture by a Gaussian proposal and multiply by the prior, in closed form.
//! Covariances are parameterized through Cholesky factors with log-diagonal,
//! so the uncorrected model is positive-definite by construction; only the
//! correction can fail, and that failure is detected and reported.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::flows::{train_mle, TrainConfig, TrainTrace};
use crate::gauss::{Gaussian, GaussianMixture};
use crate::num::{
    cholesky, log_sum_exp, solve_lower, solve_lower_transpose, Activation, MaskedLayer, Matrix,
    RngStream, LN_2PI,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdnModel {
    context_dim: usize,
    target_dim: usize,
    n_components: usize,
    trunk: Vec<MaskedLayer>,
    head: MaskedLayer,
}

/// Per-row mixture parameters in raw head form.
struct RawMixture<'a> {
    row: &'a [f64],
    k: usize,
    p: usize,
}

impl<'a> RawMixture<'a> {
    fn tril_len(p: usize) -> usize {
        p * (p + 1) / 2
    }

    fn logits(&self) -> &[f64] {
        &self.row[..self.k]
    }

    fn mean(&self, comp: usize) -> &[f64] {
        let start = self.k + comp * self.p;
        &self.row[start..start + self.p]
    }

    fn tril(&self, comp: usize) -> &[f64] {
        let t = Self::tril_len(self.p);
        let start = self.k + self.k * self.p + comp * t;
        &self.row[start..start + t]
    }

    fn log_weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(self.logits());
        self.logits().iter().map(|l| l - lse).collect()
    }

    /// Lower-triangular factor with exponentiated diagonal.
    fn factor(&self, comp: usize) -> Matrix {
        let raw = self.tril(comp);
        let mut l = Matrix::zeros(self.p, self.p);
        let mut idx = 0;
        for i in 0..self.p {
            for j in 0..=i {
                let v = raw[idx];
                l.set(i, j, if i == j { v.exp() } else { v });
                idx += 1;
            }
        }
        l
    }

    /// Component log-density via the factor: −½‖L⁻¹(θ−m)‖² − Σ log Lᵢᵢ − P/2 log 2π.
    fn component_log_prob(&self, comp: usize, theta: &[f64]) -> f64 {
        let l = self.factor(comp);
        let m = self.mean(comp);
        let diff: Vec<f64> = theta.iter().zip(m).map(|(a, b)| a - b).collect();
        let z = solve_lower(&l, &diff);
        let q: f64 = z.iter().map(|v| v * v).sum();
        let logdiag: f64 = self
            .tril(comp)
            .iter()
            .enumerate()
            .filter(|(idx, _)| is_diag_index(*idx))
            .map(|(_, v)| v)
            .sum();
        -0.5 * (self.p as f64 * LN_2PI + q) - logdiag
    }
}

/// Whether flattened lower-triangle index `idx` is a diagonal entry.
fn is_diag_index(idx: usize) -> bool {
    // Diagonal entries sit at i(i+1)/2 + i = i(i+3)/2.
    let mut i = 0usize;
    loop {
        let d = i * (i + 3) / 2;
        if d == idx {
            return true;
        }
        if d > idx {
            return false;
        }
        i += 1;
    }
}

impl MdnModel {
    pub fn new(
        context_dim: usize,
        target_dim: usize,
        n_components: usize,
        trunk_sizes: &[usize],
        rng: &mut RngStream,
    ) -> Self {
        assert!(n_components >= 1 && target_dim >= 1);
        let mut trunk = Vec::with_capacity(trunk_sizes.len());
        let mut in_dim = context_dim;
        for &w in trunk_sizes {
            trunk.push(MaskedLayer::dense(in_dim, w, Activation::Tanh, rng));
            in_dim = w;
        }
        let t = RawMixture::tril_len(target_dim);
        let out_dim = n_components * (1 + target_dim + t);
        let mut head = MaskedLayer::dense(in_dim, out_dim, Activation::Identity, rng);
        // Keep initial factors near the identity.
        let tril_start = n_components * (1 + target_dim);
        for r in tril_start..out_dim {
            for c in 0..head.weight.cols() {
                let v = head.weight.get(r, c);
                head.weight.set(r, c, v * 0.01);
            }
        }
        // Spread initial component means so components can specialize.
        let mean_start = n_components;
        for r in mean_start..mean_start + n_components * target_dim {
            head.bias[r] = rng.normal() * 0.1;
        }
        MdnModel {
            context_dim,
            target_dim,
            n_components,
            trunk,
            head,
        }
    }

    pub fn context_dim_(&self) -> usize {
        self.context_dim
    }

    pub fn target_dim_(&self) -> usize {
        self.target_dim
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    fn forward_heads(&self, ctx: &Matrix) -> Result<(Matrix, Vec<Matrix>, Vec<Matrix>)> {
        if ctx.cols() != self.context_dim {
            return Err(Error::Shape {
                context: "MdnModel context",
                expected: format!("{} columns", self.context_dim),
                got: format!("{}", ctx.cols()),
            });
        }
        let mut current = ctx.clone();
        let mut inputs = Vec::with_capacity(self.trunk.len() + 1);
        let mut preacts = Vec::with_capacity(self.trunk.len() + 1);
        for layer in &self.trunk {
            let (out, pre) = layer.forward_cached(&current)?;
            inputs.push(current);
            preacts.push(pre);
            current = out;
        }
        let (raw, pre) = self.head.forward_cached(&current)?;
        inputs.push(current);
        preacts.push(pre);
        Ok((raw, inputs, preacts))
    }

    fn raw<'a>(&self, raw_rows: &'a Matrix, r: usize) -> RawMixture<'a> {
        RawMixture {
            row: raw_rows.row(r),
            k: self.n_components,
            p: self.target_dim,
        }
    }

    /// The conditional mixture at a context point, as an explicit Gaussian
    /// mixture (weights, means, covariances S = LLᵀ).
    pub fn mixture_at(&self, x: &[f64]) -> Result<GaussianMixture> {
        let ctx = Matrix::from_vec(1, self.context_dim, x.to_vec())?;
        let (raw, _, _) = self.forward_heads(&ctx)?;
        let mix = self.raw(&raw, 0);
        let weights: Vec<f64> = mix.log_weights().iter().map(|lw| lw.exp()).collect();
        let mut comps = Vec::with_capacity(self.n_components);
        for k in 0..self.n_components {
            let l = mix.factor(k);
            let cov = l.matmul(&l.transpose());
            comps.push(Gaussian::new(mix.mean(k).to_vec(), cov)?);
        }
        GaussianMixture::new(weights, comps)
    }

    pub fn log_prob(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let ctx = Matrix::from_vec(1, self.context_dim, x.to_vec())?;
        let (raw, _, _) = self.forward_heads(&ctx)?;
        let mix = self.raw(&raw, 0);
        let lw = mix.log_weights();
        let terms: Vec<f64> = (0..self.n_components)
            .map(|k| lw[k] + mix.component_log_prob(k, theta))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    pub fn sample(&self, n: usize, x: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        let mixture = self.mixture_at(x)?;
        Ok(mixture.sample_n(n, rng))
    }

    /// Mean weighted NLL over rows of (θ, x) pairs.
    pub fn nll(
        &self,
        targets: &Matrix,
        contexts: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        let ctx = contexts.ok_or(Error::Shape {
            context: "MdnModel::nll",
            expected: "context matrix".into(),
            got: "none".into(),
        })?;
        let (raw, _, _) = self.forward_heads(ctx)?;
        let n = targets.rows();
        let mut total = 0.0;
        for r in 0..n {
            let mix = self.raw(&raw, r);
            let lw = mix.log_weights();
            let terms: Vec<f64> = (0..self.n_components)
                .map(|k| lw[k] + mix.component_log_prob(k, targets.row(r)))
                .collect();
            total += -log_sum_exp(&terms) * weights.map_or(1.0, |w| w[r]);
        }
        Ok(total / n as f64)
    }

    pub fn nll_grad(
        &self,
        targets: &Matrix,
        contexts: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let ctx = contexts.ok_or(Error::Shape {
            context: "MdnModel::nll_grad",
            expected: "context matrix".into(),
            got: "none".into(),
        })?;
        let (raw, inputs, preacts) = self.forward_heads(ctx)?;
        let n = targets.rows();
        let (k_n, p) = (self.n_components, self.target_dim);
        let t = RawMixture::tril_len(p);
        let scale = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut d_raw = Matrix::zeros(n, raw.cols());

        for r in 0..n {
            let w_row = weights.map_or(1.0, |w| w[r]) * scale;
            let mix = self.raw(&raw, r);
            let lw = mix.log_weights();
            let theta = targets.row(r);
            let mut terms = Vec::with_capacity(k_n);
            let mut factors = Vec::with_capacity(k_n);
            let mut zs = Vec::with_capacity(k_n);
            for k in 0..k_n {
                let l = mix.factor(k);
                let diff: Vec<f64> = theta.iter().zip(mix.mean(k)).map(|(a, b)| a - b).collect();
                let z = solve_lower(&l, &diff);
                let q: f64 = z.iter().map(|v| v * v).sum();
                let logdiag: f64 = (0..p).map(|i| l.get(i, i).ln()).sum();
                terms.push(lw[k] - 0.5 * (p as f64 * LN_2PI + q) - logdiag);
                factors.push(l);
                zs.push(z);
            }
            let logp = log_sum_exp(&terms);
            loss += -logp * w_row;

            let pis: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
            let resp: Vec<f64> = terms.iter().map(|t| (t - logp).exp()).collect();
            let out = d_raw.row_mut(r);
            for k in 0..k_n {
                // Logits: d(−logp)/d logit = π − r.
                out[k] = w_row * (pis[k] - resp[k]);
                // Means: d logN/dm = L⁻ᵀ z.
                let lt_z = solve_lower_transpose(&factors[k], &zs[k]);
                for i in 0..p {
                    out[k_n + k * p + i] = -w_row * resp[k] * lt_z[i];
                }
                // Factor entries: d logN/dL = (L⁻ᵀz)zᵀ − diag(1/Lᵢᵢ), with the
                // log-diagonal chain rule ×Lᵢᵢ.
                let base = k_n + k_n * p + k * t;
                let mut idx = 0;
                for i in 0..p {
                    for j in 0..=i {
                        let g = if i == j {
                            lt_z[i] * zs[k][i] * factors[k].get(i, i) - 1.0
                        } else {
                            lt_z[i] * zs[k][j]
                        };
                        out[base + idx] = -w_row * resp[k] * g;
                        idx += 1;
                    }
                }
            }
        }

        // Backward through head and trunk.
        let n_layers = self.trunk.len() + 1;
        let mut flat_rev: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let (head_grads, mut d_current) =
            self.head
                .backward(&inputs[n_layers - 1], &preacts[n_layers - 1], &d_raw);
        let mut buf = Vec::new();
        MaskedLayer::read_grads(&head_grads, &mut buf);
        flat_rev.push(buf);
        for (i, layer) in self.trunk.iter().enumerate().rev() {
            let (g, d_in) = layer.backward(&inputs[i], &preacts[i], &d_current);
            let mut buf = Vec::new();
            MaskedLayer::read_grads(&g, &mut buf);
            flat_rev.push(buf);
            d_current = d_in;
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for g in flat_rev.into_iter().rev() {
            flat.extend(g);
        }
        Ok((loss, flat))
    }

    pub fn param_count(&self) -> usize {
        self.trunk.iter().map(|l| l.param_count()).sum::<usize>() + self.head.param_count()
    }

    pub fn read_params(&self, out: &mut Vec<f64>) {
        for l in &self.trunk {
            l.read_params(out);
        }
        self.head.read_params(out);
    }

    pub fn write_params(&mut self, src: &mut impl Iterator<Item = f64>) {
        for l in &mut self.trunk {
            l.write_params(src);
        }
        self.head.write_params(src);
    }
}

impl ConditionalDensity for MdnModel {
    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn context_dim(&self) -> usize {
        self.context_dim
    }

    fn log_prob(&self, target: &[f64], context: &[f64]) -> Result<f64> {
        MdnModel::log_prob(self, target, context)
    }

    fn sample(&self, n: usize, context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        MdnModel::sample(self, n, context, rng)
    }
}

/// Train on a dataset of (θ, x) pairs, optionally importance-weighted.
/// Weighted maximum likelihood: L(φ) = (1/N) Σ wₙ log q_φ(θₙ|xₙ).
pub fn train_mdn(
    model: &mut MdnModel,
    data: &Dataset,
    weights: Option<&[f64]>,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<TrainTrace> {
    if data.contexts.is_none() {
        return Err(Error::Shape {
            context: "train_mdn",
            expected: "conditional dataset".into(),
            got: "unconditional".into(),
        });
    }
    train_mle(model, data, weights, cfg, rng)
}

/// Prior specification for the analytic correction.
#[derive(Debug, Clone, Copy)]
pub enum CorrectionPrior<'a> {
    /// Improper p(θ) ∝ 1; the prior terms drop out.
    Uniform,
    Gaussian(&'a Gaussian),
}

/// SNPE-A posterior correction: p̂(θ|x₀) ∝ (p(θ)/p̃(θ))·q(θ|x₀), evaluated
/// per mixture component in natural parameters. Fails with
/// `NonPositiveDefinite` (naming the component) whenever a corrected
/// precision loses positive definiteness — the signal for SNPE-A early
/// termination.
pub fn snpea_correct(
    q: &GaussianMixture,
    proposal: &Gaussian,
    prior: CorrectionPrior<'_>,
) -> Result<GaussianMixture> {
    let d = q.dim();
    if proposal.dim() != d {
        return Err(Error::Shape {
            context: "snpea_correct",
            expected: format!("proposal of dimension {d}"),
            got: format!("{}", proposal.dim()),
        });
    }
    let prop_precision = proposal.precision();
    let prop_eta = proposal.precision_times_mean();
    let prop_logz = proposal.log_norm_constant();
    let (prior_precision, prior_eta, prior_logz) = match prior {
        CorrectionPrior::Uniform => (Matrix::zeros(d, d), vec![0.0; d], 0.0),
        CorrectionPrior::Gaussian(g) => {
            if g.dim() != d {
                return Err(Error::Shape {
                    context: "snpea_correct",
                    expected: format!("prior of dimension {d}"),
                    got: format!("{}", g.dim()),
                });
            }
            (
                g.precision(),
                g.precision_times_mean(),
                g.log_norm_constant(),
            )
        }
    };

    let mut log_weights = Vec::with_capacity(q.weights().len());
    let mut components = Vec::with_capacity(q.weights().len());
    for (idx, (w, comp)) in q.weights().iter().zip(q.components()).enumerate() {
        let precision = comp.precision();
        let eta = comp.precision_times_mean();
        let mut corrected_precision = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                corrected_precision.set(
                    i,
                    j,
                    precision.get(i, j) - prop_precision.get(i, j) + prior_precision.get(i, j),
                );
            }
        }
        let chol_p =
            cholesky(&corrected_precision).ok_or(Error::NonPositiveDefinite { component: idx })?;
        let corrected_cov = crate::num::spd_inverse(&chol_p);
        let corrected_eta: Vec<f64> = (0..d)
            .map(|i| eta[i] - prop_eta[i] + prior_eta[i])
            .collect();
        let corrected_mean = crate::num::solve_spd(&chol_p, &corrected_eta);
        let corrected = Gaussian::new(corrected_mean, corrected_cov)?;
        // logZ bookkeeping keeps relative weights exact; the common proposal
        // and prior constants cancel in the final normalization.
        let logw = w.ln() + comp.log_norm_constant() + prior_logz
            - prop_logz
            - corrected.log_norm_constant();
        log_weights.push(logw);
        components.push(corrected);
    }
    let lse = log_sum_exp(&log_weights);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - lse).exp()).collect();
    GaussianMixture::new(weights, components)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_mdn(k: usize, p: usize) -> MdnModel {
        // Zero all parameters: weights uniform, means 0, factors identity.
        let mut rng = RngStream::new(0, 0);
        let mut m = MdnModel::new(1, p, k, &[], &mut rng);
        let zeros = vec![0.0; m.param_count()];
        m.write_params(&mut zeros.iter().cloned());
        m
    }

    #[test]
    fn single_component_reduces_to_gaussian() {
        let m = constant_mdn(1, 2);
        let g = Gaussian::standard(2);
        let theta = [0.7, -0.3];
        assert!((m.log_prob(&theta, &[0.0]).unwrap() - g.log_prob(&theta)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_components_match_single() {
        let m1 = constant_mdn(1, 2);
        let m2 = constant_mdn(2, 2);
        let theta = [0.2, 1.4];
        assert!(
            (m1.log_prob(&theta, &[0.5]).unwrap() - m2.log_prob(&theta, &[0.5]).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn quadrature_mass_is_one_1d_theta() {
        let mut rng = RngStream::new(21, 0);
        let m = MdnModel::new(1, 1, 3, &[10], &mut rng);
        let x = [0.3];
        let (lo, hi, steps) = (-16.0, 16.0, 16_000);
        let h = (hi - lo) / steps as f64;
        let mut mass = 0.0;
        for i in 0..=steps {
            let th = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            mass += w * m.log_prob(&[th], &x).unwrap().exp();
        }
        mass *= h;
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn sampling_standard_component() {
        let m = constant_mdn(1, 2);
        let mut rng = RngStream::new(2, 0);
        let s = m.sample(20_000, &[0.0], &mut rng).unwrap();
        let mean = s.column_means();
        assert!(mean[0].abs() < 0.03 && mean[1].abs() < 0.03);
        let sd = s.column_stds();
        assert!((sd[0] - 1.0).abs() < 0.03 && (sd[1] - 1.0).abs() < 0.03);
    }

    #[test]
    fn zero_weight_component_never_selected() {
        let mut m = constant_mdn(2, 1);
        // logits [big, small]; second component mean far away at 50.
        let mut params = vec![0.0; m.param_count()];
        // Head bias layout: [logits(2), means(2), tril(2)].
        let bias_start = m.param_count() - 6;
        params[bias_start] = 30.0; // logit 0
        params[bias_start + 1] = -30.0; // logit 1
        params[bias_start + 3] = 50.0; // mean of component 1
        m.write_params(&mut params.iter().cloned());
        let mut rng = RngStream::new(3, 0);
        let s = m.sample(5_000, &[0.0], &mut rng).unwrap();
        for r in 0..s.rows() {
            assert!(s.get(r, 0).abs() < 10.0, "component with weight ~0 drawn");
        }
    }

    #[test]
    fn mixture_mean_matches_analytic() {
        let mut rng = RngStream::new(4, 0);
        let m = MdnModel::new(1, 1, 3, &[8], &mut rng);
        let x = [0.2];
        let mixture = m.mixture_at(&x).unwrap();
        let analytic = mixture.mean()[0];
        let mut rs = RngStream::new(5, 0);
        let s = m.sample(100_000, &x, &mut rs).unwrap();
        let emp = s.column_means()[0];
        let sd = s.column_stds()[0];
        assert!(
            (emp - analytic).abs() < 3.0 * sd / (100_000f64).sqrt() + 1e-3,
            "{emp} vs {analytic}"
        );
    }

    #[test]
    fn correction_with_proposal_equal_prior_is_identity() {
        let mut rng = RngStream::new(6, 0);
        let m = MdnModel::new(1, 2, 3, &[6], &mut rng);
        let q = m.mixture_at(&[0.4]).unwrap();
        let prior = Gaussian::new(
            vec![0.3, -0.2],
            Matrix::from_vec(2, 2, vec![2.0, 0.4, 0.4, 1.5]).unwrap(),
        )
        .unwrap();
        let corrected = snpea_correct(&q, &prior, CorrectionPrior::Gaussian(&prior)).unwrap();
        for (a, b) in corrected.weights().iter().zip(q.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
        for pt in [[-1.0, 0.5], [0.0, 0.0], [2.0, -1.0]] {
            assert!((corrected.log_prob(&pt) - q.log_prob(&pt)).abs() < 1e-9);
        }
    }

    #[test]
    fn precision_subtraction_hand_case() {
        // Uniform prior, component N(0, 1), proposal N(0, 2):
        // corrected variance (1 − 1/2)⁻¹ = 2, mean 0.
        let comp = Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let q = GaussianMixture::new(vec![1.0], vec![comp]).unwrap();
        let proposal =
            Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![2.0]).unwrap()).unwrap();
        let corrected = snpea_correct(&q, &proposal, CorrectionPrior::Uniform).unwrap();
        assert!((corrected.components()[0].covariance().get(0, 0) - 2.0).abs() < 1e-12);
        assert!(corrected.components()[0].mean()[0].abs() < 1e-12);
    }

    #[test]
    fn narrow_proposal_is_negative_definite() {
        // Proposal variance αS with α = 1/2 < 1: corrected variance would be
        // (α/(α−1))·S < 0.
        let comp = Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let q = GaussianMixture::new(vec![1.0], vec![comp]).unwrap();
        let proposal =
            Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![0.5]).unwrap()).unwrap();
        match snpea_correct(&q, &proposal, CorrectionPrior::Uniform) {
            Err(Error::NonPositiveDefinite { component }) => assert_eq!(component, 0),
            other => panic!("expected NonPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn corrected_weights_sum_to_one() {
        let mut rng = RngStream::new(7, 0);
        let m = MdnModel::new(2, 1, 4, &[10], &mut rng);
        let q = m.mixture_at(&[0.1, -0.4]).unwrap();
        let proposal =
            Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![4.0]).unwrap()).unwrap();
        let prior = Gaussian::new(vec![0.0], Matrix::from_vec(1, 1, vec![9.0]).unwrap()).unwrap();
        let corrected = snpea_correct(&q, &proposal, CorrectionPrior::Gaussian(&prior)).unwrap();
        let total: f64 = corrected.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
