//! Masked Autoregressive Flow: a stack of MADE layers with permutations in
//! between. Evaluating the density is one forward pass per layer; sampling
//! inverts the stack, costing D sequential passes per layer.

use serde::{Deserialize, Serialize};

use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::flows::made::MadeNet;
use crate::num::{std_normal_log_pdf, MaskedLayer, Matrix, RngStream};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MafModel {
    layers: Vec<MadeNet>,
    /// perms[l][j] = index of the layer-l noise entry that becomes input j of
    /// layer l+1. Defaults to order reversal after every layer, so successive
    /// layers see alternating orderings.
    perms: Vec<Vec<usize>>,
}

impl MafModel {
    pub fn new(
        data_dim: usize,
        context_dim: usize,
        n_layers: usize,
        hidden_sizes: &[usize],
        rng: &mut RngStream,
    ) -> Self {
        assert!(n_layers >= 1, "a MAF needs at least one layer");
        let layers = (0..n_layers)
            .map(|_| {
                MadeNet::new(
                    data_dim,
                    context_dim,
                    hidden_sizes,
                    (0..data_dim).collect(),
                    rng,
                )
            })
            .collect();
        let reversal: Vec<usize> = (0..data_dim).rev().collect();
        MafModel {
            layers,
            perms: vec![reversal; n_layers],
        }
    }

    pub fn with_permutations(layers: Vec<MadeNet>, perms: Vec<Vec<usize>>) -> Result<Self> {
        if layers.is_empty() || perms.len() != layers.len() {
            return Err(Error::Shape {
                context: "MafModel::with_permutations",
                expected: "one permutation per layer".into(),
                got: format!("{} layers, {} perms", layers.len(), perms.len()),
            });
        }
        let d = layers[0].data_dim();
        let c = layers[0].ctx_dim();
        for l in &layers {
            if l.data_dim() != d || l.ctx_dim() != c {
                return Err(Error::Shape {
                    context: "MafModel::with_permutations",
                    expected: format!("all layers of dims ({d}, {c})"),
                    got: "mixed".into(),
                });
            }
        }
        for p in &perms {
            let mut seen = vec![false; d];
            if p.len() != d
                || p.iter()
                    .any(|&i| i >= d || std::mem::replace(&mut seen[i], true))
            {
                return Err(Error::Shape {
                    context: "MafModel::with_permutations",
                    expected: format!("bijections on 0..{d}"),
                    got: format!("{p:?}"),
                });
            }
        }
        Ok(MafModel { layers, perms })
    }

    pub fn data_dim(&self) -> usize {
        self.layers[0].data_dim()
    }

    pub fn ctx_dim(&self) -> usize {
        self.layers[0].ctx_dim()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[MadeNet] {
        &self.layers
    }

    fn apply_perm(perm: &[usize], m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for (j, &src) in perm.iter().enumerate() {
                out.set(r, j, m.get(r, src));
            }
        }
        out
    }

    fn apply_perm_inverse(perm: &[usize], m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for (j, &src) in perm.iter().enumerate() {
                out.set(r, src, m.get(r, j));
            }
        }
        out
    }

    /// Log-density of a batch: push x through every layer's x→u map, summing
    /// the per-layer log-determinants −Σα, and score the final noise against
    /// the standard normal base.
    pub fn log_prob_batch(&self, x: &Matrix, ctx: Option<&Matrix>) -> Result<Vec<f64>> {
        let n = x.rows();
        let d = self.data_dim();
        let mut v = x.clone();
        let mut logdet = vec![0.0; n];
        for (li, (layer, perm)) in self.layers.iter().zip(&self.perms).enumerate() {
            let (logps_u, u) = layer.log_prob_batch(&v, ctx).map_err(|e| Error::Round {
                algorithm: "maf_log_prob",
                round: li,
                completed_rounds: Vec::new(),
                source: Box::new(e),
            })?;
            // Recover the layer's −Σα log-det from its (logp, u) pair:
            // logp = Σ logN(u) − Σα  ⇒  −Σα = logp − Σ logN(u).
            for r in 0..n {
                let base: f64 = u.row(r).iter().map(|&z| std_normal_log_pdf(z)).sum();
                logdet[r] += logps_u[r] - base;
            }
            v = Self::apply_perm(perm, &u);
        }
        let mut out = vec![0.0; n];
        for r in 0..n {
            let base: f64 = (0..d).map(|c| std_normal_log_pdf(v.get(r, c))).sum();
            out[r] = base + logdet[r];
        }
        Ok(out)
    }

    pub fn log_prob_one(&self, x: &[f64], ctx: &[f64]) -> Result<f64> {
        let xm = Matrix::from_vec(1, self.data_dim(), x.to_vec())?;
        let cm = self.broadcast_ctx(1, ctx)?;
        Ok(self.log_prob_batch(&xm, cm.as_ref())?[0])
    }

    /// Map data to base noise (the composed x→u direction).
    pub fn transform_to_noise(&self, x: &Matrix, ctx: Option<&Matrix>) -> Result<Matrix> {
        let mut v = x.clone();
        for (layer, perm) in self.layers.iter().zip(&self.perms) {
            let (_, u) = layer.log_prob_batch(&v, ctx)?;
            v = Self::apply_perm(perm, &u);
        }
        Ok(v)
    }

    /// Invert the stack for given base noise.
    pub fn transform_from_noise(&self, noise: &Matrix, ctx: Option<&Matrix>) -> Result<Matrix> {
        let mut v = noise.clone();
        for (layer, perm) in self.layers.iter().zip(&self.perms).rev() {
            let u = Self::apply_perm_inverse(perm, &v);
            v = layer.invert(&u, ctx)?;
        }
        Ok(v)
    }

    pub fn sample_n(&self, n: usize, ctx: Option<&Matrix>, rng: &mut RngStream) -> Result<Matrix> {
        let mut noise = Matrix::zeros(n, self.data_dim());
        for v in noise.data_mut() {
            *v = rng.normal();
        }
        self.transform_from_noise(&noise, ctx)
    }

    fn broadcast_ctx(&self, n: usize, ctx: &[f64]) -> Result<Option<Matrix>> {
        if self.ctx_dim() == 0 {
            return Ok(None);
        }
        if ctx.len() != self.ctx_dim() {
            return Err(Error::Shape {
                context: "MafModel context",
                expected: format!("{} context values", self.ctx_dim()),
                got: format!("{}", ctx.len()),
            });
        }
        let mut m = Matrix::zeros(n, self.ctx_dim());
        for r in 0..n {
            m.row_mut(r).copy_from_slice(ctx);
        }
        Ok(Some(m))
    }

    /// Mean weighted negative log-likelihood.
    pub fn nll(&self, x: &Matrix, ctx: Option<&Matrix>, weights: Option<&[f64]>) -> Result<f64> {
        let logps = self.log_prob_batch(x, ctx)?;
        let n = logps.len() as f64;
        Ok(logps
            .iter()
            .enumerate()
            .map(|(i, lp)| -lp * weights.map_or(1.0, |w| w[i]))
            .sum::<f64>()
            / n)
    }

    /// NLL with gradients for all layers. The backward pass threads the
    /// downstream noise gradient through each layer's transform and its
    /// conditioner network.
    pub fn nll_grad(
        &self,
        x: &Matrix,
        ctx: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let n = x.rows();
        let d = self.data_dim();
        let scale = 1.0 / n as f64;
        let row_w: Vec<f64> = (0..n)
            .map(|r| weights.map_or(1.0, |w| w[r]) * scale)
            .collect();

        // Forward, caching per-layer inputs, params, and noise.
        let mut v = x.clone();
        let mut alphas = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut noises = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (beta, alpha, cache) = layer.forward_params(&v, ctx)?;
            let mut u = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    u.set(
                        r,
                        c,
                        (v.get(r, c) - beta.get(r, c)) * (-alpha.get(r, c)).exp(),
                    );
                }
            }
            let perm = &self.perms[caches.len()];
            v = Self::apply_perm(perm, &u);
            alphas.push(alpha);
            caches.push(cache);
            noises.push(u);
        }

        // Loss: Σ_r w_r [ −Σ logN(v_final) + Σ_l Σ α ].
        let mut loss = 0.0;
        for r in 0..n {
            let mut lp: f64 = (0..d).map(|c| std_normal_log_pdf(v.get(r, c))).sum();
            for alpha in &alphas {
                for c in 0..d {
                    lp -= alpha.get(r, c);
                }
            }
            loss += row_w[r] * (-lp);
        }

        // d(−logN(z))/dz = z at the base.
        let mut d_v = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                d_v.set(r, c, row_w[r] * v.get(r, c));
            }
        }

        let mut layer_flat_grads: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let du = Self::apply_perm_inverse(&self.perms[li], &d_v);
            let (alpha, u) = (&alphas[li], &noises[li]);
            let mut d_beta = Matrix::zeros(n, d);
            let mut d_alpha = Matrix::zeros(n, d);
            let mut d_direct = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    let e = (-alpha.get(r, c)).exp();
                    let g = du.get(r, c);
                    // u = (v − β)e^{−α}: ∂u/∂β = −e^{−α}, ∂u/∂α = −u, ∂u/∂v = e^{−α}.
                    d_beta.set(r, c, -g * e);
                    d_alpha.set(r, c, -g * u.get(r, c) + row_w[r]);
                    d_direct.set(r, c, g * e);
                }
            }
            let (grads, d_x_cond) = self.layers[li].backward_params(&caches[li], &d_beta, &d_alpha);
            let mut flat = Vec::new();
            for g in &grads {
                MaskedLayer::read_grads(g, &mut flat);
            }
            layer_flat_grads.push(flat);
            let mut d_in = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    d_in.set(r, c, d_direct.get(r, c) + d_x_cond.get(r, c));
                }
            }
            d_v = d_in;
        }
        layer_flat_grads.reverse();
        let mut flat = Vec::with_capacity(self.param_count());
        for g in layer_flat_grads {
            flat.extend(g);
        }
        Ok((loss, flat))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn read_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.read_params(out);
        }
    }

    pub fn write_params(&mut self, src: &mut impl Iterator<Item = f64>) {
        for l in &mut self.layers {
            l.write_params(src);
        }
    }
}

impl ConditionalDensity for MafModel {
    fn target_dim(&self) -> usize {
        self.data_dim()
    }

    fn context_dim(&self) -> usize {
        self.ctx_dim()
    }

    fn log_prob(&self, target: &[f64], context: &[f64]) -> Result<f64> {
        self.log_prob_one(target, context)
    }

    fn sample(&self, n: usize, context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        let ctx = self.broadcast_ctx(n, context)?;
        self.sample_n(n, ctx.as_ref(), rng)
    }
}
