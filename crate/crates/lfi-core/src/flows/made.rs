//! MADE with Gaussian conditionals: a feedforward network whose binary masks
//! enforce the autoregressive property in a single pass. For each dimension
//! the network emits a shift β and a log-scale α under the transform
//! x = exp(α)·u + β, so a MADE is at once a density estimator and a single
//! flow layer.

use serde::{Deserialize, Serialize};

use crate::density::ConditionalDensity;
use crate::error::{Error, Result};
use crate::flows::masks::build_masks;
use crate::num::{std_normal_log_pdf, Activation, LayerGrads, MaskedLayer, Matrix, RngStream};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MadeNet {
    data_dim: usize,
    context_dim: usize,
    /// order[k] = dimension index at ordering position k (degree k+1).
    order: Vec<usize>,
    hidden: Vec<MaskedLayer>,
    output: MaskedLayer,
    /// Log-scales are clamped to ±alpha_clip after the output layer.
    alpha_clip: f64,
}

/// Forward caches needed by the backward pass.
pub struct MadeCache {
    layer_inputs: Vec<Matrix>,
    preacts: Vec<Matrix>,
    /// Raw (pre-clip) α values, to zero gradients where the clamp is active.
    alpha_raw: Matrix,
}

impl MadeNet {
    pub fn new(
        data_dim: usize,
        context_dim: usize,
        hidden_sizes: &[usize],
        order: Vec<usize>,
        rng: &mut RngStream,
    ) -> Self {
        assert_eq!(order.len(), data_dim, "order must cover every dimension");
        let masks = build_masks(data_dim, context_dim, hidden_sizes, &order, rng);
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut in_dim = data_dim + context_dim;
        for (i, &width) in hidden_sizes.iter().enumerate() {
            let mut layer = MaskedLayer::new(
                Matrix::zeros(width, in_dim),
                vec![0.0; width],
                masks.hidden_masks[i].clone(),
                Activation::Tanh,
            );
            layer.init_glorot(rng, 1.0);
            in_dim = width;
            hidden.push(layer);
        }
        let mut output = MaskedLayer::new(
            Matrix::zeros(2 * data_dim, in_dim),
            vec![0.0; 2 * data_dim],
            masks.output_mask,
            Activation::Identity,
        );
        output.init_glorot(rng, 1.0);
        // Scale the α rows down so fresh models start near the identity map.
        for d in data_dim..2 * data_dim {
            for c in 0..in_dim {
                let v = output.weight.get(d, c);
                output.weight.set(d, c, v * 0.01);
            }
        }
        MadeNet {
            data_dim,
            context_dim,
            order,
            hidden,
            output,
            alpha_clip: 7.0,
        }
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn ctx_dim(&self) -> usize {
        self.context_dim
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    fn assemble_input(&self, x: &Matrix, ctx: Option<&Matrix>) -> Result<Matrix> {
        if x.cols() != self.data_dim {
            return Err(Error::Shape {
                context: "MadeNet input",
                expected: format!("{} data columns", self.data_dim),
                got: format!("{}", x.cols()),
            });
        }
        if self.context_dim == 0 {
            return Ok(x.clone());
        }
        let ctx = ctx.ok_or(Error::Shape {
            context: "MadeNet context",
            expected: format!("{} context columns", self.context_dim),
            got: "none".into(),
        })?;
        if ctx.cols() != self.context_dim || ctx.rows() != x.rows() {
            return Err(Error::Shape {
                context: "MadeNet context",
                expected: format!("{}x{}", x.rows(), self.context_dim),
                got: format!("{}x{}", ctx.rows(), ctx.cols()),
            });
        }
        let mut full = Matrix::zeros(x.rows(), self.data_dim + self.context_dim);
        for r in 0..x.rows() {
            full.row_mut(r)[..self.data_dim].copy_from_slice(x.row(r));
            full.row_mut(r)[self.data_dim..].copy_from_slice(ctx.row(r));
        }
        Ok(full)
    }

    /// Conditional parameters (β, α) per row, with forward caches.
    pub fn forward_params(
        &self,
        x: &Matrix,
        ctx: Option<&Matrix>,
    ) -> Result<(Matrix, Matrix, MadeCache)> {
        let mut current = self.assemble_input(x, ctx)?;
        let mut layer_inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut preacts = Vec::with_capacity(self.hidden.len() + 1);
        for layer in &self.hidden {
            let (out, pre) = layer.forward_cached(&current)?;
            layer_inputs.push(current);
            preacts.push(pre);
            current = out;
        }
        let (raw_out, pre) = self.output.forward_cached(&current)?;
        layer_inputs.push(current);
        preacts.push(pre);

        let n = x.rows();
        let d = self.data_dim;
        let mut beta = Matrix::zeros(n, d);
        let mut alpha = Matrix::zeros(n, d);
        let mut alpha_raw = Matrix::zeros(n, d);
        for r in 0..n {
            for dim in 0..d {
                beta.set(r, dim, raw_out.get(r, dim));
                let a = raw_out.get(r, d + dim);
                alpha_raw.set(r, dim, a);
                alpha.set(r, dim, a.clamp(-self.alpha_clip, self.alpha_clip));
            }
        }
        Ok((
            beta,
            alpha,
            MadeCache {
                layer_inputs,
                preacts,
                alpha_raw,
            },
        ))
    }

    /// Backprop through the network given gradients w.r.t. β and (clipped) α.
    /// Returns per-layer parameter gradients (hidden layers then output) and
    /// the gradient w.r.t. the data part of the input.
    pub fn backward_params(
        &self,
        cache: &MadeCache,
        d_beta: &Matrix,
        d_alpha: &Matrix,
    ) -> (Vec<LayerGrads>, Matrix) {
        let n = d_beta.rows();
        let d = self.data_dim;
        let mut d_out = Matrix::zeros(n, 2 * d);
        for r in 0..n {
            for dim in 0..d {
                d_out.set(r, dim, d_beta.get(r, dim));
                let raw = cache.alpha_raw.get(r, dim);
                let grad = if raw.abs() > self.alpha_clip {
                    0.0
                } else {
                    d_alpha.get(r, dim)
                };
                d_out.set(r, d + dim, grad);
            }
        }
        let n_layers = self.hidden.len() + 1;
        let mut grads: Vec<Option<LayerGrads>> = (0..n_layers).map(|_| None).collect();
        let (out_grads, mut d_current) = self.output.backward(
            &cache.layer_inputs[n_layers - 1],
            &cache.preacts[n_layers - 1],
            &d_out,
        );
        grads[n_layers - 1] = Some(out_grads);
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let (g, d_in) = layer.backward(&cache.layer_inputs[i], &cache.preacts[i], &d_current);
            grads[i] = Some(g);
            d_current = d_in;
        }
        let mut d_x = Matrix::zeros(n, d);
        for r in 0..n {
            d_x.row_mut(r).copy_from_slice(&d_current.row(r)[..d]);
        }
        (grads.into_iter().map(|g| g.unwrap()).collect(), d_x)
    }

    /// Log-density and the recovered noise u for one point.
    pub fn log_prob(&self, x: &[f64], ctx: &[f64]) -> Result<(f64, Vec<f64>)> {
        let xm = Matrix::from_vec(1, self.data_dim, x.to_vec())?;
        let cm = if self.context_dim > 0 {
            Some(Matrix::from_vec(1, self.context_dim, ctx.to_vec())?)
        } else {
            None
        };
        let (logps, u) = self.log_prob_batch(&xm, cm.as_ref())?;
        Ok((logps[0], u.row(0).to_vec()))
    }

    /// Batched log-density: u = (x − β)·exp(−α), logp = Σ [logN(u) − α].
    pub fn log_prob_batch(&self, x: &Matrix, ctx: Option<&Matrix>) -> Result<(Vec<f64>, Matrix)> {
        let (beta, alpha, _) = self.forward_params(x, ctx)?;
        let n = x.rows();
        let mut u = Matrix::zeros(n, self.data_dim);
        let mut logps = vec![0.0; n];
        for r in 0..n {
            let mut lp = 0.0;
            for d in 0..self.data_dim {
                let a = alpha.get(r, d);
                let ui = (x.get(r, d) - beta.get(r, d)) * (-a).exp();
                u.set(r, d, ui);
                lp += std_normal_log_pdf(ui) - a;
            }
            logps[r] = lp;
        }
        Ok((logps, u))
    }

    /// Invert the transform for given noise u: fill dimensions in ordering
    /// sequence, recomputing (β, α) from already-filled dimensions. One
    /// forward pass per dimension.
    pub fn invert(&self, u: &Matrix, ctx: Option<&Matrix>) -> Result<Matrix> {
        let n = u.rows();
        let mut x = Matrix::zeros(n, self.data_dim);
        for k in 0..self.data_dim {
            let dim = self.order[k];
            let (beta, alpha, _) = self.forward_params(&x, ctx)?;
            for r in 0..n {
                let v = alpha.get(r, dim).exp() * u.get(r, dim) + beta.get(r, dim);
                x.set(r, dim, v);
            }
        }
        Ok(x)
    }

    /// Ancestral sampling: draw u ~ N(0, I), then invert.
    pub fn sample_n(&self, n: usize, ctx: Option<&Matrix>, rng: &mut RngStream) -> Result<Matrix> {
        let mut u = Matrix::zeros(n, self.data_dim);
        for r in 0..n {
            for d in 0..self.data_dim {
                u.set(r, d, rng.normal());
            }
        }
        self.invert(&u, ctx)
    }

    /// Mean weighted negative log-likelihood over the batch.
    pub fn nll(&self, x: &Matrix, ctx: Option<&Matrix>, weights: Option<&[f64]>) -> Result<f64> {
        let (logps, _) = self.log_prob_batch(x, ctx)?;
        let n = logps.len() as f64;
        Ok(logps
            .iter()
            .enumerate()
            .map(|(i, lp)| -lp * weights.map_or(1.0, |w| w[i]))
            .sum::<f64>()
            / n)
    }

    /// NLL and its gradient w.r.t. all parameters, flattened.
    pub fn nll_grad(
        &self,
        x: &Matrix,
        ctx: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let (beta, alpha, cache) = self.forward_params(x, ctx)?;
        let n = x.rows();
        let d = self.data_dim;
        let scale = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut d_beta = Matrix::zeros(n, d);
        let mut d_alpha = Matrix::zeros(n, d);
        for r in 0..n {
            let w = weights.map_or(1.0, |w| w[r]) * scale;
            for dim in 0..d {
                let a = alpha.get(r, dim);
                let u = (x.get(r, dim) - beta.get(r, dim)) * (-a).exp();
                loss += w * (-(std_normal_log_pdf(u) - a));
                // d(−logp)/dβ = −u·e^{−α};  d(−logp)/dα = 1 − u².
                d_beta.set(r, dim, w * (-u * (-a).exp()));
                d_alpha.set(r, dim, w * (1.0 - u * u));
            }
        }
        let (layer_grads, _) = self.backward_params(&cache, &d_beta, &d_alpha);
        let mut flat = Vec::with_capacity(self.param_count());
        for g in &layer_grads {
            MaskedLayer::read_grads(g, &mut flat);
        }
        Ok((loss, flat))
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(|l| l.param_count()).sum::<usize>() + self.output.param_count()
    }

    pub fn read_params(&self, out: &mut Vec<f64>) {
        for l in &self.hidden {
            l.read_params(out);
        }
        self.output.read_params(out);
    }

    pub fn write_params(&mut self, src: &mut impl Iterator<Item = f64>) {
        for l in &mut self.hidden {
            l.write_params(src);
        }
        self.output.write_params(src);
    }
}

impl ConditionalDensity for MadeNet {
    fn target_dim(&self) -> usize {
        self.data_dim
    }

    fn context_dim(&self) -> usize {
        self.context_dim
    }

    fn log_prob(&self, target: &[f64], context: &[f64]) -> Result<f64> {
        Ok(MadeNet::log_prob(self, target, context)?.0)
    }

    fn sample(&self, n: usize, context: &[f64], rng: &mut RngStream) -> Result<Matrix> {
        let ctx = if self.context_dim > 0 {
            let mut m = Matrix::zeros(n, self.context_dim);
            for r in 0..n {
                m.row_mut(r).copy_from_slice(context);
            }
            Some(m)
        } else {
            None
        };
        self.sample_n(n, ctx.as_ref(), rng)
    }
}
