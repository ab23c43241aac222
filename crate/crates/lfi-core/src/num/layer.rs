//! Masked affine layers with explicit backward passes.
//!
//! The effective weight is `weight ⊙ mask` at every forward pass, which is
//! how autoregressive structure is enforced downstream. A dense layer is the
//! all-ones-mask special case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::matrix::Matrix;
use crate::num::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine layer whose connectivity is pruned by a binary mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskedLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub mask: Matrix,
    pub activation: Activation,
}

/// Parameter gradients of one layer.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl MaskedLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, mask: Matrix, activation: Activation) -> Self {
        assert_eq!(weight.rows(), mask.rows(), "mask rows must match weight");
        assert_eq!(weight.cols(), mask.cols(), "mask cols must match weight");
        assert_eq!(weight.rows(), bias.len(), "bias length must match out dim");
        debug_assert!(mask.data().iter().all(|&m| m == 0.0 || m == 1.0));
        MaskedLayer {
            weight,
            bias,
            mask,
            activation,
        }
    }

    /// Dense layer: all-ones mask.
    pub fn dense(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Self {
        let mask = Matrix::from_vec(out_dim, in_dim, vec![1.0; out_dim * in_dim]).unwrap();
        let mut layer = MaskedLayer::new(
            Matrix::zeros(out_dim, in_dim),
            vec![0.0; out_dim],
            mask,
            activation,
        );
        layer.init_glorot(rng, 1.0);
        layer
    }

    /// Uniform init in ±√(6/(fan_in+fan_out)), optionally rescaled.
    pub fn init_glorot(&mut self, rng: &mut RngStream, scale: f64) {
        let bound = (6.0 / (self.in_dim() + self.out_dim()) as f64).sqrt() * scale;
        for v in self.weight.data_mut() {
            *v = rng.uniform_in(-bound, bound);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Batched forward pass: one input row per sample.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(input)?.0)
    }

    /// Forward pass that also returns pre-activations for the backward pass.
    pub fn forward_cached(&self, input: &Matrix) -> Result<(Matrix, Matrix)> {
        if input.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: "MaskedLayer::forward",
                expected: format!("{} input columns", self.in_dim()),
                got: format!("{}", input.cols()),
            });
        }
        let n = input.rows();
        let out_dim = self.out_dim();
        let mut pre = Matrix::zeros(n, out_dim);
        for r in 0..n {
            let x = input.row(r);
            for j in 0..out_dim {
                let w = self.weight.row(j);
                let m = self.mask.row(j);
                let mut s = self.bias[j];
                for i in 0..x.len() {
                    s += w[i] * m[i] * x[i];
                }
                pre.set(r, j, s);
            }
        }
        let mut out = pre.clone();
        for v in out.data_mut() {
            *v = self.activation.apply(*v);
        }
        for (i, v) in out.data().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "layer activation",
                    index: i,
                });
            }
        }
        Ok((out, pre))
    }

    /// Reverse-mode pass. `grad_out` is dL/d(output); returns parameter
    /// gradients and dL/d(input). Mask zeros propagate to the weight grads so
    /// pruned connections never move.
    pub fn backward(
        &self,
        input: &Matrix,
        pre: &Matrix,
        grad_out: &Matrix,
    ) -> (LayerGrads, Matrix) {
        let n = input.rows();
        let out_dim = self.out_dim();
        let in_dim = self.in_dim();
        let mut d_weight = Matrix::zeros(out_dim, in_dim);
        let mut d_bias = vec![0.0; out_dim];
        let mut d_input = Matrix::zeros(n, in_dim);
        for r in 0..n {
            let x = input.row(r);
            for j in 0..out_dim {
                let dpre = grad_out.get(r, j) * self.activation.derivative(pre.get(r, j));
                if dpre == 0.0 {
                    continue;
                }
                d_bias[j] += dpre;
                let m = self.mask.row(j);
                let w = self.weight.row(j);
                let dw = d_weight.row_mut(j);
                let dx = d_input.row_mut(r);
                for i in 0..in_dim {
                    if m[i] != 0.0 {
                        dw[i] += dpre * x[i];
                        dx[i] += dpre * w[i];
                    }
                }
            }
        }
        (
            LayerGrads {
                weight: d_weight,
                bias: d_bias,
            },
            d_input,
        )
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    pub fn read_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weight.data());
        out.extend_from_slice(&self.bias);
    }

    pub fn write_params(&mut self, src: &mut impl Iterator<Item = f64>) {
        for v in self.weight.data_mut() {
            *v = src.next().expect("parameter vector too short");
        }
        for b in &mut self.bias {
            *b = src.next().expect("parameter vector too short");
        }
    }

    pub fn read_grads(grads: &LayerGrads, out: &mut Vec<f64>) {
        out.extend_from_slice(grads.weight.data());
        out.extend_from_slice(&grads.bias);
    }
}
