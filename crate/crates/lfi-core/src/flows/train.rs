//! Maximum-likelihood training by minibatch Adam on the negative average
//! log likelihood, with early stopping on a held-out validation split. Used
//! by MADE, MAF, and the mixture-density network alike.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::{adam_step, AdamConfig, AdamState, Matrix, RngStream};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub minibatch: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            minibatch: 100,
            max_epochs: 300,
            patience: 20,
            validation_fraction: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Numeric(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.patience == 0 {
            return Err(Error::Numeric("patience must be at least 1".into()));
        }
        if self.minibatch == 0 {
            return Err(Error::Numeric("minibatch must be at least 1".into()));
        }
        Ok(())
    }
}

/// A model trainable by maximum likelihood: flat parameter access plus
/// weighted batch NLL and its gradient.
pub trait Trainable {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
    fn batch_nll(
        &self,
        targets: &Matrix,
        contexts: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<f64>;
    fn batch_nll_grad(
        &self,
        targets: &Matrix,
        contexts: Option<&Matrix>,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
}

/// Non-finite failures mid-training are divergence, reported with the epoch.
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { what, index } => Error::Training {
            epoch,
            message: format!("non-finite {what} at index {index}"),
        },
        other => other,
    }
}

fn gather_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), m.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

fn gather_weights(w: Option<&[f64]>, idx: &[usize]) -> Option<Vec<f64>> {
    w.map(|w| idx.iter().map(|&i| w[i]).collect())
}

/// Train in place; returns the loss trace. The model is left at the best
/// validation snapshot. `max_epochs == 0` returns the model unchanged.
pub fn train_mle<M: Trainable>(
    model: &mut M,
    data: &Dataset,
    weights: Option<&[f64]>,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<TrainTrace> {
    cfg.validate()?;
    let n = data.len();
    if cfg.max_epochs == 0 {
        return Ok(TrainTrace::default());
    }
    if n < cfg.minibatch {
        return Err(Error::InsufficientData {
            needed: cfg.minibatch,
            got: n,
        });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Shape {
                context: "train_mle weights",
                expected: format!("{n} weights"),
                got: format!("{}", w.len()),
            });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::DegenerateWeights(
                "weights must be finite and ≥ 0".into(),
            ));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::DegenerateWeights(
                "all training weights are zero".into(),
            ));
        }
    }

    // Validation split: the last fraction of a seeded shuffle.
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (train_idx, val_idx) = idx.split_at(n - n_val);
    let train_idx = train_idx.to_vec();
    let val_targets = gather_rows(&data.targets, val_idx);
    let val_ctx = data.contexts.as_ref().map(|c| gather_rows(c, val_idx));
    let val_w = gather_weights(weights, val_idx);

    let mut adam = AdamState::new(model.param_count(), cfg.adam);
    let mut params = model.params();
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut trace = TrainTrace::default();

    let mut order = train_idx.clone();
    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0f64;
        for chunk in order.chunks(cfg.minibatch) {
            let bt = gather_rows(&data.targets, chunk);
            let bc = data.contexts.as_ref().map(|c| gather_rows(c, chunk));
            let bw = gather_weights(weights, chunk);
            model.set_params(&params);
            let (loss, grad) = model
                .batch_nll_grad(&bt, bc.as_ref(), bw.as_deref())
                .map_err(|e| diverged(e, epoch))?;
            let (next, updated) =
                adam_step(&adam, &params, &grad).map_err(|e| diverged(e, epoch))?;
            adam = next;
            params = updated;
            epoch_loss += loss;
            batches += 1.0;
        }
        model.set_params(&params);
        let val_loss = model
            .batch_nll(&val_targets, val_ctx.as_ref(), val_w.as_deref())
            .map_err(|e| diverged(e, epoch))?;
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("validation loss is {val_loss}"),
            });
        }
        trace.train_losses.push(epoch_loss / batches.max(1.0));
        trace.val_losses.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_params.copy_from_slice(&params);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.set_params(&best_params);
    trace.best_epoch = best_epoch;
    Ok(trace)
}

macro_rules! impl_trainable {
    ($ty:ty) => {
        impl Trainable for $ty {
            fn param_count(&self) -> usize {
                <$ty>::param_count(self)
            }
            fn params(&self) -> Vec<f64> {
                let mut out = Vec::with_capacity(<$ty>::param_count(self));
                self.read_params(&mut out);
                out
            }
            fn set_params(&mut self, p: &[f64]) {
                assert_eq!(p.len(), <$ty>::param_count(self));
                self.write_params(&mut p.iter().cloned());
            }
            fn batch_nll(
                &self,
                targets: &Matrix,
                contexts: Option<&Matrix>,
                weights: Option<&[f64]>,
            ) -> Result<f64> {
                self.nll(targets, contexts, weights)
            }
            fn batch_nll_grad(
                &self,
                targets: &Matrix,
                contexts: Option<&Matrix>,
                weights: Option<&[f64]>,
            ) -> Result<(f64, Vec<f64>)> {
                self.nll_grad(targets, contexts, weights)
            }
        }
    };
}

impl_trainable!(crate::flows::made::MadeNet);
impl_trainable!(crate::flows::maf::MafModel);
impl_trainable!(crate::mdn::MdnModel);
