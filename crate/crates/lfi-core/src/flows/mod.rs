//! Autoregressive neural density estimation: MADE with Gaussian
//! conditionals and the Masked Autoregressive Flow built from stacks of
//! them, in unconditional and conditional forms, with exact log-density,
//! exact sampling, and maximum-likelihood training.

mod made;
mod maf;
pub mod masks;
mod train;

pub use made::{MadeCache, MadeNet};
pub use maf::MafModel;
pub use masks::{build_masks, MadeMasks};
pub use train::{train_mle, TrainConfig, TrainTrace, Trainable};
