//! Likelihood-free inference toolkit.
//!
//! Density estimation (Gaussian MLE, histograms, KDE, MADE/MAF flows,
//! mixture-density networks), the ABC algorithm family, and the sequential
//! neural inference algorithms SNPE-A, SNPE-B, and SNL, all on a small
//! deterministic numeric core with seeded random streams.

pub mod abc;
pub mod classic;
pub mod dataset;
pub mod density;
pub mod error;
pub mod flows;
pub mod gauss;
pub mod mdn;
pub mod model_io;
pub mod num;
pub mod seq;
pub mod sim;
pub mod trace;

pub use dataset::Dataset;
pub use density::ConditionalDensity;
pub use error::{Error, Result};
pub use gauss::{Gaussian, GaussianMixture};
pub use num::{Matrix, RngStream};
pub use trace::RoundTrace;
