//! Sequential neural inference: SNPE-A, SNPE-B, and SNL, plus axis-aligned
//! slice sampling, the MMD two-sample diagnostic, and the MaxVar acquisition
//! rule over a model ensemble.

mod diagnostics;
mod maxvar;
mod mmd;
mod slice;
mod snl;
mod snpe;

pub use diagnostics::neg_log_true_params;
pub use maxvar::{maxvar_acquire, MaxVarSearch};
pub use mmd::{mmd_permutation_threshold, mmd_statistic, mmd_statistic_biased};
pub use slice::slice_sample_axis;
pub use snl::{
    snl_run, snl_run_maxvar, LikelihoodArch, LikelihoodModel, McmcConfig, SnlConfig, SnlPosterior,
    SnlResult,
};
pub use snpe::{snpe_a_run, snpe_b_run, SnpeAResult, SnpeBResult, SnpeConfig};
