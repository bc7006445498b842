//! Asymptotic covariance of weighted least-squares estimates for
//! single-input multi-output models with spatially correlated noise.
//!
//! Modules are labelled `0..m` and basis functions `0..n`. Conditioning on
//! "the first `j` channels" is always expressed as a count `j`.

// Negated comparisons are deliberate: NaN has to fail the positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod miso;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod optimal;
pub mod variance;

pub use basis::{fir_basis, prefiltered_fir_basis, takenaka_malmquist, BasisKind, BasisSet, InputSpectrum, Rational};
pub use error::{Error, Result};
pub use estimation::{sample_covariance, sample_frf_variance, weighted_ls, SampleCovariance, WlsEstimate};
pub use miso::{miso_asvar_module, miso_param_cov, MisoSpec};
pub use model::{simulate, Dataset, ParameterVector, SimoModel};
pub use montecarlo::Execution;
pub use noise::{CholeskyLower, ConditionalGraph, NoiseCovariance};
pub use optimal::{
    conditional_cov_from_upper, optimal_first_row, optimal_first_row_regularized, total_variance, UpperFactor,
};
pub use variance::{
    ascov_frf, asvar_ar_input, asvar_module, chi, covariance_report, param_cov_blocks, variance_increase_predicate,
    CovarianceReport, ParamCovariance, VarianceIncrease,
};
