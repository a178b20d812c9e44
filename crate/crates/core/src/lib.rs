//! Minimum ℓ2-norm interpolation in high-dimensional linear regression.
//!
//! The crate computes the minimum-norm interpolator `β̂ = X⁺Y` of Gaussian
//! designs with prescribed covariance, evaluates the spectral quantities
//! that control its prediction risk (`k*`, `ρ`, `r*`, `r̄`, `k̄`), and checks
//! the resulting upper and lower risk bounds by seeded Monte Carlo under
//! arbitrary noise, including noise built adversarially from `X`.
//!
//! Modules, bottom-up:
//!
//! * [`spectra`]: covariance spectra, builders and tail sums;
//! * [`diagnostics`]: deterministic complexity quantities and bound values;
//! * [`design`]: design sampling, the SVD-based interpolator, error metrics;
//! * [`noise`]: noise models, from zero to adversarial;
//! * [`experiments`]: trials, aggregation, SNR scans and studies;
//! * [`cli`]: the command-line front end.

pub mod cli;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod noise;
pub mod output;
pub mod rng;
pub mod spectra;

pub use design::{
    deviation_term, estimation_error, min_norm_fit, prediction_error, sample_design,
    smallest_singular_value, DesignMatrix, FitResult, RegressionInstance, ThinSvd,
};
pub use diagnostics::{full_report, Constants, DiagnosticsReport, Extended, Regime};
pub use error::{DesignError, DiagnosticsError, NoiseError, SpectrumError};

pub use experiments::{run_experiment, run_trial, ExperimentConfig, ExperimentResult, TrialRecord};
pub use noise::{conditional_independence_tag, realize_noise, Direction, NoiseModel};
pub use spectra::{CovarianceModel, Spectrum};
