//! Versioned experiment configuration.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "spectrum": {"kind": "exp_floor", "p": 300, "tau": 20.0, "eps": 1e-4},
//!   "n": 100,
//!   "beta_star": {"norm": 1.0, "direction": "e1"},
//!   "noise": {"type": "gaussian", "sigma": 0.1},
//!   "trials": 200,
//!   "seed": 7
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::{COVARIANCE_RANK_TOL, DEFAULT_REL_TOL};
use crate::diagnostics::{k_star, Constants, Extended};
use crate::noise::NoiseModel;
use crate::rng::{trial_rng, Stream, SHARED_TRIAL};
use crate::spectra::{CovarianceModel, SpectrumSpec};

use super::ExperimentError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Identity,
    Certificate,
    EstimationBound,
    UpperBound,
    LowerBound,
}

impl Check {
    pub const ALL: [Check; 5] =
        [Check::Identity, Check::Certificate, Check::EstimationBound, Check::UpperBound, Check::LowerBound];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaDirection {
    /// First standard basis vector.
    #[default]
    E1,
    /// Uniform on the sphere, drawn once per experiment from the seed.
    Random,
    /// Eigenvector of the largest eigenvalue.
    Top,
}

/// `β*` as an explicit vector, or as a norm plus a direction rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    #[serde(default)]
    pub norm: Option<f64>,
    #[serde(default)]
    pub direction: BetaDirection,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl Default for BetaSpec {
    fn default() -> Self {
        Self { norm: Some(1.0), direction: BetaDirection::E1, values: None }
    }
}

impl BetaSpec {
    pub fn with_norm(norm: f64, direction: BetaDirection) -> Self {
        Self { norm: Some(norm), direction, values: None }
    }

    fn problems(&self, p: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        match (&self.norm, &self.values) {
            (Some(_), Some(_)) => out.push("beta_star: give either norm or values, not both".into()),
            (None, None) => out.push("beta_star: needs norm or values".into()),
            (Some(norm), None) if !(*norm >= 0.0 && norm.is_finite()) => {
                out.push(format!("beta_star.norm must be finite and non-negative, got {norm}"))
            }
            (None, Some(values)) => {
                if let Some(p) = p {
                    if values.len() != p {
                        out.push(format!("beta_star.values has {} entries, p = {p}", values.len()));
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push("beta_star.values has non-finite entries".into());
                }
            }
            _ => {}
        }
        out
    }

    pub fn build(&self, cov: &CovarianceModel, seed: u64) -> DVector<f64> {
        let p = cov.dim();
        if let Some(values) = &self.values {
            return DVector::from_column_slice(values);
        }
        let norm = self.norm.unwrap_or(0.0);
        let unit = match self.direction {
            BetaDirection::E1 => unit_e1(p),
            BetaDirection::Top => match cov.rotation() {
                Some(q) => q.column(0).into_owned(),
                None => unit_e1(p),
            },
            BetaDirection::Random => {
                let mut rng = trial_rng(seed, SHARED_TRIAL, Stream::BetaDirection);
                let g = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
                let len = g.norm();
                g / len
            }
        };
        unit * norm
    }
}

fn unit_e1(p: usize) -> DVector<f64> {
    let mut v = DVector::zeros(p);
    v[0] = 1.0;
    v
}

fn default_checks() -> BTreeSet<Check> {
    Check::ALL.into_iter().collect()
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

/// Everything a run depends on. Serializing it back yields a config that
/// reproduces the run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub spectrum: SpectrumSpec,
    /// Seed of a Haar-random eigenbasis; `None` keeps `Σ` diagonal.
    #[serde(default)]
    pub rotation_seed: Option<u64>,
    pub n: usize,
    #[serde(default)]
    pub beta_star: BetaSpec,
    pub noise: NoiseModel,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default = "default_checks")]
    pub checks: BTreeSet<Check>,
    /// Permits `p < n` and rank-deficient covariances (oracle tests only).
    #[serde(default)]
    pub allow_low_dim: bool,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

impl ExperimentConfig {
    pub fn new(spectrum: SpectrumSpec, n: usize, noise: NoiseModel, trials: usize, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            spectrum,
            rotation_seed: None,
            n,
            beta_star: BetaSpec::default(),
            noise,
            trials,
            seed,
            constants: Constants::default(),
            checks: default_checks(),
            allow_low_dim: false,
            rel_tol: DEFAULT_REL_TOL,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(vec![e.to_string()]))
    }

    pub fn check_enabled(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }

    /// Every problem with the config, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema != SCHEMA_VERSION {
            out.push(format!("schema must be {SCHEMA_VERSION}, got {}", self.schema));
        }
        if self.n == 0 {
            out.push("n must be at least 1".into());
        }
        if self.trials == 0 {
            out.push("trials must be at least 1".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            out.push(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if let Err(e) = self.constants.validate() {
            out.push(format!("constants: {e}"));
        }
        let mut p = None;
        match self.spectrum.build() {
            Ok(loaded) => {
                let s = loaded.spectrum;
                p = Some(s.len());
                if !self.allow_low_dim && self.n > 0 {
                    if s.len() < self.n {
                        out.push(format!("p = {} < n = {} (set allow_low_dim to override)", s.len(), self.n));
                    } else if s.numerical_rank(COVARIANCE_RANK_TOL) < self.n {
                        out.push(format!(
                            "spectrum rank {} < n = {}",
                            s.numerical_rank(COVARIANCE_RANK_TOL),
                            self.n
                        ));
                    }
                }
            }
            Err(e) => out.push(format!("spectrum: {e}")),
        }
        out.extend(self.beta_star.problems(p));
        match self.noise.resolve() {
            Ok(noise) => {
                if let Err(e) = noise.validate(self.n) {
                    out.push(format!("noise: {e}"));
                }
            }
            Err(e) => out.push(format!("noise: {e}")),
        }
        out
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Config(problems))
        }
    }

    /// Resolves files and derived quantities shared by every trial.
    pub fn prepare(&self) -> Result<Prepared, ExperimentError> {
        self.validate()?;
        let loaded = self.spectrum.build()?;
        let spectrum = loaded.spectrum;
        let cov = match self.rotation_seed {
            Some(seed) => {
                let mut rng = trial_rng(seed, SHARED_TRIAL, Stream::Rotation);
                CovarianceModel::with_random_rotation(spectrum, &mut rng)?
            }
            None => CovarianceModel::diagonal(spectrum),
        };
        let beta_star = self.beta_star.build(&cov, self.seed);
        let ks = k_star(cov.spectrum(), self.n, self.constants.c0);
        let r_kstar = ks.finite().map(|k| cov.spectrum().tail_from(k)).filter(|&r| r > 0.0);
        Ok(Prepared {
            config: self.clone(),
            noise: self.noise.resolve()?,
            cov: Arc::new(cov),
            beta_star,
            k_star: ks,
            r_kstar,
        })
    }
}

/// A validated config with its covariance, `β*` and `r_{k*}` in hand.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    /// Noise model with file-backed vectors loaded.
    pub noise: NoiseModel,
    pub cov: Arc<CovarianceModel>,
    pub beta_star: DVector<f64>,
    pub k_star: Extended<usize>,
    pub r_kstar: Option<f64>,
}
