//! Noise vectors `ξ`, from benign to adversarial.
//!
//! The upper bounds hold for any `ξ`, including noise built from the
//! design itself; the lower bound needs the rows of `X` to stay
//! `N(0, Σ)` given `ξ`. [`conditional_independence_tag`] records which
//! models satisfy that.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, ThinSvd};
use crate::error::NoiseError;

/// A vector given inline or as a path to a spectrum-style text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    File { path: String },
}

impl VectorSource {
    pub fn inline(&self) -> Option<&[f64]> {
        match self {
            VectorSource::Inline(v) => Some(v),
            VectorSource::File { .. } => None,
        }
    }

    /// Reads a file-backed vector. The file may hold numbers separated by
    /// commas or newlines, with `#` comment lines. Order is preserved.
    pub fn resolve(&self) -> Result<VectorSource, NoiseError> {
        match self {
            VectorSource::Inline(_) => Ok(self.clone()),
            VectorSource::File { path } => {
                let err = |message: String| NoiseError::File { path: path.clone(), message };
                let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
                let mut values = Vec::new();
                for line in text.lines().map(str::trim) {
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                        let v: f64 = tok.parse().map_err(|_| err(format!("cannot parse {tok:?}")))?;
                        values.push(v);
                    }
                }
                Ok(VectorSource::Inline(values))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Left singular vector of `X` for `σ_n(X)`: maximizes `‖X⁺ξ‖` at
    /// fixed `‖ξ‖`.
    WorstSingular,
    FirstCoordinate,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Zero,
    Gaussian { sigma: f64 },
    StudentT { df: f64, scale: f64 },
    Deterministic { values: VectorSource },
    ScaledDirection { target_norm: f64, direction: Direction },
    /// `ξ_i = f_i − ⟨X_i, β*⟩`, so that `Y = f`.
    ModelResidual { f_values: VectorSource },
}

impl NoiseModel {
    pub fn validate(&self, n: usize) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidParameter(m));
        match self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("gaussian sigma must be positive, got {sigma}"))
            }
            NoiseModel::StudentT { df, .. } if !(*df > 0.0 && df.is_finite()) => {
                bad(format!("student_t df must be positive, got {df}"))
            }
            NoiseModel::StudentT { scale, .. } if !(*scale > 0.0 && scale.is_finite()) => {
                bad(format!("student_t scale must be positive, got {scale}"))
            }
            NoiseModel::ScaledDirection { target_norm, .. }
                if !(*target_norm >= 0.0 && target_norm.is_finite()) =>
            {
                bad(format!("target_norm must be non-negative, got {target_norm}"))
            }
            NoiseModel::Deterministic { values: v } | NoiseModel::ModelResidual { f_values: v } => {
                match v.inline() {
                    Some(vals) if vals.len() != n => Err(NoiseError::DimensionMismatch(format!(
                        "noise vector has {} entries, n = {n}",
                        vals.len()
                    ))),
                    Some(vals) if vals.iter().any(|x| !x.is_finite()) => {
                        bad("noise vector has non-finite entries".into())
                    }
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Loads file-backed vectors.
    pub fn resolve(&self) -> Result<NoiseModel, NoiseError> {
        Ok(match self {
            NoiseModel::Deterministic { values } => NoiseModel::Deterministic { values: values.resolve()? },
            NoiseModel::ModelResidual { f_values } => {
                NoiseModel::ModelResidual { f_values: f_values.resolve()? }
            }
            other => other.clone(),
        })
    }

    /// `‖ξ‖` when it does not depend on the draw.
    pub fn fixed_norm(&self) -> Option<f64> {
        match self {
            NoiseModel::Zero => Some(0.0),
            NoiseModel::Deterministic { values } => {
                values.inline().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            }
            NoiseModel::ScaledDirection { target_norm, .. } => Some(*target_norm),
            _ => None,
        }
    }

    /// `E‖ξ‖²` for `n` observations, where it is defined and free of `β*`.
    pub fn expected_norm_sq(&self, n: usize) -> Result<f64, NoiseError> {
        let nf = n as f64;
        match self {
            NoiseModel::Zero => Err(NoiseError::InvalidParameter("SNR undefined for zero noise".into())),
            NoiseModel::Gaussian { sigma } => Ok(nf * sigma * sigma),
            NoiseModel::StudentT { df, scale } if *df > 2.0 => Ok(nf * scale * scale * df / (df - 2.0)),
            NoiseModel::StudentT { df, .. } => Err(NoiseError::InvalidParameter(format!(
                "Student-t with df = {df} has infinite variance; SNR rescaling undefined"
            ))),
            NoiseModel::ModelResidual { .. } => Err(NoiseError::InvalidParameter(
                "model-residual noise depends on β*; SNR rescaling undefined".into(),
            )),
            NoiseModel::Deterministic { .. } | NoiseModel::ScaledDirection { .. } => {
                let norm = self.fixed_norm().ok_or_else(|| {
                    NoiseError::InvalidParameter("unresolved noise file".into())
                })?;
                if norm == 0.0 {
                    Err(NoiseError::InvalidParameter("SNR undefined for zero noise".into()))
                } else {
                    Ok(norm * norm)
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            NoiseModel::Zero => "zero".into(),
            NoiseModel::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            NoiseModel::StudentT { df, scale } => format!("student_t(df={df}, scale={scale})"),
            NoiseModel::Deterministic { .. } => "deterministic".into(),
            NoiseModel::ScaledDirection { target_norm, direction } => match direction {
                Direction::WorstSingular => format!(
                    "adversarial worst_singular(norm={target_norm}): constructed adversary along the \
                     left singular vector of sigma_n(X)"
                ),
                Direction::FirstCoordinate => format!("first_coordinate(norm={target_norm})"),
                Direction::Uniform => format!("uniform(norm={target_norm})"),
            },
            NoiseModel::ModelResidual { .. } => "model_residual".into(),
        }
    }
}

/// Whether the rows of `X` stay i.i.d. `N(0, Σ)` conditionally on `ξ`.
pub fn conditional_independence_tag(model: &NoiseModel) -> bool {
    match model {
        NoiseModel::Zero
        | NoiseModel::Gaussian { .. }
        | NoiseModel::StudentT { .. }
        | NoiseModel::Deterministic { .. } => true,
        NoiseModel::ScaledDirection { direction, .. } => *direction != Direction::WorstSingular,
        NoiseModel::ModelResidual { .. } => false,
    }
}

pub fn realize_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    design: &DesignMatrix,
    beta_star: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>, NoiseError> {
    let svd = match model {
        NoiseModel::ScaledDirection { direction: Direction::WorstSingular, .. } => Some(ThinSvd::of(design)?),
        _ => None,
    };
    realize_noise_with(model, design, svd.as_ref(), beta_star, rng)
}

/// Same as [`realize_noise`], reusing a decomposition of `design` when
/// the adversarial direction needs one.
pub fn realize_noise_with<R: Rng + ?Sized>(
    model: &NoiseModel,
    design: &DesignMatrix,
    svd: Option<&ThinSvd>,
    beta_star: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>, NoiseError> {
    let n = design.n();
    if beta_star.len() != design.p() {
        return Err(NoiseError::DimensionMismatch(format!(
            "β* has {} entries, design has p = {}",
            beta_star.len(),
            design.p()
        )));
    }
    model.validate(n)?;
    let unresolved = || NoiseError::InvalidParameter("noise vector file not resolved".into());
    Ok(match model {
        NoiseModel::Zero => DVector::zeros(n),
        NoiseModel::Gaussian { sigma } => {
            let dist = Normal::new(0.0, *sigma).map_err(|e| NoiseError::InvalidParameter(e.to_string()))?;
            DVector::from_fn(n, |_, _| dist.sample(rng))
        }
        NoiseModel::StudentT { df, scale } => {
            let dist = StudentT::new(*df).map_err(|e| NoiseError::InvalidParameter(e.to_string()))?;
            DVector::from_fn(n, |_, _| scale * dist.sample(rng))
        }
        NoiseModel::Deterministic { values } => {
            DVector::from_column_slice(values.inline().ok_or_else(unresolved)?)
        }
        NoiseModel::ModelResidual { f_values } => {
            let f = DVector::from_column_slice(f_values.inline().ok_or_else(unresolved)?);
            f - design.mul_vec(beta_star)
        }
        NoiseModel::ScaledDirection { target_norm, direction } => match direction {
            Direction::FirstCoordinate => {
                let mut v = DVector::zeros(n);
                v[0] = *target_norm;
                v
            }
            Direction::Uniform => DVector::from_element(n, target_norm / (n as f64).sqrt()),
            Direction::WorstSingular => {
                let owned;
                let svd = match svd {
                    Some(s) => s,
                    None => {
                        owned = ThinSvd::of(design)?;
                        &owned
                    }
                };
                let last = svd.singular_values().len() - 1;
                let u = svd.u().column(last).into_owned();
                let len = u.norm();
                u * (*target_norm / len)
            }
        },
    })
}
