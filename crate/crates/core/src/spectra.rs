//! Covariance spectra.
//!
//! A [`Spectrum`] is a non-increasing sequence of eigenvalues
//! `λ_1 ≥ … ≥ λ_p ≥ 0`. All formulas and public indices are 1-based:
//! `tail_sum(k)` is `λ_k + … + λ_p`. Tail sums are precomputed once with
//! compensated summation, accumulated from the smallest eigenvalue upward.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SpectrumError;

/// Eigenvalues of a covariance matrix, sorted non-increasing.
#[derive(Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    // tails[k] = sum of values[k..], length p + 1 (tails[p] = 0).
    tails: Vec<f64>,
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum")
            .field("p", &self.len())
            .field("values", &self.values)
            .finish()
    }
}

impl Spectrum {
    /// Validates and wraps a sequence that must already be non-increasing.
    pub fn new(values: Vec<f64>) -> Result<Self, SpectrumError> {
        if values.is_empty() {
            return Err(SpectrumError::Empty);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SpectrumError::NotFinite { index: i + 1 });
            }
            if v < 0.0 {
                return Err(SpectrumError::Negative { index: i + 1, value: v });
            }
        }
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(SpectrumError::NotSorted { index: i + 1 });
        }
        if values[0] <= 0.0 {
            return Err(SpectrumError::AllZero);
        }
        let tails = suffix_sums(&values);
        Ok(Self { values, tails })
    }

    /// Sorts into non-increasing order first. The flag reports whether
    /// the input had to be reordered.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<(Self, bool), SpectrumError> {
        if values.iter().any(|v| v.is_nan()) {
            let index = values.iter().position(|v| v.is_nan()).unwrap_or(0);
            return Err(SpectrumError::NotFinite { index: index + 1 });
        }
        let reordered = values.windows(2).any(|w| w[0] < w[1]);
        if reordered {
            values.sort_by(|a, b| b.total_cmp(a));
        }
        Ok((Self::new(values)?, reordered))
    }

    /// Number of eigenvalues `p`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `λ_k` for 1-based `k`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn trace(&self) -> f64 {
        self.tails[0]
    }

    /// `r_k = Σ_{i=k}^{p} λ_i` for 1-based `1 ≤ k ≤ p`.
    pub fn tail_sum(&self, k: usize) -> Result<f64, SpectrumError> {
        if k == 0 || k > self.len() {
            return Err(SpectrumError::IndexOutOfRange { k, p: self.len() });
        }
        Ok(self.tails[k - 1])
    }

    /// Like [`tail_sum`](Self::tail_sum) but also accepts `k = p + 1`,
    /// which yields 0.
    pub(crate) fn tail_from(&self, k: usize) -> f64 {
        self.tails[k - 1]
    }

    /// Number of eigenvalues strictly above `rel_tol · λ_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.values[0];
        self.values.iter().take_while(|&&v| v > cutoff).count()
    }

    /// Multiplies every eigenvalue by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SpectrumError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(SpectrumError::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }

    /// Spectrum file format: one value per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.values {
            out.push_str(&crate::output::fmt_f64(*v));
            out.push('\n');
        }
        out
    }
}

/// Neumaier-compensated suffix sums, from the tail toward the head.
fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let p = values.len();
    let mut tails = vec![0.0; p + 1];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in (0..p).rev() {
        let v = values[k];
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        tails[k] = sum + comp;
    }
    tails
}

/// `p` copies of `value`.
pub fn make_flat_spectrum(p: usize, value: f64) -> Result<Spectrum, SpectrumError> {
    if p == 0 {
        return Err(SpectrumError::InvalidParameter("p must be at least 1".into()));
    }
    if !(value > 0.0 && value.is_finite()) {
        return Err(SpectrumError::InvalidParameter(format!(
            "flat value must be positive, got {value}"
        )));
    }
    Spectrum::new(vec![value; p])
}

/// `λ_k = exp(-k/τ) + ε` for `k = 1..=p`.
pub fn make_exp_floor_spectrum(p: usize, tau: f64, eps: f64) -> Result<Spectrum, SpectrumError> {
    if p == 0 {
        return Err(SpectrumError::InvalidParameter("p must be at least 1".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(SpectrumError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SpectrumError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let values = (1..=p).map(|k| (-(k as f64) / tau).exp() + eps).collect();
    Spectrum::new(values)
}

/// Three plateaus: 1 on `i < k1`, `eps1` on `k1 ≤ i < k2`, `eps2` on
/// `i ≥ k2`, where `k2 = k1 + c_times_n + 1`.
pub fn make_three_level_spectrum(
    k1: usize,
    c_times_n: usize,
    p: usize,
    eps1: f64,
    eps2: f64,
) -> Result<Spectrum, SpectrumError> {
    if k1 == 0 || c_times_n == 0 {
        return Err(SpectrumError::InvalidParameter(
            "k1 and c_times_n must be at least 1".into(),
        ));
    }
    let k2 = k1 + c_times_n + 1;
    if p < k2 {
        return Err(SpectrumError::InvalidParameter(format!(
            "p = {p} is smaller than k1 + c_times_n + 1 = {k2}"
        )));
    }
    if !(eps2 > 0.0 && eps2 <= eps1 && eps1 <= 1.0) {
        return Err(SpectrumError::InvalidParameter(format!(
            "need 1 >= eps1 >= eps2 > 0, got eps1 = {eps1}, eps2 = {eps2}"
        )));
    }
    let values = (1..=p)
        .map(|i| {
            if i < k1 {
                1.0
            } else if i < k2 {
                eps1
            } else {
                eps2
            }
        })
        .collect();
    Spectrum::new(values)
}

/// Result of parsing a spectrum file.
#[derive(Debug, Clone)]
pub struct LoadedSpectrum {
    pub spectrum: Spectrum,
    /// Set when the input was not already non-increasing.
    pub reordered: bool,
}

/// Parses newline- or comma-separated decimals. Lines starting with `#`
/// are comments. Unsorted input is sorted and flagged.
pub fn parse_spectrum(text: &str) -> Result<LoadedSpectrum, SpectrumError> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for token in line.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let v: f64 = token.parse().map_err(|_| SpectrumError::Parse {
                line: lineno + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(SpectrumError::NotFinite { index: values.len() + 1 });
            }
            if v < 0.0 {
                return Err(SpectrumError::Negative { index: values.len() + 1, value: v });
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(SpectrumError::Empty);
    }
    let (spectrum, reordered) = Spectrum::from_unsorted(values)?;
    if reordered {
        log::warn!("spectrum input was not non-increasing; sorted it");
    }
    Ok(LoadedSpectrum { spectrum, reordered })
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<LoadedSpectrum, SpectrumError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpectrumError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spectrum(&text)
}

/// Builder recipe for a spectrum, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    Flat {
        p: usize,
        #[serde(default = "one")]
        value: f64,
    },
    ExpFloor {
        p: usize,
        tau: f64,
        eps: f64,
    },
    ThreeLevel {
        k1: usize,
        c_times_n: usize,
        p: usize,
        eps1: f64,
        eps2: f64,
    },
    Values {
        values: Vec<f64>,
    },
    File {
        path: String,
    },
}

fn one() -> f64 {
    1.0
}

impl SpectrumSpec {
    pub fn build(&self) -> Result<LoadedSpectrum, SpectrumError> {
        let plain = |spectrum| LoadedSpectrum { spectrum, reordered: false };
        match self {
            SpectrumSpec::Flat { p, value } => make_flat_spectrum(*p, *value).map(plain),
            SpectrumSpec::ExpFloor { p, tau, eps } => {
                make_exp_floor_spectrum(*p, *tau, *eps).map(plain)
            }
            SpectrumSpec::ThreeLevel { k1, c_times_n, p, eps1, eps2 } => {
                make_three_level_spectrum(*k1, *c_times_n, *p, *eps1, *eps2).map(plain)
            }
            SpectrumSpec::Values { values } => {
                let (spectrum, reordered) = Spectrum::from_unsorted(values.clone())?;
                Ok(LoadedSpectrum { spectrum, reordered })
            }
            SpectrumSpec::File { path } => load_spectrum(path),
        }
    }
}

/// Covariance `Σ = Q diag(λ) Qᵀ`. Without a rotation, `Σ` is diagonal.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    spectrum: Spectrum,
    rotation: Option<DMatrix<f64>>,
}

const ORTHOGONALITY_TOL: f64 = 1e-10;

impl CovarianceModel {
    pub fn diagonal(spectrum: Spectrum) -> Self {
        Self { spectrum, rotation: None }
    }

    /// `rotation` holds the eigenvectors as columns, in spectrum order.
    pub fn rotated(spectrum: Spectrum, rotation: DMatrix<f64>) -> Result<Self, SpectrumError> {
        let p = spectrum.len();
        if rotation.nrows() != p || rotation.ncols() != p {
            return Err(SpectrumError::InvalidParameter(format!(
                "rotation must be {p}x{p}, got {}x{}",
                rotation.nrows(),
                rotation.ncols()
            )));
        }
        let gram = rotation.transpose() * &rotation;
        let deviation = (gram - DMatrix::<f64>::identity(p, p)).amax();
        if deviation > ORTHOGONALITY_TOL {
            return Err(SpectrumError::NotOrthogonal { deviation });
        }
        Ok(Self { spectrum, rotation: Some(rotation) })
    }

    /// Haar-distributed eigenbasis drawn from `rng` (QR of a Gaussian
    /// matrix with sign correction). Costs O(p³).
    pub fn with_random_rotation<R: rand::Rng + ?Sized>(
        spectrum: Spectrum,
        rng: &mut R,
    ) -> Result<Self, SpectrumError> {
        let p = spectrum.len();
        let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..p {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::rotated(spectrum, q)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    /// Dense `Σ`. Only meant for small `p`.
    pub fn dense(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            self.spectrum.values(),
        ));
        match &self.rotation {
            None => lambda,
            Some(q) => q * lambda * q.transpose(),
        }
    }
}
