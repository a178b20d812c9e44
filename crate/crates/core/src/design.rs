//! Gaussian designs and the minimum-norm interpolator.
//!
//! The solver works on a thin SVD of the `n × p` design (`U` is `n × n`,
//! `Vᵀ` is `n × p`); nothing `p × p` is ever formed.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::DesignError;
use crate::spectra::CovarianceModel;

/// Default rank cutoff, relative to the largest singular value.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Eigenvalues at or below this fraction of `λ_1` count as zero when
/// checking that `rank(Σ) ≥ n`.
pub const COVARIANCE_RANK_TOL: f64 = 1e-12;

/// An `n × p` design with rows `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
}

impl DesignMatrix {
    /// Requires `p ≥ n` unless `allow_low_dim` is set.
    pub fn new(entries: DMatrix<f64>, allow_low_dim: bool) -> Result<Self, DesignError> {
        let (n, p) = entries.shape();
        if n == 0 || p == 0 {
            return Err(DesignError::DimensionMismatch("design must be non-empty".into()));
        }
        if p < n && !allow_low_dim {
            return Err(DesignError::LowDimensional { n, p });
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[&[f64]], allow_low_dim: bool) -> Result<Self, DesignError> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(DesignError::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(n, p, &flat), allow_low_dim)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    /// Dump format: header `n p`, then one whitespace-separated row per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<(), DesignError> {
        writeln!(w, "{} {}", self.n(), self.p())?;
        for i in 0..self.n() {
            let row: Vec<String> =
                (0..self.p()).map(|j| crate::output::fmt_f64(self.entries[(i, j)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R, allow_low_dim: bool) -> Result<Self, DesignError> {
        let mut tokens = Vec::new();
        let mut header: Option<(usize, usize)> = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if header.is_none() {
                let dims: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| DesignError::Format(format!("bad header {line:?}"))))
                    .collect::<Result<_, _>>()?;
                if dims.len() != 2 {
                    return Err(DesignError::Format(format!("bad header {line:?}")));
                }
                header = Some((dims[0], dims[1]));
                continue;
            }
            for t in line.split_whitespace() {
                tokens.push(t.parse::<f64>().map_err(|_| DesignError::Format(format!("bad entry {t:?}")))?);
            }
        }
        let (n, p) = header.ok_or_else(|| DesignError::Format("missing header".into()))?;
        if tokens.len() != n * p {
            return Err(DesignError::Format(format!("expected {} entries, found {}", n * p, tokens.len())));
        }
        Self::new(DMatrix::from_row_slice(n, p, &tokens), allow_low_dim)
    }
}

/// One sampled problem `Y = Xβ* + ξ`.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub design: DesignMatrix,
    pub targets: DVector<f64>,
    pub beta_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub covariance: Arc<CovarianceModel>,
    pub seed: u64,
}

impl RegressionInstance {
    pub fn new(
        design: DesignMatrix,
        beta_star: DVector<f64>,
        noise: DVector<f64>,
        covariance: Arc<CovarianceModel>,
        seed: u64,
    ) -> Result<Self, DesignError> {
        if beta_star.len() != design.p() || noise.len() != design.n() {
            return Err(DesignError::DimensionMismatch(format!(
                "design is {}x{}, β* has {} entries, ξ has {}",
                design.n(),
                design.p(),
                beta_star.len(),
                noise.len()
            )));
        }
        let targets = design.mul_vec(&beta_star) + &noise;
        Ok(Self { design, targets, beta_star, noise, covariance, seed })
    }
}

/// Draws `n` i.i.d. `N(0, Σ)` rows as `G Λ^{1/2}` (times `Qᵀ` when `Σ`
/// has an eigenbasis). Entries of `G` are drawn row by row.
pub fn sample_design<R: Rng + ?Sized>(
    cov: &CovarianceModel,
    n: usize,
    rng: &mut R,
    allow_low_dim: bool,
) -> Result<DesignMatrix, DesignError> {
    let s = cov.spectrum();
    let p = s.len();
    if n == 0 {
        return Err(DesignError::DimensionMismatch("n must be at least 1".into()));
    }
    if !allow_low_dim {
        let rank = s.numerical_rank(COVARIANCE_RANK_TOL);
        if rank < n {
            return Err(DesignError::RankDeficient { rank, n });
        }
    }
    let scales: Vec<f64> = s.values().iter().map(|l| l.sqrt()).collect();
    let mut flat = Vec::with_capacity(n * p);
    for _ in 0..n {
        for scale in &scales {
            let g: f64 = rng.sample(StandardNormal);
            flat.push(g * scale);
        }
    }
    let mut entries = DMatrix::from_row_slice(n, p, &flat);
    if let Some(q) = cov.rotation() {
        entries = entries * q.transpose();
    }
    DesignMatrix::new(entries, allow_low_dim)
}

/// Thin SVD `X = U diag(σ) Vᵀ` with singular values non-increasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v_t: DMatrix<f64>,
}

/// Largest accepted `‖X − U diag(σ) Vᵀ‖_F / ‖X‖_F`.
/// Relative reconstruction error accepted without trying another route.
const RECONSTRUCTION_GOOD: f64 = 1e-12;
/// Largest relative reconstruction error accepted at all. Sound wide
/// Gaussian designs land around 5e-11; the failures this guards against
/// sit near 1e-5.
const RECONSTRUCTION_TOL: f64 = 1e-9;

impl ThinSvd {
    /// Decomposes `X`, checking `U diag(σ) Vᵀ` against `X`.
    ///
    /// The implicit-shift iteration occasionally stops on an inaccurate
    /// factorization (relative error around 1e-5) for particular
    /// convergence thresholds. When the check is not clean the
    /// decomposition is recomputed through `Xᵀ = QR` and an SVD of the
    /// square factor, then through `Xᵀ` directly, and the most accurate
    /// candidate is kept.
    pub fn of(design: &DesignMatrix) -> Result<Self, DesignError> {
        let x = &design.entries;
        let eps = 5.0 * f64::EPSILON;
        let routes: [&dyn Fn() -> Option<Self>; 3] = [
            &|| Self::direct(x.clone(), eps),
            &|| Self::via_qr(x, eps),
            &|| Self::direct(x.transpose(), eps).map(Self::transposed),
        ];
        let mut best: Option<(f64, Self)> = None;
        for (i, route) in routes.iter().enumerate() {
            let Some(svd) = route() else { continue };
            let err = svd.reconstruction_error(x);
            if err <= RECONSTRUCTION_GOOD {
                return Ok(svd);
            }
            log::debug!("SVD route {i}: reconstruction error {err:e}");
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, svd));
            }
        }
        match best {
            Some((err, svd)) if err <= RECONSTRUCTION_TOL => Ok(svd),
            _ => Err(DesignError::Decomposition),
        }
    }

    fn direct(m: DMatrix<f64>, eps: f64) -> Option<Self> {
        let svd = SVD::try_new(m, true, true, eps, 0)?;
        Some(Self { u: svd.u?, singular_values: svd.singular_values, v_t: svd.v_t? })
    }

    /// `Xᵀ = QR`, `Rᵀ = U S Wᵀ`, so `X = U S (QW)ᵀ`. Needs `p ≥ n`.
    fn via_qr(x: &DMatrix<f64>, eps: f64) -> Option<Self> {
        if x.ncols() < x.nrows() {
            return None;
        }
        let qr = x.transpose().qr();
        let small = Self::direct(qr.r().transpose(), eps)?;
        let v_t = &small.v_t * qr.q().transpose();
        Some(Self { u: small.u, singular_values: small.singular_values, v_t })
    }

    fn transposed(self) -> Self {
        Self { u: self.v_t.transpose(), singular_values: self.singular_values, v_t: self.u.transpose() }
    }

    fn reconstruction_error(&self, x: &DMatrix<f64>) -> f64 {
        let mut scaled = self.u.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(self.singular_values.iter()) {
            col *= *s;
        }
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (scaled * &self.v_t - x).norm() / norm
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// Left singular vectors, one per column.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Right singular vectors, one per row.
    pub fn v_t(&self) -> &DMatrix<f64> {
        &self.v_t
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.singular_values.max();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// `X⁺ y` restricted to the leading `rank` singular triplets.
    pub fn pinv_apply(&self, y: &DVector<f64>, rank: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.v_t.ncols());
        for k in 0..rank {
            let coef = self.u.column(k).dot(y) / self.singular_values[k];
            out.axpy(coef, &self.v_t.row(k).transpose(), 1.0);
        }
        out
    }

    /// Projection of `v` onto the row space spanned by the leading
    /// `rank` right singular vectors.
    pub fn project_row_space(&self, v: &DVector<f64>, rank: usize) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for k in 0..rank {
            let row = self.v_t.row(k).transpose();
            out.axpy(row.dot(v), &row, 1.0);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub rank: usize,
    /// Smallest singular value kept by the rank cutoff.
    pub sigma_min: f64,
    pub residual_norm: f64,
}

impl FitResult {
    pub fn interpolates(&self, n: usize) -> bool {
        self.rank == n
    }
}

/// `β̂ = X⁺Y`, singular values below `rel_tol · σ_max` treated as zero.
/// A rank below `n` is reported through `rank` and `residual_norm`.
pub fn min_norm_fit(design: &DesignMatrix, targets: &DVector<f64>, rel_tol: f64) -> Result<FitResult, DesignError> {
    let svd = ThinSvd::of(design)?;
    fit_with_svd(design, &svd, targets, rel_tol)
}

pub fn fit_with_svd(
    design: &DesignMatrix,
    svd: &ThinSvd,
    targets: &DVector<f64>,
    rel_tol: f64,
) -> Result<FitResult, DesignError> {
    if targets.len() != design.n() {
        return Err(DesignError::DimensionMismatch(format!(
            "{} targets for {} rows",
            targets.len(),
            design.n()
        )));
    }
    let rank = svd.rank(rel_tol);
    let beta_hat = svd.pinv_apply(targets, rank);
    let residual_norm = (design.mul_vec(&beta_hat) - targets).norm();
    let sigma_min = if rank == 0 { 0.0 } else { svd.singular_values[rank - 1] };
    if rank < design.n() {
        log::debug!("design has rank {rank} < n = {}; β̂ does not interpolate", design.n());
    }
    Ok(FitResult { beta_hat, rank, sigma_min, residual_norm })
}

/// `σ_n(X)`: the `min(n, p)`-th singular value.
pub fn smallest_singular_value(design: &DesignMatrix) -> Result<f64, DesignError> {
    let svd = ThinSvd::of(design)?;
    Ok(svd.singular_values.min())
}

fn check_len(a: &DVector<f64>, b: &DVector<f64>) -> Result<(), DesignError> {
    if a.len() != b.len() {
        return Err(DesignError::DimensionMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

/// `ΔᵀΣΔ` with `Δ = β̂ − β*`, evaluated as `Σ λ_i (QᵀΔ)_i²`.
pub fn prediction_error(cov: &CovarianceModel, beta_hat: &DVector<f64>, beta_star: &DVector<f64>) -> Result<f64, DesignError> {
    check_len(beta_hat, beta_star)?;
    if beta_hat.len() != cov.dim() {
        return Err(DesignError::DimensionMismatch(format!(
            "vectors have {} entries, Σ is {}x{}",
            beta_hat.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let delta = beta_hat - beta_star;
    Ok(quadratic_form(cov, &delta))
}

pub(crate) fn quadratic_form(cov: &CovarianceModel, delta: &DVector<f64>) -> f64 {
    let coords = match cov.rotation() {
        Some(q) => q.tr_mul(delta),
        None => delta.clone(),
    };
    cov.spectrum().values().iter().zip(coords.iter()).map(|(l, c)| l * c * c).sum()
}

/// `‖β̂ − β*‖²`.
pub fn estimation_error(beta_hat: &DVector<f64>, beta_star: &DVector<f64>) -> Result<f64, DesignError> {
    check_len(beta_hat, beta_star)?;
    Ok((beta_hat - beta_star).norm_squared())
}

/// `(1/n) Σ ⟨X_i, Δ⟩² − ΔᵀΣΔ`.
pub fn deviation_term(
    design: &DesignMatrix,
    cov: &CovarianceModel,
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
) -> Result<f64, DesignError> {
    check_len(beta_hat, beta_star)?;
    if beta_hat.len() != design.p() || design.p() != cov.dim() {
        return Err(DesignError::DimensionMismatch("design, Σ and vectors disagree on p".into()));
    }
    let delta = beta_hat - beta_star;
    let empirical = design.mul_vec(&delta).norm_squared() / design.n() as f64;
    Ok(empirical - quadratic_form(cov, &delta))
}
