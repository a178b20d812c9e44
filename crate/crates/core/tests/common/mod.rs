//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here calls the closed forms or the SVD route under test.

#![allow(dead_code)]

use minnorm::design::DesignMatrix;
use minnorm::spectra::Spectrum;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Geometric bisection on `[lo, hi]` for the boundary of a monotone
/// predicate, `ok(lo) != ok(hi)`. Returns the end on the `ok` side.
fn bisect(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> (f64, f64) {
    let ok_lo = ok(lo);
    assert_ne!(ok_lo, ok(hi), "bisection bracket does not straddle");
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) == ok_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Naive `Σ min(λ_i, r²)`.
fn clipped(values: &[f64], scale: f64, r: f64) -> f64 {
    values.iter().map(|&l| (l * scale).min(r * r)).sum()
}

/// `inf {r > 0 : Σ min(λ_i, r²) ≤ η n r²}` by bisection.
pub fn r_star_oracle(s: &Spectrum, n: usize, eta: f64) -> f64 {
    let budget = eta * n as f64;
    let positive: Vec<f64> = s.values().iter().copied().filter(|&v| v > 0.0).collect();
    if positive.len() as f64 <= budget {
        return 0.0;
    }
    let trace: f64 = positive.iter().sum();
    let holds = |r: f64| clipped(&positive, 1.0, r) <= budget * r * r;
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).sqrt() * 0.5;
    let hi = (trace / budget).sqrt() * 2.0;
    bisect(lo, hi, holds).1
}

pub enum RBar {
    Finite(f64),
    Infinite,
}

/// `sup {r > 0 : Σ min(λ_i ρ², r²) ≤ γ ‖ξ‖²}` by bisection.
pub fn r_bar_oracle(s: &Spectrum, rho: f64, xi_norm: f64, gamma: f64) -> RBar {
    if xi_norm == 0.0 {
        return RBar::Finite(0.0);
    }
    let budget = gamma * xi_norm * xi_norm;
    let scale = rho * rho;
    let total: f64 = s.values().iter().map(|l| l * scale).sum();
    if total <= budget {
        return RBar::Infinite;
    }
    let holds = |r: f64| clipped(s.values(), scale, r) <= budget;
    let lo = (budget / s.len() as f64).sqrt() * 0.5;
    let hi = (s.values()[0] * scale).sqrt() * 2.0;
    RBar::Finite(bisect(lo, hi, holds).0)
}

/// `Xᵀ (XXᵀ)⁻¹ Y` through a Cholesky factorization of the Gram matrix.
pub fn normal_equations(x: &DesignMatrix, y: &DVector<f64>) -> DVector<f64> {
    let m = x.entries();
    let gram = m * m.transpose();
    let chol = gram.cholesky().expect("Gram matrix is positive definite");
    m.transpose() * chol.solve(y)
}

/// Spectrum with log-uniform entries in `[10^lo_exp, 1]`, sorted; with
/// `ties`, entries are rounded to one significant digit to create plateaus.
pub fn log_uniform_spectrum<R: Rng>(rng: &mut R, p: usize, lo_exp: f64, ties: bool) -> Spectrum {
    let mut v: Vec<f64> = (0..p)
        .map(|_| {
            let x = 10f64.powf(rng.random_range(lo_exp..0.0));
            if ties {
                let mag = 10f64.powf(x.log10().floor());
                (x / mag).round() * mag
            } else {
                x
            }
        })
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Spectrum::new(v).unwrap()
}

/// `p` log-uniform in `[lo, hi]`.
pub fn log_uniform_usize<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    let x = rng.random_range((lo as f64).ln()..=((hi as f64) + 0.999).ln()).exp();
    (x.floor() as usize).clamp(lo, hi)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(rand_distr::StandardNormal))
}
