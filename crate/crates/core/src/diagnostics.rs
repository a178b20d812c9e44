//! Deterministic spectral quantities behind the risk bounds.
//!
//! Everything here is a pure function of the spectrum, the sample size
//! and the norms `‖β*‖₂`, `‖ξ‖₂`:
//!
//! * `k*`: first index where the tail is flat enough, `r_k / λ_k ≥ c0·n`;
//! * `ρ = ‖β*‖ + 4‖ξ‖ / √r_{k*}`, the estimation radius;
//! * `r*(η) = inf { r > 0 : Σ λ_i ∧ r² ≤ η n r² }`;
//! * `r̄(γ) = sup { r > 0 : Σ λ_i ρ² ∧ r² ≤ γ ‖ξ‖² }`;
//! * `k̄ = inf { k ≥ k* : r_k ≤ (γ/2) r_{k*} }`, or `p + 1`.
//!
//! Both fixed points are solved exactly: the clipped sums are piecewise
//! linear in `r²` with breakpoints at the eigenvalues, so the crossing is
//! located segment by segment and solved in closed form.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::DiagnosticsError;
use crate::spectra::Spectrum;

/// A value that may be `+∞`. Serializes the infinite case as the string
/// `"inf"`, never as a float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Copy> Extended<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }
}

impl<T: Serialize> Serialize for Extended<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => v.serialize(serializer),
            Extended::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Extended<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Tag(String),
        }
        match Raw::<T>::deserialize(deserializer)? {
            Raw::Value(v) => Ok(Extended::Finite(v)),
            Raw::Tag(s) if s == "inf" => Ok(Extended::Infinite),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// The unspecified absolute constants of the bounds, pinned and reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    /// Threshold in `r_k / λ_k ≥ c0·n`.
    pub c0: f64,
    pub eta: f64,
    pub gamma: f64,
    /// Noise-term constant of the prediction bounds.
    pub c3: f64,
    /// `cn = floor(c_frac · n)` in `r_{cn}`.
    pub c_frac: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c0: 10.0, eta: 0.05, gamma: 0.5, c3: 1.0, c_frac: 0.5 }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        let positive = [("c0", self.c0), ("eta", self.eta), ("gamma", self.gamma), ("c3", self.c3)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DiagnosticsError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.c_frac > 0.0 && self.c_frac <= 1.0) {
            return Err(DiagnosticsError::InvalidParameter(format!(
                "c_frac must lie in (0, 1], got {}",
                self.c_frac
            )));
        }
        Ok(())
    }

    /// `cn = max(1, floor(c_frac · n))`.
    pub fn cn(&self, n: usize) -> usize {
        ((self.c_frac * n as f64).floor() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    HighSNR,
    LowSNR,
}

/// Smallest 1-based `k` with `r_k / λ_k ≥ c0·n`. Zero eigenvalues never
/// qualify.
pub fn k_star(s: &Spectrum, n: usize, c0: f64) -> Extended<usize> {
    let threshold = c0 * n as f64;
    (1..=s.len())
        .find(|&k| {
            let lambda = s.lambda(k);
            lambda > 0.0 && s.tail_from(k) >= threshold * lambda
        })
        .map_or(Extended::Infinite, Extended::Finite)
}

pub fn rho(beta_star_norm: f64, xi_norm: f64, r_kstar: f64) -> Result<f64, DiagnosticsError> {
    if !(r_kstar > 0.0) {
        return Err(DiagnosticsError::DegenerateTail);
    }
    Ok(beta_star_norm + 4.0 * xi_norm / r_kstar.sqrt())
}

/// `Σ_i min(λ_i ρ², r²)`.
pub fn clipped_sum(s: &Spectrum, r: f64, rho: f64) -> f64 {
    let level = r * r;
    let scale = rho * rho;
    s.values().iter().map(|&l| (l * scale).min(level)).sum()
}

/// Exact `r*(η)`.
///
/// With `s = r²` and `j` eigenvalues at or above `s`, the constraint
/// reads `j·s + r_{j+1} ≤ η n s`. Walking segments from small `s` upward,
/// the first segment whose upper end satisfies the constraint contains the
/// infimum, at `s = r_{j+1} / (η n − j)`.
pub fn r_star(s: &Spectrum, n: usize, eta: f64) -> Result<f64, DiagnosticsError> {
    if n == 0 {
        return Err(DiagnosticsError::InvalidParameter("n must be at least 1".into()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(DiagnosticsError::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let budget = eta * n as f64;
    let p = s.len();
    if p as f64 <= budget {
        return Ok(0.0);
    }
    for j in (0..p).rev() {
        if j as f64 >= budget {
            continue;
        }
        let lower = s.values()[j];
        let upper = if j == 0 { f64::INFINITY } else { s.lambda(j) };
        let candidate = s.tail_from(j + 1) / (budget - j as f64);
        if candidate <= upper {
            return Ok(candidate.max(lower).sqrt());
        }
    }
    unreachable!("the top segment always contains the crossing")
}

/// Exact `r̄(γ)`.
///
/// `T(r) = Σ min(μ_i, r²)` with `μ_i = λ_i ρ²` is continuous and
/// non-decreasing, linear in `s = r²` on each segment `[μ_{j+1}, μ_j]`
/// where it equals `j·s + ρ² r_{j+1}`. Returns `Infinite` when
/// `T(∞) = ρ²·trace ≤ γ‖ξ‖²`, and 0 when `‖ξ‖ = 0`.
pub fn r_bar(
    s: &Spectrum,
    rho: f64,
    xi_norm: f64,
    gamma: f64,
) -> Result<Extended<f64>, DiagnosticsError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DiagnosticsError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(xi_norm >= 0.0) || !(rho >= 0.0) {
        return Err(DiagnosticsError::InvalidParameter("norms must be non-negative".into()));
    }
    if xi_norm == 0.0 {
        return Ok(Extended::Finite(0.0));
    }
    let budget = gamma * xi_norm * xi_norm;
    let scale = rho * rho;
    if scale * s.trace() <= budget {
        return Ok(Extended::Infinite);
    }
    let p = s.len();
    for j in (1..=p).rev() {
        let upper = s.lambda(j) * scale;
        let lower = if j == p { 0.0 } else { s.values()[j] * scale };
        let tail = scale * s.tail_from(j + 1);
        let at_upper = j as f64 * upper + tail;
        if at_upper >= budget {
            let level = ((budget - tail) / j as f64).clamp(lower, upper);
            return Ok(Extended::Finite(level.sqrt()));
        }
    }
    unreachable!("T(√μ_1) equals ρ²·trace, which exceeds the budget")
}

/// Smallest `k ≥ k*` with `r_k ≤ (γ/2)·r_{k*}`, or `p + 1`.
pub fn k_bar(s: &Spectrum, k_star: usize, gamma: f64) -> Result<usize, DiagnosticsError> {
    if k_star == 0 || k_star > s.len() {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "k* = {k_star} outside 1..={}",
            s.len()
        )));
    }
    let target = 0.5 * gamma * s.tail_from(k_star);
    Ok((k_star..=s.len()).find(|&k| s.tail_from(k) <= target).unwrap_or(s.len() + 1))
}

/// Upper bound `√2 (Σ λ_i ρ² ∧ r²)^{1/2}` on the Gaussian mean width of
/// `B(r) ∩ B_{Σ^{-1/2}}(ρ)`.
pub fn width_bound(s: &Spectrum, r: f64, rho: f64) -> f64 {
    (2.0 * clipped_sum(s, r, rho)).sqrt()
}

/// Squared prediction-risk bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RiskInputs {
    pub rho: f64,
    pub r_star: f64,
    pub r_bar: Extended<f64>,
    pub xi_norm: f64,
    pub n: usize,
    pub c3: f64,
}

/// `upper = max((ρ r*)², c3² ‖ξ‖²/n)`, `lower = min(r̄², c3² ‖ξ‖²/n)`.
pub fn risk_bounds(inputs: &RiskInputs) -> Bounds {
    let noise = inputs.c3 * inputs.c3 * inputs.xi_norm * inputs.xi_norm / inputs.n as f64;
    let signal = (inputs.rho * inputs.r_star).powi(2);
    let lower = match inputs.r_bar {
        Extended::Finite(r) => (r * r).min(noise),
        Extended::Infinite => noise,
    };
    Bounds { upper: signal.max(noise), lower }
}

/// `upper = max(‖β*‖² r_{cn} / n, ‖ξ‖²/n)`, `lower = c3 ‖ξ‖² / min(n, k̄)`.
pub fn simplified_bounds(
    s: &Spectrum,
    beta_star_norm: f64,
    xi_norm: f64,
    n: usize,
    k_bar: usize,
    constants: &Constants,
) -> Result<Bounds, DiagnosticsError> {
    if n == 0 || k_bar == 0 {
        return Err(DiagnosticsError::InvalidParameter("n and k̄ must be at least 1".into()));
    }
    Ok(Bounds {
        upper: simplified_upper(s, beta_star_norm, xi_norm, n, constants),
        lower: constants.c3 * xi_norm * xi_norm / n.min(k_bar) as f64,
    })
}

fn simplified_upper(s: &Spectrum, beta_star_norm: f64, xi_norm: f64, n: usize, c: &Constants) -> f64 {
    let nf = n as f64;
    let r_cn = tail_at_cn(s, n, c);
    (beta_star_norm * beta_star_norm * r_cn / nf).max(xi_norm * xi_norm / nf)
}

/// `r_{cn}`, which is 0 once `cn > p`.
pub fn tail_at_cn(s: &Spectrum, n: usize, c: &Constants) -> f64 {
    s.tail_from(c.cn(n).min(s.len() + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrAssessment {
    pub snr: Extended<f64>,
    pub threshold: f64,
    pub regime: Regime,
}

/// `SNR = ‖β*‖²/‖ξ‖²` against `t = 1/r_{k*}`.
pub fn snr_and_regime(
    beta_star_norm: f64,
    xi_norm: f64,
    s: &Spectrum,
    k_star: Extended<usize>,
) -> Result<SnrAssessment, DiagnosticsError> {
    let k = k_star.finite().ok_or(DiagnosticsError::InfiniteKStar)?;
    let r = s.tail_from(k);
    if !(r > 0.0) {
        return Err(DiagnosticsError::DegenerateTail);
    }
    let threshold = 1.0 / r;
    let snr = signal_to_noise(beta_star_norm, xi_norm);
    let regime = match snr {
        Extended::Infinite => Regime::HighSNR,
        Extended::Finite(v) if v > threshold => Regime::HighSNR,
        Extended::Finite(_) => Regime::LowSNR,
    };
    Ok(SnrAssessment { snr, threshold, regime })
}

fn signal_to_noise(beta_star_norm: f64, xi_norm: f64) -> Extended<f64> {
    if xi_norm == 0.0 {
        Extended::Infinite
    } else {
        Extended::Finite((beta_star_norm / xi_norm).powi(2))
    }
}

/// Two-regime sub-exponential tail bound on `P(|X − μ| ≥ t)`, clamped to 1.
pub fn subexp_tail_bound(nu: f64, b: f64, t: f64) -> f64 {
    let raw = if t <= nu * nu / b {
        2.0 * (-t * t / (2.0 * nu * nu)).exp()
    } else {
        2.0 * (-t / (2.0 * b)).exp()
    };
    raw.min(1.0)
}

/// Parameters of a sum of independent sub-exponential variables:
/// `((Σ ν_i²)^{1/2}, max b_i)`.
pub fn subexp_combine(params: &[(f64, f64)]) -> Result<(f64, f64), DiagnosticsError> {
    if params.is_empty() {
        return Err(DiagnosticsError::InvalidParameter("no sub-exponential terms".into()));
    }
    if params.iter().any(|&(nu, b)| !(nu > 0.0 && b > 0.0)) {
        return Err(DiagnosticsError::InvalidParameter("parameters must be positive".into()));
    }
    let nu = params.iter().map(|&(nu, _)| nu * nu).sum::<f64>().sqrt();
    let b = params.iter().map(|&(_, b)| b).fold(f64::MIN, f64::max);
    Ok((nu, b))
}

/// All diagnostics for one configuration.
///
/// With an infinite `k*` only the spectrum-level fields are filled and
/// `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub p: usize,
    pub n: usize,
    pub trace: f64,
    pub beta_star_norm: f64,
    pub xi_norm: f64,
    pub k_star: Extended<usize>,
    pub r_kstar: Option<f64>,
    pub rho: Option<f64>,
    pub r_star: f64,
    pub r_bar: Option<Extended<f64>>,
    pub k_bar: Option<usize>,
    pub cn: usize,
    pub r_cn: f64,
    pub snr: Extended<f64>,
    /// `1 / r_{k*}`.
    pub snr_threshold: Option<f64>,
    /// `1 / r_{cn}`.
    pub snr_threshold_cn: Extended<f64>,
    pub regime: Option<Regime>,
    pub upper_bound: Option<f64>,
    pub lower_bound: Option<f64>,
    pub corollary_upper: f64,
    pub corollary_lower: Option<f64>,
    pub constants: Constants,
    pub error: Option<String>,
}

impl DiagnosticsReport {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

pub fn full_report(
    s: &Spectrum,
    n: usize,
    beta_star_norm: f64,
    xi_norm: f64,
    constants: &Constants,
) -> Result<DiagnosticsReport, DiagnosticsError> {
    if n == 0 {
        return Err(DiagnosticsError::InvalidParameter("n must be at least 1".into()));
    }
    if !(beta_star_norm >= 0.0 && xi_norm >= 0.0) || !beta_star_norm.is_finite() || !xi_norm.is_finite() {
        return Err(DiagnosticsError::InvalidParameter(
            "norms must be finite and non-negative".into(),
        ));
    }
    constants.validate()?;

    let r_cn = tail_at_cn(s, n, constants);
    let mut report = DiagnosticsReport {
        p: s.len(),
        n,
        trace: s.trace(),
        beta_star_norm,
        xi_norm,
        k_star: k_star(s, n, constants.c0),
        r_kstar: None,
        rho: None,
        r_star: r_star(s, n, constants.eta)?,
        r_bar: None,
        k_bar: None,
        cn: constants.cn(n),
        r_cn,
        snr: signal_to_noise(beta_star_norm, xi_norm),
        snr_threshold: None,
        snr_threshold_cn: if r_cn > 0.0 { Extended::Finite(1.0 / r_cn) } else { Extended::Infinite },
        regime: None,
        upper_bound: None,
        lower_bound: None,
        corollary_upper: simplified_upper(s, beta_star_norm, xi_norm, n, constants),
        corollary_lower: None,
        constants: *constants,
        error: None,
    };

    let Some(ks) = report.k_star.finite() else {
        report.error = Some(DiagnosticsError::InfiniteKStar.to_string());
        return Ok(report);
    };
    let r_kstar = s.tail_from(ks);
    let rho = rho(beta_star_norm, xi_norm, r_kstar)?;
    let r_bar = if rho > 0.0 {
        r_bar(s, rho, xi_norm, constants.gamma)?
    } else {
        Extended::Finite(0.0)
    };
    let k_bar = k_bar(s, ks, constants.gamma)?;
    let full = risk_bounds(&RiskInputs {
        rho,
        r_star: report.r_star,
        r_bar,
        xi_norm,
        n,
        c3: constants.c3,
    });
    let simple = simplified_bounds(s, beta_star_norm, xi_norm, n, k_bar, constants)?;
    let snr = snr_and_regime(beta_star_norm, xi_norm, s, report.k_star)?;

    report.r_kstar = Some(r_kstar);
    report.rho = Some(rho);
    report.r_bar = Some(r_bar);
    report.k_bar = Some(k_bar);
    report.snr_threshold = Some(snr.threshold);
    report.regime = Some(snr.regime);
    report.upper_bound = Some(full.upper);
    report.lower_bound = Some(full.lower);
    report.corollary_lower = Some(simple.lower);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{make_exp_floor_spectrum, make_flat_spectrum, make_three_level_spectrum};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn k_star_examples() {
        let flat = make_flat_spectrum(1000, 1.0).unwrap();
        assert_eq!(k_star(&flat, 10, 10.0), Extended::Finite(1));

        let mut v = vec![100.0];
        v.extend(std::iter::repeat_n(1.0, 100));
        let s = Spectrum::new(v).unwrap();
        assert_eq!(k_star(&s, 10, 10.0), Extended::Finite(2));

        let geo = Spectrum::new((1..=50).map(|i| 4f64.powi(-i)).collect()).unwrap();
        assert_eq!(k_star(&geo, 10, 10.0), Extended::Infinite);
    }

    #[test]
    fn k_star_skips_zero_eigenvalues() {
        let s = Spectrum::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(k_star(&s, 1, 1.5), Extended::Finite(1));
        assert_eq!(k_star(&s, 1, 3.0), Extended::Infinite);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(1.0, 2.0, 16.0).unwrap(), 3.0);
        assert_eq!(rho(0.0, 0.0, 5.0).unwrap(), 0.0);
        assert_eq!(rho(1.0, 0.0, 0.37).unwrap(), 1.0);
        assert_eq!(rho(1.0, 1.0, 0.0), Err(DiagnosticsError::DegenerateTail));
    }

    #[test]
    fn r_star_examples() {
        let flat = make_flat_spectrum(1000, 1.0).unwrap();
        assert_eq!(r_star(&flat, 100, 0.1).unwrap(), 10.0);
        let small = make_flat_spectrum(5, 1.0).unwrap();
        assert_eq!(r_star(&small, 100, 0.1).unwrap(), 0.0);
        assert!(r_star(&flat, 0, 0.1).is_err());
        assert!(r_star(&flat, 10, 0.0).is_err());
    }

    #[test]
    fn r_bar_examples() {
        let flat = make_flat_spectrum(10, 1.0).unwrap();
        let gamma = 0.5;
        let xi = (5.0f64 / gamma).sqrt();
        let r = r_bar(&flat, 1.0, xi, gamma).unwrap().finite().unwrap();
        assert!(close(r, 0.5f64.sqrt(), 1e-14));

        let s = make_exp_floor_spectrum(100, 5.0, 0.01).unwrap();
        assert_eq!(r_bar(&s, 2.0, 0.0, 0.25).unwrap(), Extended::Finite(0.0));
        // ρ²·trace = 10 ≤ γ‖ξ‖² = 12.5: the constraint never binds.
        assert_eq!(r_bar(&flat, 1.0, 5.0, 0.5).unwrap(), Extended::Infinite);
    }

    #[test]
    fn k_bar_examples() {
        let flat = make_flat_spectrum(1000, 1.0).unwrap();
        assert_eq!(k_bar(&flat, 1, 0.5).unwrap(), 751);
        let s = make_exp_floor_spectrum(300, 20.0, 1e-4).unwrap();
        for ks in [1, 17, 300] {
            assert_eq!(k_bar(&s, ks, 2.0).unwrap(), ks);
        }
        // Tail never drops below (γ/2)·r_{k*} when k* = p.
        assert_eq!(k_bar(&flat, 1000, 0.5).unwrap(), 1001);
    }

    fn three_level(eps2_fraction: f64) -> (usize, usize) {
        let (k1, cn, p, gamma) = (10usize, 20usize, 10_000usize, 0.5);
        let eps1 = 0.1;
        let k2 = k1 + cn + 1;
        let eps2 = eps2_fraction * gamma / (2.0 - gamma) * cn as f64 / (p - k2 + 1) as f64 * eps1;
        let s = make_three_level_spectrum(k1, cn, p, eps1, eps2).unwrap();
        let ks = k_star(&s, 20, 1.0).finite().unwrap();
        assert!(ks <= k1);
        (ks, k_bar(&s, ks, gamma).unwrap())
    }

    #[test]
    fn k_bar_on_three_level_example() {
        // At equality in the ε2 condition the tail ratio first drops below
        // γ/2 at k2 = k1 + cn + 1, since the ε1 block holds cn + 1 entries.
        assert_eq!(three_level(1.0), (10, 31));
        // Half of the ε2 budget already gives k̄ ≤ k1 + cn.
        let (_, kb) = three_level(0.5);
        assert!(kb <= 30, "k̄ = {kb}");
    }

    #[test]
    fn width_bound_examples() {
        let flat = make_flat_spectrum(4, 1.0).unwrap();
        assert!(close(width_bound(&flat, 0.5, 1.0), 2f64.sqrt(), 1e-15));
        assert_eq!(width_bound(&flat, 0.0, 1.0), 0.0);
        assert_eq!(width_bound(&flat, 1.0, 0.0), 0.0);
    }

    #[test]
    fn risk_bound_examples() {
        let b = risk_bounds(&RiskInputs {
            rho: 3.0,
            r_star: 0.1,
            r_bar: Extended::Finite(1.0),
            xi_norm: 2.0,
            n: 100,
            c3: 1.0,
        });
        assert!(close(b.upper, 0.09, 1e-14));
        let b = risk_bounds(&RiskInputs {
            rho: 1.0,
            r_star: 0.1,
            r_bar: Extended::Finite(0.0),
            xi_norm: 0.0,
            n: 100,
            c3: 1.0,
        });
        assert_eq!(b.lower, 0.0);
        let b = risk_bounds(&RiskInputs {
            rho: 1.0,
            r_star: 0.1,
            r_bar: Extended::Finite(0.5),
            xi_norm: 10.0,
            n: 100,
            c3: 1.0,
        });
        assert_eq!(b.lower, 0.25);
    }

    #[test]
    fn simplified_bound_examples() {
        let c = Constants::default();
        let flat = make_flat_spectrum(1000, 1.0).unwrap();
        let b = simplified_bounds(&flat, 1.0, 0.0, 100, 751, &c).unwrap();
        assert!(close(b.upper, 9.51, 1e-14));
        assert_eq!(b.lower, 0.0);

        let b = simplified_bounds(&flat, 0.0, 3.0, 100, 751, &c).unwrap();
        assert_eq!(b.upper, 9.0 / 100.0);

        let sq = make_flat_spectrum(50, 1.0).unwrap();
        for kb in 1..=51 {
            let b = simplified_bounds(&sq, 0.0, 2.0, 50, kb, &c).unwrap();
            assert!(b.lower >= c.c3 * 4.0 / 50.0 && b.lower <= c.c3 * 4.0);
        }
    }

    #[test]
    fn snr_examples() {
        let s = make_flat_spectrum(4, 1.0).unwrap();
        let a = snr_and_regime(1.0, 1.0, &s, Extended::Finite(1)).unwrap();
        assert_eq!(a.snr, Extended::Finite(1.0));
        assert_eq!(a.threshold, 0.25);
        assert_eq!(a.regime, Regime::HighSNR);
        let a = snr_and_regime(1.0, 0.0, &s, Extended::Finite(1)).unwrap();
        assert_eq!(a.snr, Extended::Infinite);
        assert_eq!(a.regime, Regime::HighSNR);
        let a = snr_and_regime(0.0, 1.0, &s, Extended::Finite(1)).unwrap();
        assert_eq!(a.snr, Extended::Finite(0.0));
        assert_eq!(a.regime, Regime::LowSNR);
        assert_eq!(
            snr_and_regime(1.0, 1.0, &s, Extended::Infinite),
            Err(DiagnosticsError::InfiniteKStar)
        );
    }

    #[test]
    fn subexp_examples() {
        assert!(close(subexp_tail_bound(1.0, 1.0, 2.0), 2.0 * (-1.0f64).exp(), 1e-15));
        assert!((subexp_tail_bound(1.0, 1.0, 2.0) - 0.73576).abs() < 1e-5);
        assert_eq!(subexp_tail_bound(1.0, 1.0, 0.5), 1.0);
        assert!(close(subexp_tail_bound(2.0, 1.0, 3.0), 2.0 * (-9.0f64 / 8.0).exp(), 1e-15));
        assert!((subexp_tail_bound(2.0, 1.0, 3.0) - 0.64930).abs() < 1e-5);
        // Branches agree at t = ν²/b.
        for (nu, b) in [(1.0, 1.0), (2.0, 0.5), (3.0, 7.0), (0.3, 0.01)] {
            let t: f64 = nu * nu / b;
            let a = 2.0 * (-t * t / (2.0 * nu * nu)).exp();
            let c = 2.0 * (-t / (2.0 * b)).exp();
            assert!(close(a, c, 1e-12));
            assert!(close(a, 2.0 * (-nu * nu / (2.0 * b * b)).exp(), 1e-12));
        }
    }

    #[test]
    fn subexp_combine_examples() {
        assert_eq!(subexp_combine(&[(3.0, 1.0), (4.0, 2.0)]).unwrap(), (5.0, 2.0));
        assert_eq!(subexp_combine(&[(1.5, 0.25)]).unwrap(), (1.5, 0.25));
        assert!(subexp_combine(&[]).is_err());

        let s = make_exp_floor_spectrum(60, 7.0, 0.01).unwrap();
        let ks = 5;
        let terms: Vec<_> = s.values()[ks - 1..].iter().map(|&l| (2.0 * l, 4.0 * l)).collect();
        let (nu, b) = subexp_combine(&terms).unwrap();
        let sq: f64 = s.values()[ks - 1..].iter().map(|l| l * l).sum();
        assert!(close(nu, 2.0 * sq.sqrt(), 1e-14));
        assert_eq!(b, 4.0 * s.lambda(ks));
    }

    #[test]
    fn full_report_flat() {
        let s = make_flat_spectrum(1000, 1.0).unwrap();
        let r = full_report(&s, 10, 1.0, 2.0, &Constants::default()).unwrap();
        assert!(r.is_complete());
        assert_eq!(r.k_star, Extended::Finite(1));
        assert_eq!(r.r_kstar, Some(1000.0));
        assert!((r.rho.unwrap() - 1.25298).abs() < 1e-5);
        assert!(close(r.rho.unwrap(), 1.0 + 8.0 / 1000f64.sqrt(), 1e-15));
        assert!(r.k_star.finite().unwrap() <= r.k_bar.unwrap());

        let r = full_report(&s, 10, 1.0, 0.0, &Constants::default()).unwrap();
        assert_eq!(r.rho, Some(1.0));
        assert_eq!(r.r_bar, Some(Extended::Finite(0.0)));
        assert_eq!(r.lower_bound, Some(0.0));
    }

    #[test]
    fn full_report_infinite_k_star_is_partial() {
        let s = Spectrum::new((1..=50).map(|i| 4f64.powi(-i)).collect()).unwrap();
        let r = full_report(&s, 10, 1.0, 1.0, &Constants::default()).unwrap();
        assert!(!r.is_complete());
        assert_eq!(r.k_star, Extended::Infinite);
        assert!(r.rho.is_none() && r.upper_bound.is_none());
        assert!(r.r_star > 0.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["k_star"], "inf");
    }

    #[test]
    fn exponential_example_k_star() {
        // p = c·n with τ·log(1/ε) ≤ n.
        let (n, tau, eps) = (200usize, 10.0, 1e-4);
        // The ratio at k = τ·log(1/ε) is about (p − k + τ)/2, so c0 = 10
        // needs p a little above 20n.
        let p = 40 * n;
        assert!(tau * (1.0f64 / eps).ln() <= n as f64);
        let s = make_exp_floor_spectrum(p, tau, eps).unwrap();
        let r = full_report(&s, n, 1.0, 1.0, &Constants::default()).unwrap();
        let ks = r.k_star.finite().unwrap();
        assert!(ks as f64 <= tau * (1.0 / eps).ln(), "k* = {ks}");
    }

    #[test]
    fn report_serializes_stable_names() {
        let s = make_flat_spectrum(1000, 1.0).unwrap();
        let r = full_report(&s, 10, 1.0, 2.0, &Constants::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "k_star", "r_kstar", "rho", "r_star", "r_bar", "k_bar", "snr", "snr_threshold",
            "regime", "upper_bound", "lower_bound", "corollary_upper", "corollary_lower",
            "constants",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["regime"], "HighSNR");
    }
}
