//! Focused studies: the singular-value certificate and the low-SNR
//! lower bound.

use serde::Serialize;

use crate::design::{sample_design, ThinSvd};
use crate::diagnostics::{k_star, Extended, Regime};
use crate::error::DiagnosticsError;
use crate::noise::{conditional_independence_tag, NoiseModel};
use crate::output::fmt_f64;
use crate::rng::{trial_rng, Stream, SHARED_TRIAL};
use crate::spectra::{CovarianceModel, SpectrumSpec};

use super::{run_prepared, with_pool, ExperimentConfig, ExperimentError, ExperimentResult, RunOptions, Summary};
use rayon::prelude::*;

const HISTOGRAM_BINS: usize = 20;

/// Trials below this multiple of `‖ξ‖²/(n ∧ k̄)` are flagged.
pub const DEFAULT_LOWER_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateStudyConfig {
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub rotation_seed: Option<u64>,
    pub n: usize,
    pub c0: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub allow_low_dim: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateStudy {
    pub config: CertificateStudyConfig,
    pub k_star: usize,
    pub r_kstar: f64,
    /// `√r_{k*} / 4`.
    pub threshold: f64,
    pub pass_rate: f64,
    pub sigma_min: Summary,
    /// `σ_n / √r_{k*}` per trial; the certificate reads `ratio ≥ 1/4`.
    pub ratios: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

impl CertificateStudy {
    pub fn histogram_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "count"]).expect("in-memory write");
        for b in &self.histogram {
            w.write_record([fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    pub fn summary_line(&self) -> String {
        format!(
            "pass_rate={:.4} trials={} k_star={} threshold={:.6e} sigma_min_median={:.6e}",
            self.pass_rate,
            self.ratios.len(),
            self.k_star,
            self.threshold,
            self.sigma_min.median
        )
    }
}

/// Equal-width bins over `[min, max]` of `values`.
pub(crate) fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !lo.is_finite() || !hi.is_finite() {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + width * i as f64,
            hi: if i + 1 == bins && hi > lo { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// Frequency of `σ_n(X) ≥ √r_{k*} / 4` over seeded design draws.
pub fn certificate_study(config: &CertificateStudyConfig, options: &RunOptions) -> Result<CertificateStudy, ExperimentError> {
    if config.n == 0 || config.trials == 0 {
        return Err(ExperimentError::Config(vec!["n and trials must be at least 1".into()]));
    }
    let spectrum = config.spectrum.build()?.spectrum;
    let ks = k_star(&spectrum, config.n, config.c0).finite().ok_or(DiagnosticsError::InfiniteKStar)?;
    let r = spectrum.tail_from(ks);
    if !(r > 0.0) {
        return Err(DiagnosticsError::DegenerateTail.into());
    }
    let cov = match config.rotation_seed {
        Some(seed) => CovarianceModel::with_random_rotation(spectrum, &mut trial_rng(seed, SHARED_TRIAL, Stream::Rotation))?,
        None => CovarianceModel::diagonal(spectrum),
    };
    let sigmas: Vec<Result<f64, ExperimentError>> = with_pool(options, || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(config.seed, i as u64, Stream::Design);
                let x = sample_design(&cov, config.n, &mut rng, config.allow_low_dim)?;
                Ok(ThinSvd::of(&x)?.singular_values().min())
            })
            .collect()
    })?;
    let sigmas = sigmas.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let threshold = r.sqrt() / 4.0;
    let passes = sigmas.iter().filter(|&&s| s >= threshold).count();
    let ratios: Vec<f64> = sigmas.iter().map(|s| s / r.sqrt()).collect();
    Ok(CertificateStudy {
        config: config.clone(),
        k_star: ks,
        r_kstar: r,
        threshold,
        pass_rate: passes as f64 / sigmas.len() as f64,
        sigma_min: Summary::of(&sigmas).expect("at least one trial"),
        histogram: histogram(&ratios, HISTOGRAM_BINS),
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundStudy {
    pub result: ExperimentResult,
    pub k_bar: usize,
    /// `‖ξ‖² / (n ∧ k̄)` divides each trial's prediction error.
    pub denominator_rank: usize,
    pub ratios: Summary,
    pub floor: f64,
    /// Trial indices whose ratio fell below `floor`.
    pub below_floor: Vec<usize>,
    /// Set when the configuration sits in the high-SNR regime, outside
    /// the hypothesis of the lower bound.
    pub out_of_hypothesis: bool,
}

/// Distribution of `ΔᵀΣΔ / (‖ξ‖² / (n ∧ k̄))` across trials.
///
/// Refuses noise that depends on `X` and zero noise. In the high-SNR
/// regime the study still runs but is tagged out of hypothesis.
pub fn lower_bound_study(
    config: &ExperimentConfig,
    floor: f64,
    options: &RunOptions,
) -> Result<LowerBoundStudy, ExperimentError> {
    if !conditional_independence_tag(&config.noise) {
        return Err(ExperimentError::Hypothesis(format!(
            "{} noise is not independent of X; the lower bound needs rows independent conditionally on ξ",
            config.noise.label()
        )));
    }
    if matches!(config.noise, NoiseModel::Zero) {
        return Err(ExperimentError::Invalid("lower-bound ratio undefined for zero noise".into()));
    }
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(ExperimentError::Invalid(format!("floor must be finite and non-negative, got {floor}")));
    }
    let prepared = config.prepare()?;
    if prepared.k_star == Extended::Infinite {
        return Err(DiagnosticsError::InfiniteKStar.into());
    }
    let result = run_prepared(&prepared, options)?;
    let d = &result.diagnostics;
    let k_bar = d.k_bar.ok_or(DiagnosticsError::InfiniteKStar)?;
    let out_of_hypothesis = d.regime == Some(Regime::HighSNR);
    if out_of_hypothesis {
        log::warn!("configuration is in the high-SNR regime; the lower bound is out of hypothesis");
    }
    let rank = config.n.min(k_bar);
    let ratios: Vec<f64> =
        result.records.iter().map(|r| r.pred_error / (r.xi_norm_sq / rank as f64)).collect();
    let below_floor = result
        .records
        .iter()
        .zip(&ratios)
        .filter(|(_, &q)| !(q >= floor))
        .map(|(r, _)| r.trial_index)
        .collect();
    Ok(LowerBoundStudy {
        k_bar,
        denominator_rank: rank,
        ratios: Summary::of(&ratios).expect("at least one trial"),
        floor,
        below_floor,
        out_of_hypothesis,
        result,
    })
}
