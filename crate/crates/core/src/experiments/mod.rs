//! Monte Carlo harness.
//!
//! A trial samples `X` and `ξ` from generators keyed by
//! `(seed, trial index)`, fits the minimum-norm interpolator and records
//! error metrics, the interpolation-identity residual and the two
//! explicit-constant checks (singular-value certificate and estimation
//! bound). Trials run in parallel; records are always ordered by trial
//! index, so results do not depend on the number of worker threads.

mod config;
mod scan;
mod studies;
mod summary;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::design::{fit_with_svd, quadratic_form, sample_design, RegressionInstance, ThinSvd};
use crate::diagnostics::{full_report, DiagnosticsReport};
use crate::error::{DesignError, DiagnosticsError, NoiseError, SpectrumError};
use crate::noise::{conditional_independence_tag, realize_noise_with};
use crate::output::fmt_f64;
use crate::rng::{trial_rng, Stream};

pub use config::{BetaDirection, BetaSpec, Check, ExperimentConfig, Prepared, SCHEMA_VERSION};
pub use scan::{log_grid, snr_scan, ScanPoint, ScanResult};
pub use studies::{
    certificate_study, lower_bound_study, CertificateStudy, CertificateStudyConfig, HistogramBin,
    LowerBoundStudy, DEFAULT_LOWER_FLOOR,
};
pub use summary::{median, quantile, Summary};

/// Maximum relative residual of the interpolation identity.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("trial {trial_index}: {message}")]
    Trial { trial_index: usize, message: String },
    #[error("experiment aborted at trial {trial_index}: {message} ({} trials kept)", partial.records.len())]
    Aborted { trial_index: usize, message: String, partial: Box<ExperimentResult> },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("{0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker-thread cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

pub(crate) fn with_pool<T: Send>(
    options: &RunOptions,
    job: impl FnOnce() -> T + Send,
) -> Result<T, ExperimentError> {
    match options.threads {
        None => Ok(job()),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub xi_norm_sq: f64,
    /// `ΔᵀΣΔ`.
    pub pred_error: f64,
    /// `‖Δ‖²`.
    pub est_error: f64,
    /// `σ_n(X)`.
    pub sigma_min: f64,
    pub deviation: f64,
    pub identity_residual: f64,
    /// `σ_n(X) ≥ √r_{k*} / 4`; `None` when disabled or `k*` is infinite.
    pub certificate_pass: Option<bool>,
    /// `‖Δ‖ ≤ ‖β*‖ + 4‖ξ‖/√r_{k*}` with this trial's `‖ξ‖`.
    pub est_bound_pass: Option<bool>,
    pub rank: usize,
}

pub const TRIAL_COLUMNS: [&str; 9] = [
    "trial_index",
    "xi_norm_sq",
    "pred_error",
    "est_error",
    "sigma_min",
    "deviation",
    "identity_residual",
    "certificate_pass",
    "est_bound_pass",
];

impl TrialRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let flag = |b: Option<bool>| b.map_or_else(String::new, |b| b.to_string());
        vec![
            self.trial_index.to_string(),
            fmt_f64(self.xi_norm_sq),
            fmt_f64(self.pred_error),
            fmt_f64(self.est_error),
            fmt_f64(self.sigma_min),
            fmt_f64(self.deviation),
            fmt_f64(self.identity_residual),
            flag(self.certificate_pass),
            flag(self.est_bound_pass),
        ]
    }
}

/// Relative residual of `ΔᵀΣΔ + deviation = ‖ξ‖²/n`.
///
/// The denominator is the largest term of the identity, floored at
/// machine precision times `‖Y‖²/n` so that noiseless square designs,
/// where every term is rounding noise, do not divide by zero.
pub fn identity_residual(pred_error: f64, deviation: f64, xi_norm_sq: f64, targets_norm_sq: f64, n: usize) -> f64 {
    let rhs = xi_norm_sq / n as f64;
    let scale = rhs
        .max(pred_error.abs())
        .max(f64::EPSILON * targets_norm_sq / n as f64)
        .max(f64::MIN_POSITIVE);
    ((pred_error + deviation) - rhs).abs() / scale
}

impl Prepared {
    pub fn run_trial(&self, trial_index: usize) -> Result<TrialRecord, ExperimentError> {
        self.trial(trial_index).map_err(|e| ExperimentError::Trial { trial_index, message: e.to_string() })
    }

    fn trial(&self, trial_index: usize) -> Result<TrialRecord, ExperimentError> {
        let cfg = &self.config;
        let idx = trial_index as u64;
        let design = sample_design(&self.cov, cfg.n, &mut trial_rng(cfg.seed, idx, Stream::Design), cfg.allow_low_dim)?;
        let svd = ThinSvd::of(&design)?;
        let noise = realize_noise_with(
            &self.noise,
            &design,
            Some(&svd),
            &self.beta_star,
            &mut trial_rng(cfg.seed, idx, Stream::Noise),
        )?;
        let instance = RegressionInstance::new(design, self.beta_star.clone(), noise, self.cov.clone(), cfg.seed)?;
        let fit = fit_with_svd(&instance.design, &svd, &instance.targets, cfg.rel_tol)?;

        let n = cfg.n;
        let delta: DVector<f64> = &fit.beta_hat - &instance.beta_star;
        let pred_error = quadratic_form(&self.cov, &delta);
        let est_error = delta.norm_squared();
        let empirical = instance.design.mul_vec(&delta).norm_squared() / n as f64;
        let deviation = empirical - pred_error;
        let xi_norm_sq = instance.noise.norm_squared();
        let residual =
            identity_residual(pred_error, deviation, xi_norm_sq, instance.targets.norm_squared(), n);
        let sigma_min = svd.singular_values().min();

        let certificate_pass = self
            .r_kstar
            .filter(|_| cfg.check_enabled(Check::Certificate))
            .map(|r| sigma_min >= r.sqrt() / 4.0);
        let est_bound_pass = self
            .r_kstar
            .filter(|_| cfg.check_enabled(Check::EstimationBound))
            .map(|r| est_error.sqrt() <= self.beta_star.norm() + 4.0 * xi_norm_sq.sqrt() / r.sqrt());

        Ok(TrialRecord {
            trial_index,
            xi_norm_sq,
            pred_error,
            est_error,
            sigma_min,
            deviation,
            identity_residual: residual,
            certificate_pass,
            est_bound_pass,
            rank: fit.rank,
        })
    }
}

/// Runs one trial of `config`.
pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialRecord, ExperimentError> {
    config.prepare()?.run_trial(trial_index)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Passed,
    Failed(String),
    /// Observed quantity reported as a rate or ratio.
    Reported,
    Skipped(String),
    Disabled,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckStatus::Passed => f.write_str("passed"),
            CheckStatus::Failed(why) => write!(f, "failed: {why}"),
            CheckStatus::Reported => f.write_str("reported"),
            CheckStatus::Skipped(why) => write!(f, "skipped: {why}"),
            CheckStatus::Disabled => f.write_str("disabled"),
        }
    }
}

impl Serialize for CheckStatus {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    pub certificate_pass_rate: Option<f64>,
    pub est_bound_pass_rate: Option<f64>,
    /// Median prediction error over the general upper bound.
    pub upper_ratio: Option<f64>,
    /// Median prediction error over the general lower bound.
    pub lower_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortInfo {
    pub trial_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub noise_label: String,
    pub conditional_independence: bool,
    pub diagnostics: DiagnosticsReport,
    pub records: Vec<TrialRecord>,
    pub aggregates: BTreeMap<String, Summary>,
    pub rates: Rates,
    pub checks: BTreeMap<Check, CheckStatus>,
    pub aborted: Option<AbortInfo>,
}

impl ExperimentResult {
    pub fn identity_failed(&self) -> bool {
        matches!(self.checks.get(&Check::Identity), Some(CheckStatus::Failed(_)))
    }

    pub fn metric(&self, name: &str) -> Option<&Summary> {
        self.aggregates.get(name)
    }

    pub fn median_pred_error(&self) -> Option<f64> {
        self.metric("pred_error").map(|s| s.median)
    }

    /// One row per trial.
    pub fn trials_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRIAL_COLUMNS).expect("in-memory write");
        for r in &self.records {
            w.write_record(r.csv_row()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    /// Plain-text aggregate table.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
            "metric", "min", "q05", "median", "q95", "max"
        );
        for (name, s) in &self.aggregates {
            out.push_str(&format!(
                "{:<18} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}\n",
                name, s.min, s.q05, s.median, s.q95, s.max
            ));
        }
        let rate = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        out.push_str(&format!(
            "certificate_pass_rate={} est_bound_pass_rate={} upper_ratio={} lower_ratio={}\n",
            rate(self.rates.certificate_pass_rate),
            rate(self.rates.est_bound_pass_rate),
            rate(self.rates.upper_ratio),
            rate(self.rates.lower_ratio),
        ));
        for (check, status) in &self.checks {
            out.push_str(&format!("check {check:?}: {status}\n"));
        }
        out
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    run_experiment_with(config, &RunOptions::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentResult, ExperimentError> {
    let prepared = config.prepare()?;
    run_prepared(&prepared, options)
}

pub(crate) fn run_prepared(prepared: &Prepared, options: &RunOptions) -> Result<ExperimentResult, ExperimentError> {
    let trials = prepared.config.trials;
    let outcomes: Vec<Result<TrialRecord, ExperimentError>> =
        with_pool(options, || (0..trials).into_par_iter().map(|i| prepared.run_trial(i)).collect())?;

    let mut records = Vec::with_capacity(trials);
    let mut aborted = None;
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(ExperimentError::Trial { trial_index, message }) => {
                aborted = Some(AbortInfo { trial_index, message });
                break;
            }
            Err(other) => return Err(other),
        }
    }
    let result = assemble(prepared, records, aborted.clone())?;
    match aborted {
        Some(AbortInfo { trial_index, message }) => {
            Err(ExperimentError::Aborted { trial_index, message, partial: Box::new(result) })
        }
        None => Ok(result),
    }
}

fn assemble(
    prepared: &Prepared,
    records: Vec<TrialRecord>,
    aborted: Option<AbortInfo>,
) -> Result<ExperimentResult, ExperimentError> {
    let cfg = &prepared.config;
    let column = |f: fn(&TrialRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mut aggregates = BTreeMap::new();
    let metrics: [(&str, fn(&TrialRecord) -> f64); 6] = [
        ("xi_norm_sq", |r| r.xi_norm_sq),
        ("pred_error", |r| r.pred_error),
        ("est_error", |r| r.est_error),
        ("sigma_min", |r| r.sigma_min),
        ("deviation", |r| r.deviation),
        ("identity_residual", |r| r.identity_residual),
    ];
    for (name, f) in metrics {
        if let Some(s) = Summary::of(&column(f)) {
            aggregates.insert(name.to_string(), s);
        }
    }

    let xi_norm = match prepared.noise.fixed_norm() {
        Some(norm) => norm,
        None => median(&records.iter().map(|r| r.xi_norm_sq.sqrt()).collect::<Vec<_>>()).unwrap_or(0.0),
    };
    let diagnostics =
        full_report(prepared.cov.spectrum(), cfg.n, prepared.beta_star.norm(), xi_norm, &cfg.constants)?;

    let pass_rate = |f: fn(&TrialRecord) -> Option<bool>| {
        let flags: Vec<bool> = records.iter().filter_map(f).collect();
        (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
    };
    let independent = conditional_independence_tag(&prepared.noise);
    let median_pred = aggregates.get("pred_error").map(|s| s.median);
    let ratio = |bound: Option<f64>| match (median_pred, bound) {
        (Some(m), Some(b)) if b > 0.0 => Some(m / b),
        _ => None,
    };

    let k_star_missing = || CheckStatus::Skipped("k* infinite".into());
    let mut checks = BTreeMap::new();
    for check in Check::ALL {
        let status = if !cfg.check_enabled(check) {
            CheckStatus::Disabled
        } else {
            match check {
                Check::Identity => {
                    let bad: Vec<&TrialRecord> = records
                        .iter()
                        .filter(|r| r.rank == cfg.n && !(r.identity_residual <= IDENTITY_TOL))
                        .collect();
                    if bad.is_empty() {
                        CheckStatus::Passed
                    } else {
                        let worst = bad.iter().map(|r| r.identity_residual).fold(0.0, f64::max);
                        CheckStatus::Failed(format!(
                            "{} trial(s) above {IDENTITY_TOL:e}, worst {worst:e}",
                            bad.len()
                        ))
                    }
                }
                Check::Certificate | Check::EstimationBound | Check::UpperBound => {
                    if prepared.r_kstar.is_some() {
                        CheckStatus::Reported
                    } else {
                        k_star_missing()
                    }
                }
                Check::LowerBound => {
                    if !independent {
                        CheckStatus::Skipped("hypothesis violated (noise depends on X)".into())
                    } else if prepared.r_kstar.is_none() {
                        k_star_missing()
                    } else {
                        CheckStatus::Reported
                    }
                }
            }
        };
        checks.insert(check, status);
    }
    let reported = |c: Check| checks.get(&c) == Some(&CheckStatus::Reported);
    let rates = Rates {
        certificate_pass_rate: pass_rate(|r| r.certificate_pass),
        est_bound_pass_rate: pass_rate(|r| r.est_bound_pass),
        upper_ratio: if reported(Check::UpperBound) { ratio(diagnostics.upper_bound) } else { None },
        lower_ratio: if reported(Check::LowerBound) { ratio(diagnostics.lower_bound) } else { None },
    };

    Ok(ExperimentResult {
        config: cfg.clone(),
        noise_label: prepared.noise.label(),
        conditional_independence: independent,
        diagnostics,
        records,
        aggregates,
        rates,
        checks,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Constants;
    use crate::noise::{Direction, NoiseModel, VectorSource};
    use crate::spectra::SpectrumSpec;

    fn flat(p: usize, n: usize, noise: NoiseModel, trials: usize) -> ExperimentConfig {
        ExperimentConfig::new(SpectrumSpec::Flat { p, value: 1.0 }, n, noise, trials, 42)
    }

    #[test]
    fn zero_noise_square_design_recovers_beta() {
        let mut c = flat(8, 8, NoiseModel::Zero, 3);
        c.beta_star = BetaSpec::with_norm(1.0, BetaDirection::Random);
        for i in 0..3 {
            let r = run_trial(&c, i).unwrap();
            assert!(r.pred_error <= 1e-20, "{}", r.pred_error);
            assert!(r.est_error <= 1e-20);
        }
    }

    #[test]
    fn hand_computed_trial() {
        // With n = 1 the single row is random, so build the instance by
        // hand through the public pieces instead.
        use crate::design::{deviation_term, min_norm_fit, prediction_error, DesignMatrix, DEFAULT_REL_TOL};
        use crate::spectra::{make_flat_spectrum, CovarianceModel};
        let x = DesignMatrix::from_rows(&[&[1.0, 0.0]], false).unwrap();
        let beta = DVector::from_vec(vec![1.0, 0.0]);
        let xi = DVector::from_vec(vec![1.0]);
        let y = x.mul_vec(&beta) + &xi;
        assert_eq!(y[0], 2.0);
        let fit = min_norm_fit(&x, &y, DEFAULT_REL_TOL).unwrap();
        assert!((fit.beta_hat.clone() - DVector::from_vec(vec![2.0, 0.0])).amax() < 1e-15);
        let cov = CovarianceModel::diagonal(make_flat_spectrum(2, 1.0).unwrap());
        let pred = prediction_error(&cov, &fit.beta_hat, &beta).unwrap();
        let dev = deviation_term(&x, &cov, &fit.beta_hat, &beta).unwrap();
        assert!((pred - 1.0).abs() < 1e-15);
        assert_eq!(identity_residual(pred, dev, 1.0, y.norm_squared(), 1), 0.0);
    }

    #[test]
    fn deterministic_noise_trial() {
        let c = flat(
            30,
            3,
            NoiseModel::Deterministic { values: VectorSource::Inline(vec![1.0, -1.0, 0.5]) },
            2,
        );
        let r = run_trial(&c, 0).unwrap();
        assert_eq!(r.xi_norm_sq, 2.25);
        assert!(r.identity_residual <= IDENTITY_TOL);
    }

    #[test]
    fn single_trial_experiment_matches_run_trial() {
        let c = flat(200, 10, NoiseModel::Gaussian { sigma: 0.5 }, 1);
        let res = run_experiment(&c).unwrap();
        assert_eq!(res.records, vec![run_trial(&c, 0).unwrap()]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = flat(300, 12, NoiseModel::StudentT { df: 3.0, scale: 1.0 }, 24);
        let one = run_experiment_with(&c, &RunOptions { threads: Some(1) }).unwrap();
        let eight = run_experiment_with(&c, &RunOptions { threads: Some(8) }).unwrap();
        assert_eq!(
            crate::output::to_json_string(&one).unwrap(),
            crate::output::to_json_string(&eight).unwrap()
        );
    }

    #[test]
    fn certificate_and_bound_rates_flat() {
        let c = flat(2000, 20, NoiseModel::Gaussian { sigma: 1.0 }, 40);
        let res = run_experiment(&c).unwrap();
        assert_eq!(res.rates.certificate_pass_rate, Some(1.0));
        assert_eq!(res.rates.est_bound_pass_rate, Some(1.0));
        assert_eq!(res.checks[&Check::Identity], CheckStatus::Passed);
        assert!(res.rates.upper_ratio.is_some());
    }

    #[test]
    fn adversarial_noise_skips_lower_bound() {
        let c = flat(
            500,
            10,
            NoiseModel::ScaledDirection { target_norm: 1.0, direction: Direction::WorstSingular },
            4,
        );
        let res = run_experiment(&c).unwrap();
        assert_eq!(res.checks[&Check::LowerBound].to_string(), "skipped: hypothesis violated (noise depends on X)");
        assert!(res.rates.lower_ratio.is_none());
        assert_eq!(res.diagnostics.xi_norm, 1.0);
    }

    #[test]
    fn infinite_k_star_leaves_checks_unset() {
        let mut c = flat(50, 50, NoiseModel::Zero, 2);
        c.constants = Constants::default();
        let res = run_experiment(&c).unwrap();
        assert!(res.records.iter().all(|r| r.certificate_pass.is_none()));
        assert_eq!(res.checks[&Check::Certificate].to_string(), "skipped: k* infinite");
        assert!(!res.diagnostics.is_complete());
    }

    #[test]
    fn csv_has_fixed_columns() {
        let c = flat(100, 5, NoiseModel::Gaussian { sigma: 1.0 }, 3);
        let csv = run_experiment(&c).unwrap().trials_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRIAL_COLUMNS.join(","));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn aggregates_match_records() {
        let c = flat(100, 5, NoiseModel::Gaussian { sigma: 1.0 }, 9);
        let res = run_experiment(&c).unwrap();
        let preds: Vec<f64> = res.records.iter().map(|r| r.pred_error).collect();
        assert_eq!(res.metric("pred_error").unwrap(), &Summary::of(&preds).unwrap());
        let rate = res.rates.certificate_pass_rate.unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn vanished_noise_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("xi.txt");
        std::fs::write(&path, "1\n2\n").unwrap();
        let c = flat(
            20,
            2,
            NoiseModel::Deterministic { values: VectorSource::File { path: path.display().to_string() } },
            3,
        );
        assert!(run_experiment(&c).is_ok());
        std::fs::remove_file(&path).unwrap();
        assert!(matches!(run_experiment(&c), Err(ExperimentError::Config(_))));
    }
}
