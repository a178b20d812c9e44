//! SNR sweeps.
//!
//! Each grid point rescales `‖β*‖` so that `‖β*‖² / E‖ξ‖²` hits the target
//! while the noise model and seed stay fixed. Every point therefore sees
//! the same designs and noise draws, and only the signal moves.

use serde::Serialize;

use crate::diagnostics::Regime;
use crate::output::fmt_f64;

use super::{run_prepared, ExperimentConfig, ExperimentError, ExperimentResult, RunOptions, TRIAL_COLUMNS};

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, ExperimentError> {
    if points == 0 {
        return Err(ExperimentError::Invalid("grid needs at least one point".into()));
    }
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(ExperimentError::Invalid(format!("grid bounds must be positive and finite, got {lo}:{hi}")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    if !(hi > lo) {
        return Err(ExperimentError::Invalid(format!("grid needs lo < hi, got {lo}:{hi}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => (a + (b - a) * i as f64 / last).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub snr: f64,
    pub beta_norm: f64,
    pub regime: Option<Regime>,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// `1 / r_{k*}`.
    pub threshold_kstar: f64,
    /// `1 / r_{cn}`; infinite when `r_{cn} = 0`.
    pub threshold_cn: crate::diagnostics::Extended<f64>,
    pub points: Vec<ScanPoint>,
}

fn regime_label(r: Option<Regime>) -> String {
    r.map_or_else(String::new, |r| format!("{r:?}"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

impl ScanResult {
    /// Number of label changes along the grid.
    pub fn regime_switches(&self) -> usize {
        self.points.windows(2).filter(|w| w[0].regime != w[1].regime).count()
    }

    /// One row per grid point.
    pub fn scan_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "snr",
            "beta_norm",
            "regime",
            "threshold_kstar",
            "threshold_cn",
            "median_pred",
            "median_est",
            "certificate_pass_rate",
            "est_bound_pass_rate",
            "upper_ratio",
            "lower_ratio",
        ])
        .expect("in-memory write");
        let threshold_cn = self.threshold_cn.finite().map_or("inf".to_string(), fmt_f64);
        for p in &self.points {
            let r = &p.result;
            w.write_record([
                fmt_f64(p.snr),
                fmt_f64(p.beta_norm),
                regime_label(p.regime),
                fmt_f64(self.threshold_kstar),
                threshold_cn.clone(),
                opt(r.median_pred_error()),
                opt(r.metric("est_error").map(|s| s.median)),
                opt(r.rates.certificate_pass_rate),
                opt(r.rates.est_bound_pass_rate),
                opt(r.rates.upper_ratio),
                opt(r.rates.lower_ratio),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    /// Grid point → prediction-error quantiles and bound curves.
    pub fn plot_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "snr",
            "median_pred",
            "q05_pred",
            "q95_pred",
            "corollary_upper",
            "corollary_lower",
            "upper_bound",
            "lower_bound",
        ])
        .expect("in-memory write");
        for p in &self.points {
            let r = &p.result;
            let pred = r.metric("pred_error");
            let d = &r.diagnostics;
            w.write_record([
                fmt_f64(p.snr),
                opt(pred.map(|s| s.median)),
                opt(pred.map(|s| s.q05)),
                opt(pred.map(|s| s.q95)),
                fmt_f64(d.corollary_upper),
                opt(d.corollary_lower),
                opt(d.upper_bound),
                opt(d.lower_bound),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    /// Per-trial rows of every grid point, prefixed by `snr` and `regime`.
    pub fn trials_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = ["snr", "regime"].into_iter().chain(TRIAL_COLUMNS).collect();
        w.write_record(header).expect("in-memory write");
        for p in &self.points {
            for rec in &p.result.records {
                let mut row = vec![fmt_f64(p.snr), regime_label(p.regime)];
                row.extend(rec.csv_row());
                w.write_record(row).expect("in-memory write");
            }
        }
        into_string(w)
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Runs `base` once per target SNR in `grid` (positive, increasing).
///
/// Requires a finite `k*` so that the threshold `1/r_{k*}` exists, and a
/// noise model with finite `E‖ξ‖² > 0`.
pub fn snr_scan(base: &ExperimentConfig, grid: &[f64], options: &RunOptions) -> Result<ScanResult, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Invalid("SNR grid is empty".into()));
    }
    if grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(ExperimentError::Invalid("SNR grid values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExperimentError::Invalid("SNR grid must be strictly increasing".into()));
    }
    let prepared = base.prepare()?;
    let expected = prepared.noise.expected_norm_sq(base.n)?;
    let r_kstar = prepared.r_kstar.ok_or(crate::error::DiagnosticsError::InfiniteKStar)?;
    if prepared.beta_star.norm() == 0.0 && base.beta_star.values.is_some() {
        return Err(ExperimentError::Invalid("explicit β* = 0 has no direction to rescale".into()));
    }

    let mut points = Vec::with_capacity(grid.len());
    for &snr in grid {
        let beta_norm = (snr * expected).sqrt();
        let mut point = prepared.clone();
        let spec = &mut point.config.beta_star;
        match &mut spec.values {
            Some(values) => {
                let scale = beta_norm / prepared.beta_star.norm();
                values.iter_mut().for_each(|v| *v *= scale);
            }
            None => spec.norm = Some(beta_norm),
        }
        point.beta_star = spec.build(&point.cov, base.seed);
        let result = run_prepared(&point, options)?;
        log::info!("snr {snr:e}: median pred_error {:?}", result.median_pred_error());
        points.push(ScanPoint { snr, beta_norm, regime: result.diagnostics.regime, result });
    }
    let threshold_cn = points[0].result.diagnostics.snr_threshold_cn;
    Ok(ScanResult { threshold_kstar: 1.0 / r_kstar, threshold_cn, points })
}
