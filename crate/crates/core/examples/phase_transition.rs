//! Sweep the signal-to-noise ratio across the threshold `1/r_{k*}` on an
//! exponential-with-floor spectrum and write the plot data.
//!
//! Below the threshold the prediction error tracks `‖ξ‖²/n`; above it,
//! `‖β*‖² r_{cn}/n`. The regime label flips once along the grid.
//!
//! ```text
//! cargo run --example phase_transition [plot.csv]
//! ```

use minnorm::diagnostics::Constants;
use minnorm::experiments::{log_grid, snr_scan, ExperimentConfig, RunOptions};
use minnorm::noise::NoiseModel;
use minnorm::spectra::SpectrumSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::new(
        SpectrumSpec::ExpFloor { p: 300, tau: 20.0, eps: 1e-4 },
        100,
        NoiseModel::Gaussian { sigma: 1.0 },
        20,
        2024,
    );
    config.constants = Constants { c0: 0.5, ..Constants::default() };

    let prepared = config.prepare()?;
    let threshold = 1.0 / prepared.r_kstar.ok_or("k* infinite")?;
    let grid = log_grid(threshold * 1e-3, threshold * 1e3, 13)?;
    let scan = snr_scan(&config, &grid, &RunOptions::default())?;

    println!("threshold 1/r_k* = {threshold:.4e}, switches: {}", scan.regime_switches());
    println!("{:>12} {:>8} {:>14} {:>14}", "snr", "regime", "median pred", "|xi|^2/n");
    for point in &scan.points {
        let xi_sq = point.result.metric("xi_norm_sq").map_or(f64::NAN, |s| s.median);
        println!(
            "{:>12.4e} {:>8} {:>14.5e} {:>14.5e}",
            point.snr,
            point.regime.map_or("-".into(), |r| format!("{r:?}")),
            point.result.median_pred_error().unwrap_or(f64::NAN),
            xi_sq / config.n as f64,
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, scan.plot_csv())?;
        println!("plot data written to {path}");
    }
    Ok(())
}
