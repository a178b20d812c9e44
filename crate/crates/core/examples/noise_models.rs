//! The same design family under every noise model, including noise
//! aligned with the worst singular direction of `X`.
//!
//! The estimation bound `‖β̂ − β*‖ ≤ ‖β*‖ + 4‖ξ‖/√r_{k*}` holds for any
//! noise; the adversarial direction is where it comes closest to tight.
//!
//! ```text
//! cargo run --example noise_models
//! ```

use minnorm::experiments::{run_experiment, BetaDirection, BetaSpec, ExperimentConfig};
use minnorm::noise::{Direction, NoiseModel};
use minnorm::spectra::SpectrumSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let models = [
        NoiseModel::Zero,
        NoiseModel::Gaussian { sigma: 0.5 },
        NoiseModel::StudentT { df: 2.0, scale: 0.5 },
        NoiseModel::ScaledDirection { target_norm: 3.0, direction: Direction::Uniform },
        NoiseModel::ScaledDirection { target_norm: 3.0, direction: Direction::WorstSingular },
    ];
    println!("{:>12} {:>12} {:>10} {:>9}  noise", "median pred", "median est", "est bound", "identity");
    for noise in models {
        let mut config = ExperimentConfig::new(SpectrumSpec::Flat { p: 1000, value: 1.0 }, 40, noise, 50, 3);
        // A weak signal so that the noise term is visible.
        config.beta_star = BetaSpec::with_norm(0.1, BetaDirection::E1);
        let r = run_experiment(&config)?;
        let est = r.metric("est_error").map_or(f64::NAN, |s| s.median);
        println!(
            "{:>12.4e} {:>12.4e} {:>10} {:>9}  {}",
            r.median_pred_error().unwrap_or(f64::NAN),
            est,
            r.rates.est_bound_pass_rate.map_or("n/a".into(), |v| format!("{v:.2}")),
            if r.identity_failed() { "FAILED" } else { "ok" },
            r.noise_label,
        );
    }
    Ok(())
}
