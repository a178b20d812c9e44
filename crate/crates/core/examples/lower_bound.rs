//! Low-SNR lower bound: with `β* = 0` the prediction error should not
//! fall far below `‖ξ‖² / (n ∧ k̄)`.
//!
//! The study refuses noise that depends on `X`, since the bound needs the
//! rows to stay independent given `ξ`.
//!
//! ```text
//! cargo run --example lower_bound
//! ```

use minnorm::diagnostics::Constants;
use minnorm::experiments::{lower_bound_study, BetaDirection, BetaSpec, ExperimentConfig, RunOptions, DEFAULT_LOWER_FLOOR};
use minnorm::noise::{Direction, NoiseModel};
use minnorm::spectra::SpectrumSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 100;
    let mut config =
        ExperimentConfig::new(SpectrumSpec::Flat { p: 3 * n, value: 1.0 }, n, NoiseModel::Gaussian { sigma: 1.0 }, 200, 11);
    config.beta_star = BetaSpec::with_norm(0.0, BetaDirection::E1);
    config.constants = Constants { c0: 1.0, ..Constants::default() };

    let study = lower_bound_study(&config, DEFAULT_LOWER_FLOOR, &RunOptions::default())?;
    let q = &study.ratios;
    println!("k_bar = {}, n ∧ k_bar = {}", study.k_bar, study.denominator_rank);
    println!("pred / (|xi|^2 / (n ∧ k_bar)): min {:.4}, median {:.4}, max {:.4}", q.min, q.median, q.max);
    println!("{} of {} trials below {}", study.below_floor.len(), config.trials, study.floor);

    config.noise = NoiseModel::ScaledDirection { target_norm: 10.0, direction: Direction::WorstSingular };
    match lower_bound_study(&config, DEFAULT_LOWER_FLOOR, &RunOptions::default()) {
        Ok(_) => println!("adversarial noise was accepted"),
        Err(e) => println!("adversarial noise refused: {e}"),
    }
    Ok(())
}
