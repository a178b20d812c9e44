//! Interpolating targets that are not linear in `X`.
//!
//! With `Y = f` for an arbitrary response vector, the noise becomes the
//! model residual `ξ_i = f_i − ⟨X_i, β*⟩`, which depends on `X`. The
//! upper bounds still apply to the realized `‖ξ‖`; the lower-bound check
//! is skipped.
//!
//! ```text
//! cargo run --example misspecified_model
//! ```

use minnorm::experiments::{run_experiment, ExperimentConfig};
use minnorm::noise::{NoiseModel, VectorSource};
use minnorm::spectra::SpectrumSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 60;
    let f: Vec<f64> = (0..n).map(|i| (i as f64 / 6.0).sin() + 0.2 * (i % 3) as f64).collect();
    let mut config = ExperimentConfig::new(
        SpectrumSpec::ExpFloor { p: 600, tau: 15.0, eps: 1e-3 },
        n,
        NoiseModel::ModelResidual { f_values: VectorSource::Inline(f) },
        40,
        5,
    );
    config.constants.c0 = 1.0;
    let result = run_experiment(&config)?;
    println!("noise: {}", result.noise_label);
    print!("{}", result.summary_table());
    Ok(())
}
