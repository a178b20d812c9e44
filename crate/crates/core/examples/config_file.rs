//! Run an experiment from a JSON config, as the `simulate` subcommand
//! does, and print the per-trial CSV.
//!
//! ```text
//! cargo run --example config_file [config.json]
//! ```

use minnorm::experiments::{run_experiment, ExperimentConfig};

const DEFAULT: &str = r#"{
  "schema": 1,
  "spectrum": {"kind": "three_level", "k1": 5, "c_times_n": 20, "p": 800, "eps1": 0.1, "eps2": 0.005},
  "n": 40,
  "beta_star": {"norm": 2.0, "direction": "top"},
  "noise": {"type": "student_t", "df": 3.0, "scale": 0.3},
  "trials": 8,
  "seed": 42,
  "constants": {"c0": 1.0, "eta": 0.05, "gamma": 0.5, "c3": 1.0, "c_frac": 0.5}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let config = ExperimentConfig::from_json(&text)?;
    let result = run_experiment(&config)?;
    print!("{}", result.trials_csv());
    eprintln!("regime {:?}, k* {:?}", result.diagnostics.regime, result.diagnostics.k_star);
    Ok(())
}
