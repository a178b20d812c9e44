//! Spectral diagnostics for three covariance families.
//!
//! Prints `k*`, `r_{k*}`, the fixed points `r*` and `r̄`, `k̄`, and the
//! risk bounds for a flat, an exponential-with-floor and a three-level
//! spectrum at the same sample size.
//!
//! ```text
//! cargo run --example spectral_diagnostics
//! ```

use minnorm::diagnostics::{full_report, Constants};
use minnorm::spectra::{make_exp_floor_spectrum, make_flat_spectrum, make_three_level_spectrum, Spectrum};

fn show(name: &str, s: &Spectrum, n: usize, constants: &Constants) -> Result<(), Box<dyn std::error::Error>> {
    let report = full_report(s, n, 1.0, 2.0, constants)?;
    println!("{name} (p = {}, trace = {:.4})", s.len(), s.trace());
    match report.error {
        Some(err) => println!("  {err}"),
        None => {
            println!("  k* = {:?}, r_k* = {:.4e}, rho = {:.5}", report.k_star, report.r_kstar.unwrap_or(f64::NAN), report.rho.unwrap_or(f64::NAN));
            println!("  r* = {:.4e}, r_bar = {:?}, k_bar = {:?}", report.r_star, report.r_bar, report.k_bar);
            println!("  regime {:?}: upper {:.4e}, lower {:?}", report.regime, report.upper_bound.unwrap_or(f64::NAN), report.lower_bound);
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 100;
    let defaults = Constants::default();
    show("flat", &make_flat_spectrum(2000, 1.0)?, n, &defaults)?;
    // Exponential decay hits the floor around i = τ log(1/ε) ≈ 184; a
    // smaller c0 keeps k* finite at p = 300.
    let relaxed = Constants { c0: 0.5, ..defaults };
    show("exp-floor", &make_exp_floor_spectrum(300, 20.0, 1e-4)?, n, &relaxed)?;
    show("three-level", &make_three_level_spectrum(10, 50, 5000, 0.05, 0.002)?, n, &relaxed)?;
    // Too steep: every tail is dominated by its head.
    show("geometric", &Spectrum::new((0..200).map(|i| 0.5f64.powi(i)).collect())?, n, &defaults)?;
    Ok(())
}
