//! Fit the minimum-norm interpolator on one sampled regression problem
//! and check the interpolation identity `ΔᵀΣΔ + deviation = ‖ξ‖²/n`.
//!
//! ```text
//! cargo run --example interpolate
//! ```

use minnorm::design::{deviation_term, estimation_error, min_norm_fit, prediction_error, sample_design, DEFAULT_REL_TOL};
use minnorm::rng::{trial_rng, Stream};
use minnorm::spectra::{make_exp_floor_spectrum, CovarianceModel};
use nalgebra::DVector;
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (50, 400);
    let cov = CovarianceModel::diagonal(make_exp_floor_spectrum(p, 10.0, 1e-3)?);
    let x = sample_design(&cov, n, &mut trial_rng(7, 0, Stream::Design), false)?;

    let beta_star = DVector::from_fn(p, |i, _| if i < 5 { 1.0 } else { 0.0 });
    let mut rng = trial_rng(7, 0, Stream::Noise);
    let xi = DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal));
    let y = x.mul_vec(&beta_star) + &xi;

    let fit = min_norm_fit(&x, &y, DEFAULT_REL_TOL)?;
    println!("rank {} of n = {n}, sigma_n = {:.4}, residual {:.2e}", fit.rank, fit.sigma_min, fit.residual_norm);
    println!("|beta_hat| = {:.4}, |beta*| = {:.4}", fit.beta_hat.norm(), beta_star.norm());

    let pred = prediction_error(&cov, &fit.beta_hat, &beta_star)?;
    let dev = deviation_term(&x, &cov, &fit.beta_hat, &beta_star)?;
    let target = xi.norm_squared() / n as f64;
    println!("prediction error {pred:.6}");
    println!("estimation error {:.6}", estimation_error(&fit.beta_hat, &beta_star)?);
    println!("pred + deviation = {:.12}, |xi|^2/n = {target:.12}", pred + dev);
    Ok(())
}
