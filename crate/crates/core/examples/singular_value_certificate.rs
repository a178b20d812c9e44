//! How often `σ_n(X) ≥ √r_{k*} / 4` holds across seeded design draws.
//!
//! Two cases: a wide flat design, where the certificate should hold
//! every time, and the one-dimensional case `n = p = 1`, where `σ_1` is
//! `|g|` and the pass rate is `P(|g| ≥ 1/4) ≈ 0.8026`.
//!
//! ```text
//! cargo run --example singular_value_certificate
//! ```

use minnorm::experiments::{certificate_study, CertificateStudyConfig, RunOptions};
use minnorm::spectra::SpectrumSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wide = CertificateStudyConfig {
        spectrum: SpectrumSpec::Flat { p: 2000, value: 1.0 },
        rotation_seed: None,
        n: 20,
        c0: 10.0,
        trials: 200,
        seed: 1,
        allow_low_dim: false,
    };
    let study = certificate_study(&wide, &RunOptions::default())?;
    println!("flat 2000x20: {}", study.summary_line());

    let scalar = CertificateStudyConfig {
        spectrum: SpectrumSpec::Flat { p: 1, value: 1.0 },
        n: 1,
        c0: 1.0,
        trials: 1000,
        allow_low_dim: true,
        ..wide
    };
    let study = certificate_study(&scalar, &RunOptions::default())?;
    println!("scalar:       {}", study.summary_line());
    print!("{}", study.histogram_csv());
    Ok(())
}
