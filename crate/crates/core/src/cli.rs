//! Command-line front end.
//!
//! Settings are layered, later layers winning: built-in defaults, the JSON
//! config file (`--config`), `--set key=value` overrides (dotted paths
//! into the config), `MINNORM_*` environment variables, then flags.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infinite `k*`
//! (or a zero tail at `k*`), 3 hard-check failure (identity residual) or
//! an aborted run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::diagnostics::full_report;
use crate::error::DiagnosticsError;
use crate::experiments::{
    certificate_study, log_grid, run_experiment_with, snr_scan, CertificateStudyConfig, ExperimentConfig,
    ExperimentError, RunOptions, SCHEMA_VERSION,
};
use crate::output::to_json_string;

const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "minnorm", version, about = "Minimum-norm interpolation: diagnostics and Monte Carlo experiments")]
struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral complexity quantities and bound values (no sampling).
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// ‖ξ‖₂; defaults to the noise model's fixed or expected norm.
        #[arg(long, env = "MINNORM_XI_NORM")]
        xi_norm: Option<f64>,
    },
    /// Repeated seeded trials of one configuration.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep ‖β*‖²/E‖ξ‖² over a log-spaced grid.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        /// LO:HI:N, N log-spaced points.
        #[arg(long, env = "MINNORM_SNR_GRID")]
        snr_grid: String,
    },
    /// Singular-value certificate frequency and σ_n histogram.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the eigenvalues of a spectrum, one per line.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BetaDirectionArg {
    E1,
    Random,
    Top,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON experiment config.
    #[arg(long, env = "MINNORM_CONFIG")]
    config: Option<PathBuf>,
    /// Config override KEY=VALUE (dotted path; VALUE parsed as JSON, else a string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Flat spectrum: P [VALUE].
    #[arg(long, num_args = 1..=2, value_names = ["P", "VALUE"], group = "spectrum_source")]
    flat: Option<Vec<String>>,
    /// λ_k = e^{-k/τ} + ε: P TAU EPS.
    #[arg(long, num_args = 3, value_names = ["P", "TAU", "EPS"], group = "spectrum_source")]
    exp_floor: Option<Vec<String>>,
    /// Three plateaus 1, ε1, ε2: K1 CN P E1 E2.
    #[arg(long, num_args = 5, value_names = ["K1", "CN", "P", "E1", "E2"], group = "spectrum_source")]
    three_level: Option<Vec<String>>,
    /// Eigenvalues, comma- or newline-separated.
    #[arg(long, env = "MINNORM_SPECTRUM_FILE", group = "spectrum_source")]
    spectrum_file: Option<String>,

    #[arg(long, env = "MINNORM_N")]
    n: Option<usize>,
    #[arg(long, env = "MINNORM_BETA_NORM")]
    beta_norm: Option<f64>,
    #[arg(long, value_enum, env = "MINNORM_BETA_DIRECTION")]
    beta_direction: Option<BetaDirectionArg>,
    /// zero | gaussian:S | student:DF:S | worst:S | file:PATH
    #[arg(long, env = "MINNORM_NOISE")]
    noise: Option<String>,
    #[arg(long, env = "MINNORM_TRIALS")]
    trials: Option<usize>,
    #[arg(long, env = "MINNORM_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MINNORM_C0")]
    c0: Option<f64>,
    #[arg(long, env = "MINNORM_ETA")]
    eta: Option<f64>,
    #[arg(long, env = "MINNORM_GAMMA")]
    gamma: Option<f64>,
    #[arg(long, env = "MINNORM_C3")]
    c3: Option<f64>,
    #[arg(long, env = "MINNORM_C_FRAC")]
    c_frac: Option<f64>,
    /// Permit p < n or a rank-deficient covariance.
    #[arg(long)]
    allow_low_dim: bool,

    /// Output path stem; extensions are added per file.
    #[arg(long, env = "MINNORM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json", env = "MINNORM_FORMAT")]
    format: Format,
    /// Worker-thread cap. Never changes results.
    #[arg(long, env = "MINNORM_THREADS")]
    threads: Option<usize>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Diagnostics(DiagnosticsError::InfiniteKStar | DiagnosticsError::DegenerateTail) => 2,
            ExperimentError::Aborted { .. } => 3,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Diagnose { common, xi_norm } => cmd_diagnose(&common, xi_norm),
        Command::Simulate { common } => cmd_simulate(&common),
        Command::Scan { common, snr_grid } => cmd_scan(&common, &snr_grid),
        Command::Certify { common } => cmd_certify(&common),
        Command::Spectrum { common } => cmd_spectrum(&common),
    }
}

fn num<T: std::str::FromStr>(flag: &str, text: &str) -> Result<T, CliError> {
    text.parse().map_err(|_| CliError::usage(format!("{flag}: cannot parse {text:?}")))
}

/// `zero | gaussian:S | student:DF:S | worst:S | file:PATH` as config JSON.
fn noise_json(spec: &str) -> Result<Value, CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let f = |t: &str| num::<f64>("--noise", t);
    let parts: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(':').collect() };
    let bad = || CliError::usage(format!("--noise: cannot parse {spec:?}"));
    Ok(match (kind, parts.as_slice()) {
        ("zero", []) => json!({"type": "zero"}),
        ("gaussian", [s]) => json!({"type": "gaussian", "sigma": f(s)?}),
        ("student", [df, s]) => json!({"type": "student_t", "df": f(df)?, "scale": f(s)?}),
        ("worst", [s]) => json!({"type": "scaled_direction", "target_norm": f(s)?, "direction": "worst_singular"}),
        ("file", _) if !rest.is_empty() => json!({"type": "deterministic", "values": {"path": rest}}),
        _ => return Err(bad()),
    })
}

fn spectrum_json(a: &CommonArgs) -> Result<Option<Value>, CliError> {
    if let Some(v) = &a.flat {
        let p: usize = num("--flat", &v[0])?;
        let value: f64 = v.get(1).map_or(Ok(1.0), |t| num("--flat", t))?;
        return Ok(Some(json!({"kind": "flat", "p": p, "value": value})));
    }
    if let Some(v) = &a.exp_floor {
        let p: usize = num("--exp-floor", &v[0])?;
        let (tau, eps): (f64, f64) = (num("--exp-floor", &v[1])?, num("--exp-floor", &v[2])?);
        return Ok(Some(json!({"kind": "exp_floor", "p": p, "tau": tau, "eps": eps})));
    }
    if let Some(v) = &a.three_level {
        let k1: usize = num("--three-level", &v[0])?;
        let cn: usize = num("--three-level", &v[1])?;
        let p: usize = num("--three-level", &v[2])?;
        let (e1, e2): (f64, f64) = (num("--three-level", &v[3])?, num("--three-level", &v[4])?);
        return Ok(Some(json!({"kind": "three_level", "k1": k1, "c_times_n": cn, "p": p, "eps1": e1, "eps2": e2})));
    }
    Ok(a.spectrum_file.as_ref().map(|path| json!({"kind": "file", "path": path})))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("--set: bad key {key:?}")));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::usage(format!("--set {key}: {part} is not an object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node.as_object_mut().ok_or_else(|| CliError::usage(format!("--set {key}: parent is not an object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Merges defaults, file, `--set` and flags into a validated config.
fn resolve_config(a: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut root = json!({
        "schema": SCHEMA_VERSION,
        "noise": {"type": "gaussian", "sigma": 1.0},
        "trials": DEFAULT_TRIALS,
        "seed": 0,
    });
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let Value::Object(file) = file else {
            return Err(CliError::usage(format!("{}: config must be a JSON object", path.display())));
        };
        root.as_object_mut().expect("object").extend(file);
    }
    for item in &a.set {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut root, key.trim(), value)?;
    }

    if let Some(s) = spectrum_json(a)? {
        root["spectrum"] = s;
    }
    if let Some(n) = a.n {
        root["n"] = json!(n);
    }
    if let Some(noise) = &a.noise {
        root["noise"] = noise_json(noise)?;
    }
    if let Some(t) = a.trials {
        root["trials"] = json!(t);
    }
    if let Some(s) = a.seed {
        root["seed"] = json!(s);
    }
    if a.allow_low_dim {
        root["allow_low_dim"] = json!(true);
    }
    if a.beta_norm.is_some() || a.beta_direction.is_some() {
        let beta = root
            .as_object_mut()
            .expect("object")
            .entry("beta_star")
            .or_insert_with(|| json!({"norm": 1.0}));
        let beta = beta.as_object_mut().ok_or_else(|| CliError::usage("beta_star must be an object"))?;
        if let Some(norm) = a.beta_norm {
            beta.remove("values");
            beta.insert("norm".into(), json!(norm));
        }
        if let Some(d) = a.beta_direction {
            let name = match d {
                BetaDirectionArg::E1 => "e1",
                BetaDirectionArg::Random => "random",
                BetaDirectionArg::Top => "top",
            };
            beta.insert("direction".into(), json!(name));
        }
    }
    for (name, v) in [("c0", a.c0), ("eta", a.eta), ("gamma", a.gamma), ("c3", a.c3), ("c_frac", a.c_frac)] {
        if let Some(v) = v {
            set_path(&mut root, &format!("constants.{name}"), json!(v))?;
        }
    }

    if root.get("spectrum").is_none() {
        return Err(CliError::usage(
            "missing spectrum: give --flat, --exp-floor, --three-level, --spectrum-file or a config file",
        ));
    }
    if root.get("n").is_none() {
        return Err(CliError::usage("missing --n"));
    }
    let config: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn options(a: &CommonArgs) -> RunOptions {
    RunOptions { threads: a.threads }
}

/// Writes `contents` to `<stem><suffix>`, or to stdout without `--out`.
fn emit(a: &CommonArgs, suffix: &str, contents: &str) -> Result<(), CliError> {
    match &a.out {
        Some(stem) => {
            let path = with_suffix(stem, suffix);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("json" | "csv") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let mut s = base.into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn json_text<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    to_json_string(value).map_err(|e| CliError::usage(format!("serialization: {e}")))
}

/// CSV files start with a `#` line carrying the resolved config.
fn with_config_header<T: Serialize>(config: &T, csv: &str) -> Result<String, CliError> {
    let compact = serde_json::to_string(config).map_err(|e| CliError::usage(format!("serialization: {e}")))?;
    Ok(format!("# config: {compact}\n{csv}"))
}

fn wants_json(a: &CommonArgs) -> bool {
    matches!(a.format, Format::Json | Format::Both)
}

fn wants_csv(a: &CommonArgs) -> bool {
    matches!(a.format, Format::Csv | Format::Both)
}

fn cmd_diagnose(a: &CommonArgs, xi_norm: Option<f64>) -> Result<i32, CliError> {
    let config = resolve_config(a)?;
    let prepared = config.prepare()?;
    let xi = match xi_norm {
        Some(x) => x,
        None => match prepared.noise.fixed_norm() {
            Some(x) => x,
            None => prepared.noise.expected_norm_sq(config.n).map_err(ExperimentError::from)?.sqrt(),
        },
    };
    let report = full_report(prepared.cov.spectrum(), config.n, prepared.beta_star.norm(), xi, &config.constants)
        .map_err(ExperimentError::from)?;
    #[derive(Serialize)]
    struct Output<'a> {
        config: &'a ExperimentConfig,
        xi_norm: f64,
        report: &'a crate::diagnostics::DiagnosticsReport,
    }
    emit(a, ".json", &json_text(&Output { config: &config, xi_norm: xi, report: &report })?)?;
    if let Some(err) = &report.error {
        eprintln!("error: {err}");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_simulate(a: &CommonArgs) -> Result<i32, CliError> {
    let config = resolve_config(a)?;
    let (result, aborted) = match run_experiment_with(&config, &options(a)) {
        Ok(r) => (r, None),
        Err(ExperimentError::Aborted { trial_index, message, partial }) => {
            (*partial, Some(format!("aborted at trial {trial_index}: {message}")))
        }
        Err(e) => return Err(e.into()),
    };
    if wants_json(a) {
        emit(a, ".json", &json_text(&result)?)?;
    }
    if wants_csv(a) {
        emit(a, ".csv", &with_config_header(&config, &result.trials_csv())?)?;
    }
    if a.out.is_some() {
        print!("{}", result.summary_table());
    } else {
        eprint!("{}", result.summary_table());
    }
    if let Some(msg) = aborted {
        eprintln!("error: {msg}");
        return Ok(3);
    }
    if result.identity_failed() {
        eprintln!("error: interpolation identity check failed");
        return Ok(3);
    }
    Ok(0)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(CliError::usage(format!("--snr-grid expects LO:HI:N, got {text:?}")));
    };
    let grid = log_grid(num("--snr-grid", lo)?, num("--snr-grid", hi)?, num("--snr-grid", n)?)?;
    Ok(grid)
}

fn cmd_scan(a: &CommonArgs, grid_spec: &str) -> Result<i32, CliError> {
    let config = resolve_config(a)?;
    let grid = parse_grid(grid_spec)?;
    let scan = snr_scan(&config, &grid, &options(a))?;
    #[derive(Serialize)]
    struct Output<'a> {
        config: &'a ExperimentConfig,
        snr_grid: &'a [f64],
        scan: &'a crate::experiments::ScanResult,
    }
    #[derive(Serialize)]
    struct Header<'a> {
        config: &'a ExperimentConfig,
        snr_grid: &'a [f64],
    }
    let header = Header { config: &config, snr_grid: &grid };
    if wants_json(a) {
        emit(a, ".json", &json_text(&Output { config: &config, snr_grid: &grid, scan: &scan })?)?;
    }
    if wants_csv(a) {
        emit(a, ".csv", &with_config_header(&header, &scan.scan_csv())?)?;
        emit(a, ".trials.csv", &with_config_header(&header, &scan.trials_csv())?)?;
    }
    if a.out.is_some() {
        emit(a, ".plot.csv", &with_config_header(&header, &scan.plot_csv())?)?;
    }
    let code = if scan.points.iter().any(|p| p.result.identity_failed()) {
        eprintln!("error: interpolation identity check failed");
        3
    } else {
        0
    };
    Ok(code)
}

fn cmd_certify(a: &CommonArgs) -> Result<i32, CliError> {
    let config = resolve_config(a)?;
    let study_config = CertificateStudyConfig {
        spectrum: config.spectrum.clone(),
        rotation_seed: config.rotation_seed,
        n: config.n,
        c0: config.constants.c0,
        trials: config.trials,
        seed: config.seed,
        allow_low_dim: config.allow_low_dim,
    };
    let study = certificate_study(&study_config, &options(a))?;
    if wants_json(a) {
        emit(a, ".json", &json_text(&study)?)?;
    }
    if wants_csv(a) {
        emit(a, ".histogram.csv", &with_config_header(&study_config, &study.histogram_csv())?)?;
    }
    if a.out.is_some() {
        println!("{}", study.summary_line());
    } else {
        eprintln!("{}", study.summary_line());
    }
    Ok(0)
}

fn cmd_spectrum(a: &CommonArgs) -> Result<i32, CliError> {
    let spec = spectrum_json(a)?.ok_or_else(|| {
        CliError::usage("missing spectrum: give --flat, --exp-floor, --three-level or --spectrum-file")
    })?;
    let spec: crate::spectra::SpectrumSpec =
        serde_json::from_value(spec).map_err(|e| CliError::usage(e.to_string()))?;
    let loaded = spec.build().map_err(ExperimentError::from)?;
    let s = &loaded.spectrum;
    if wants_json(a) {
        let out = json!({
            "spectrum": spec,
            "p": s.len(),
            "trace": s.trace(),
            "reordered": loaded.reordered,
            "values": s.values(),
        });
        emit(a, ".json", &json_text(&out)?)?;
    }
    if wants_csv(a) {
        emit(a, ".txt", &s.to_text())?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_specs() {
        assert_eq!(noise_json("zero").unwrap(), json!({"type": "zero"}));
        assert_eq!(noise_json("gaussian:0.5").unwrap()["sigma"], json!(0.5));
        assert_eq!(noise_json("student:3:2").unwrap()["df"], json!(3.0));
        assert_eq!(noise_json("worst:1").unwrap()["direction"], json!("worst_singular"));
        assert_eq!(noise_json("file:a:b.txt").unwrap()["values"]["path"], json!("a:b.txt"));
        assert!(noise_json("gaussian").is_err());
        assert!(noise_json("laplace:1").is_err());
    }

    #[test]
    fn dotted_set_paths() {
        let mut v = json!({"a": 1});
        set_path(&mut v, "constants.c0", json!(2.0)).unwrap();
        set_path(&mut v, "a", json!("x")).unwrap();
        assert_eq!(v, json!({"a": "x", "constants": {"c0": 2.0}}));
        assert!(set_path(&mut v, "a.b", json!(1)).is_err());
    }

    #[test]
    fn suffixes() {
        assert_eq!(with_suffix(Path::new("out/run.json"), ".csv"), PathBuf::from("out/run.csv"));
        assert_eq!(with_suffix(Path::new("out/run"), ".plot.csv"), PathBuf::from("out/run.plot.csv"));
    }

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("1:100:3").unwrap().len(), 3);
        assert!(parse_grid("1:100").is_err());
    }

    #[test]
    fn verify_cli_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
