//! Configuration-driven experiment runner for coined-quantum-walk
//! recurrence studies.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qwalk_core::fourier::{self, MomentumGrid};
use qwalk_core::recurrence::{
    classify, monte_carlo_polya, polya_number, reconcile, Classification, MonteCarloEstimate,
    PolyaEstimate, TailPolicy,
};
use qwalk_core::spectral::{
    analyze_spectrum, predict_exponent, ExponentPrediction, StationaryFeature,
};
use qwalk_core::walk::WalkSpec;
use qwalk_core::{Error as CoreError, ReturnSeries};

mod config;
mod output;

use config::{Engine, ExperimentConfig};

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  configuration error (parse, schema, invalid field)
  3  file I/O error
  4  walk-construction error (non-unitary coin, dimension mismatch, bad state)
  5  numerical-engine error (eigensolver, grid bound, fit)
  6  verification failure (direct-vs-fourier deviation above 1e-10)

On failure a machine-readable record {\"error\": .., \"message\": .., \"exit_code\": ..}
is printed to stderr.

Environment:
  QWALK_THREADS  overrides the config `threads` field (0 = automatic).

`verify` and `simulate` with engine `both` compare engines over
t <= min(steps, 20): the direct oracle grows exponentially with t in d = 2,
and oracle equivalence at 1e-10 is defined on that horizon.";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Domain(CoreError),
    VerifyFailed { max_deviation: f64 },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Domain(e) => match e {
                CoreError::NonUnitaryCoin { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::UnnormalizedInitialState { .. }
                | CoreError::InvalidShiftSet { .. }
                | CoreError::UnnormalizedFamilyParameters { .. } => "domain",
                _ => "numerical",
            },
            CliError::VerifyFailed { .. } => "verify",
        }
    }

    fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "io" => 3,
            "domain" => 4,
            "numerical" => 5,
            "verify" => 6,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Domain(e) => e.to_string(),
            CliError::VerifyFailed { max_deviation } => {
                format!(
                    "direct-vs-fourier deviation {:.3e} exceeds 1e-10",
                    max_deviation
                )
            }
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Domain(e)
    }
}

#[derive(Parser)]
#[command(
    name = "qwalk",
    version,
    about = "Coined quantum walks on Z^d: return probabilities, Polya numbers, spectra",
    after_help = EXIT_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the return-probability series and write it as CSV.
    Simulate(CommonArgs),
    /// Polya number, decay exponent, and recurrence verdict.
    Polya(CommonArgs),
    /// Spectral report: eigenphases, stationary features, predicted exponent.
    Spectrum(CommonArgs),
    /// Measure-and-discard ensemble estimate of the Polya number.
    Montecarlo(CommonArgs),
    /// Compare the direct and momentum-space engines and print the deviation.
    Verify(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunMeta {
    label: String,
    config_sha256: String,
    engine: String,
    steps: usize,
    grid: Option<usize>,
    exact: Option<bool>,
    version: &'static str,
}

#[derive(Serialize)]
struct PolyaSummary<'a> {
    meta: RunMeta,
    estimate: &'a PolyaEstimate,
    classification: &'a Classification,
    spectral_prediction: Option<&'a ExponentPrediction>,
    spectral_grid: usize,
    notes: &'a [String],
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    meta: RunMeta,
    spectral_grid: usize,
    features: &'a [StationaryFeature],
    prediction: Option<&'a ExponentPrediction>,
    notes: &'a [String],
}

#[derive(Serialize)]
struct MonteCarloSummary<'a> {
    meta: RunMeta,
    estimate: &'a MonteCarloEstimate,
    /// Truncated-product value on the same horizon, for consistency checks.
    deterministic_truncated: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    meta: RunMeta,
    horizon: usize,
    max_deviation: f64,
    passed: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let record = serde_json::json!({
            "error": err.kind(),
            "message": err.message(),
            "exit_code": err.exit_code(),
        });
        eprintln!("{}", record);
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Simulate(a)
        | Command::Polya(a)
        | Command::Spectrum(a)
        | Command::Montecarlo(a)
        | Command::Verify(a) => a,
    };
    let (mut config, raw) = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.output {
        config.output_dir = dir.clone();
    }
    init_threads(&config)?;
    let config_sha256 = hex::encode(Sha256::digest(&raw));
    let spec = config.walk_spec()?;

    match cli.command {
        Command::Simulate(_) => simulate(&config, &spec, config_sha256),
        Command::Polya(_) => polya(&config, &spec, config_sha256),
        Command::Spectrum(_) => spectrum(&config, &spec, config_sha256),
        Command::Montecarlo(_) => montecarlo(&config, &spec, config_sha256),
        Command::Verify(_) => verify(&config, &spec, config_sha256),
    }
}

fn init_threads(config: &ExperimentConfig) -> Result<(), CliError> {
    let n = match std::env::var("QWALK_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("QWALK_THREADS: '{}' is not a number", v)))?,
        Err(_) => config.threads,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {}", e)))?;
    }
    Ok(())
}

fn meta(config: &ExperimentConfig, series: Option<&ReturnSeries>, sha: &str) -> RunMeta {
    RunMeta {
        label: config.label.clone(),
        config_sha256: sha.to_string(),
        engine: format!("{:?}", config.engine).to_lowercase(),
        steps: config.steps,
        grid: series.and_then(|s| s.grid),
        exact: series.map(|s| s.exact),
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// Series via the configured engine. For `both`, the fourier series is
/// returned together with the max deviation against the direct oracle over
/// t <= min(steps, 20).
fn compute_series(
    config: &ExperimentConfig,
    spec: &WalkSpec,
) -> Result<(ReturnSeries, Option<f64>), CliError> {
    match config.engine {
        Engine::Direct => Ok((spec.return_series_direct(config.steps)?, None)),
        Engine::Fourier => {
            let n = config.series_grid(spec);
            let out = fourier::return_amplitude_series(spec, config.steps, n, config.approximate)?;
            Ok((out.series, None))
        }
        Engine::Both => {
            let n = config.series_grid(spec);
            let out = fourier::return_amplitude_series(spec, config.steps, n, config.approximate)?;
            let horizon = config.steps.min(20);
            let direct = spec.return_series_direct(horizon)?;
            let deviation = direct
                .p
                .iter()
                .zip(out.series.p.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            Ok((out.series, Some(deviation)))
        }
    }
}

fn spectral_prediction(
    config: &ExperimentConfig,
    spec: &WalkSpec,
) -> Result<(Option<ExponentPrediction>, Vec<String>), CliError> {
    let mut notes = Vec::new();
    let grid = MomentumGrid::build(spec, config.spectral_grid, true)?;
    let features = analyze_spectrum(&grid)?;
    match predict_exponent(&features, spec.initial_coin_state(), &grid) {
        Ok(pred) => Ok((Some(pred), notes)),
        Err(CoreError::NoFeatureSurvives { fastest_filtered }) => {
            notes.push(match fastest_filtered {
                Some(e) => format!(
                    "initial state filters every stationary feature; decay is at least t^-{}",
                    e
                ),
                None => "no stationary features: super-polynomial decay".to_string(),
            });
            Ok((None, notes))
        }
        Err(e) => Err(e.into()),
    }
}

fn simulate(config: &ExperimentConfig, spec: &WalkSpec, _sha: String) -> Result<(), CliError> {
    let (series, deviation) = compute_series(config, spec)?;
    output::ensure_dir(&config.output_dir)?;
    let path = output::artifact_path(&config.output_dir, &config.label, "series.csv");
    output::write_series_csv(&path, &series)?;
    println!("wrote {}", path.display());
    if let Some(dev) = deviation {
        println!(
            "max |p_direct - p_fourier| over t <= {}: {:.3e}",
            config.steps.min(20),
            dev
        );
    }
    Ok(())
}

fn polya(config: &ExperimentConfig, spec: &WalkSpec, sha: String) -> Result<(), CliError> {
    let (series, _) = compute_series(config, spec)?;
    let (prediction, mut notes) = spectral_prediction(config, spec)?;
    let mut estimate = polya_number(&series, TailPolicy::PowerLawExtrapolation)?;
    let classification = classify(&series, prediction.as_ref());
    reconcile(&mut estimate, &classification);
    if config.is_fourier_family_state() {
        notes.push(
            "fourier-family initial state: Polya value has no published reference, unverified"
                .to_string(),
        );
    }
    if !series.exact {
        notes.push("momentum grid below the exactness bound; series is approximate".to_string());
    }
    output::ensure_dir(&config.output_dir)?;
    let path = output::artifact_path(&config.output_dir, &config.label, "polya.json");
    output::write_json(
        &path,
        &PolyaSummary {
            meta: meta(config, Some(&series), &sha),
            estimate: &estimate,
            classification: &classification,
            spectral_prediction: prediction.as_ref(),
            spectral_grid: config.spectral_grid,
            notes: &notes,
        },
    )?;
    println!("wrote {}", path.display());
    println!(
        "verdict: {:?}, P = {}",
        classification.verdict,
        output::fmt_f64(estimate.polya)
    );
    Ok(())
}

fn spectrum(config: &ExperimentConfig, spec: &WalkSpec, sha: String) -> Result<(), CliError> {
    let grid = MomentumGrid::build(spec, config.spectral_grid, true)?;
    let features = analyze_spectrum(&grid)?;
    let mut notes = Vec::new();
    let prediction = match predict_exponent(&features, spec.initial_coin_state(), &grid) {
        Ok(p) => Some(p),
        Err(CoreError::NoFeatureSurvives { fastest_filtered }) => {
            notes.push(match fastest_filtered {
                Some(e) => format!(
                    "initial state filters every stationary feature; decay is at least t^-{}",
                    e
                ),
                None => "no stationary features: super-polynomial decay".to_string(),
            });
            None
        }
        Err(e) => return Err(e.into()),
    };
    output::ensure_dir(&config.output_dir)?;
    let csv_path = output::artifact_path(&config.output_dir, &config.label, "eigenphases.csv");
    output::write_eigenphase_csv(&csv_path, &grid)?;
    let json_path = output::artifact_path(&config.output_dir, &config.label, "spectrum.json");
    output::write_json(
        &json_path,
        &SpectrumSummary {
            meta: meta(config, None, &sha),
            spectral_grid: config.spectral_grid,
            features: &features,
            prediction: prediction.as_ref(),
            notes: &notes,
        },
    )?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    println!("features: {}", features.len());
    Ok(())
}

fn montecarlo(config: &ExperimentConfig, spec: &WalkSpec, sha: String) -> Result<(), CliError> {
    if config.records == 0 {
        return Err(CliError::Config(
            "records: must be at least 1 for montecarlo".into(),
        ));
    }
    let (series, _) = compute_series(config, spec)?;
    let estimate = monte_carlo_polya(&series, config.records, config.seed);
    let deterministic = 1.0
        - series
            .p
            .iter()
            .skip(1)
            .map(|p| (-p).ln_1p())
            .sum::<f64>()
            .exp();
    output::ensure_dir(&config.output_dir)?;
    let path = output::artifact_path(&config.output_dir, &config.label, "montecarlo.json");
    output::write_json(
        &path,
        &MonteCarloSummary {
            meta: meta(config, Some(&series), &sha),
            estimate: &estimate,
            deterministic_truncated: deterministic,
            deviation: (estimate.p_hat - deterministic).abs(),
        },
    )?;
    println!("wrote {}", path.display());
    println!(
        "P_hat = {} +- {}",
        output::fmt_f64(estimate.p_hat),
        output::fmt_f64(estimate.stderr)
    );
    Ok(())
}

fn verify(config: &ExperimentConfig, spec: &WalkSpec, sha: String) -> Result<(), CliError> {
    let horizon = config.steps.min(20);
    let direct = spec.return_series_direct(horizon)?;
    let n = fourier::nyquist_points(spec, horizon);
    let fourier_out = fourier::return_amplitude_series(spec, horizon, n, false)?;
    let max_deviation = direct
        .p
        .iter()
        .zip(fourier_out.series.p.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let passed = max_deviation < 1e-10;
    let report = VerifyReport {
        meta: meta(config, Some(&fourier_out.series), &sha),
        horizon,
        max_deviation,
        passed,
    };
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| CliError::Io(e.to_string()))?
    );
    println!("max deviation over t <= {}: {:.3e}", horizon, max_deviation);
    if !passed {
        return Err(CliError::VerifyFailed { max_deviation });
    }
    Ok(())
}
