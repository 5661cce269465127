//! Command-line front end wiring the pipeline stages into reproducible
//! batch jobs.
//!
//! Exit codes: 0 success, 2 validation error, 3 per-case partial failure
//! (results written, failures flagged in the tables), 4 internal error.

pub mod commands;
pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use commands::SimulateInput;
use config::JobConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "boltrom",
    about = "Reduced-order bolted-joint loosening: simulation, identification, synthetic experiments",
    version
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Job configuration (TOML); defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override the config's noise/campaign seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override the solver's relative tolerance.
    #[arg(long, global = true)]
    pub tol_rel: Option<f64>,
    /// Override the solver's absolute tolerance.
    #[arg(long, global = true)]
    pub tol_abs: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the bolt calibration polynomial from tension-test records.
    Calibrate {
        /// Strain record CSV (time_s, strain).
        #[arg(long)]
        strain: PathBuf,
        /// Force record CSV (time_s, force_N).
        #[arg(long)]
        force: PathBuf,
    },
    /// Estimate first-mode frequency/damping and invert the coupling
    /// stiffness and damping for every coupled-low case.
    IdentifyModal {
        /// Campaign manifest CSV.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Fit the constitutive models from identification tables.
    FitModels {
        /// Modal table (from identify-modal).
        #[arg(long)]
        modal: PathBuf,
        /// Loosening-rate table (from identify-gamma).
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Keep rows flagged with warnings instead of dropping them.
        #[arg(long)]
        keep_warnings: bool,
    },
    /// Identify the constant loosening rate for every loosening case.
    IdentifyGamma {
        /// Campaign manifest CSV.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Simulate the identified model against a stored case or a synthetic
    /// impulse; emits the trajectory and a comparison report.
    Simulate {
        /// Campaign manifest CSV (with --case-id).
        #[arg(long, requires = "case_id")]
        manifest: Option<PathBuf>,
        /// Case to reproduce from the manifest.
        #[arg(long)]
        case_id: Option<String>,
        /// Synthetic impulse amplitude (N), used when no case is given.
        #[arg(long, default_value_t = 30.0)]
        impulse_amp: f64,
        /// Synthetic impulse width (s).
        #[arg(long, default_value_t = 0.002)]
        impulse_width: f64,
        /// Initial bolt tension (N) for the synthetic impulse.
        #[arg(long, default_value_t = 1018.0)]
        preload: f64,
    },
    /// Generate the synthetic measurement campaign from the config.
    Synth,
    /// Print configuration.
    Config {
        /// Print the canonical default configuration as TOML.
        #[arg(long)]
        defaults: bool,
    },
}

fn load_config(args: &GlobalArgs) -> crate::Result<JobConfig> {
    let mut config = match &args.config {
        Some(path) => JobConfig::load(path)?,
        None => JobConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.synth.seed = seed;
    }
    if let Some(rel) = args.tol_rel {
        config.solver.rel_tol = rel;
    }
    if let Some(abs) = args.tol_abs {
        config.solver.abs_tol = abs;
    }
    config.validate()?;
    Ok(config)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        // bad inputs, files, or configuration
        Error::Validation(_)
        | Error::Toml(_)
        | Error::InvalidParameter(_)
        | Error::FlatSignal
        | Error::SignalTooShort { .. }
        | Error::InsufficientCoverage { .. }
        | Error::TooFewIntervals { .. }
        | Error::TooFewPeaks { .. }
        | Error::RankDeficient
        | Error::NonPositiveGamma { .. }
        | Error::Io(_)
        | Error::Csv(_) => EXIT_VALIDATION,
        _ => EXIT_INTERNAL,
    }
}

/// Run the parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.global.jobs {
        // the global pool can only be initialized once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let result = (|| -> crate::Result<i32> {
        match &cli.command {
            Command::Config { defaults } => {
                let config = if *defaults {
                    JobConfig::default()
                } else {
                    load_config(&cli.global)?
                };
                println!("{}", config.to_toml()?);
                Ok(EXIT_OK)
            }
            Command::Calibrate { strain, force } => {
                let report = commands::cmd_calibrate(strain, force, &cli.global.out)?;
                println!(
                    "calibration: coeffs = {:?}, R^2 = {:.6}, {} points",
                    report.coeffs, report.r_squared, report.n_points
                );
                Ok(EXIT_OK)
            }
            Command::IdentifyModal { manifest } => {
                let config = load_config(&cli.global)?;
                let summary = commands::cmd_identify_modal(manifest, &config, &cli.global.out)?;
                println!(
                    "identify-modal: {} cases, {} failed -> {}",
                    summary.processed,
                    summary.failed,
                    cli.global.out.join("modal.csv").display()
                );
                Ok(if summary.failed > 0 {
                    EXIT_PARTIAL
                } else {
                    EXIT_OK
                })
            }
            Command::FitModels {
                modal,
                gamma,
                keep_warnings,
            } => {
                let config = load_config(&cli.global)?;
                let report = commands::cmd_fit_models(
                    modal,
                    gamma.as_deref(),
                    &config,
                    &cli.global.out,
                    *keep_warnings,
                )?;
                println!(
                    "fit-models: stiffness R^2 = {:.4}, damping R^2 = {:.4}{} \
                     ({} rows used, {} dropped) -> {}",
                    report.stiffness_r_squared,
                    report.damping_r_squared,
                    report
                        .gamma_r_squared
                        .map(|r| format!(", loosening R^2 = {r:.4}"))
                        .unwrap_or_default(),
                    report.rows_used,
                    report.rows_dropped,
                    cli.global.out.join("model.toml").display()
                );
                Ok(EXIT_OK)
            }
            Command::IdentifyGamma { manifest } => {
                let config = load_config(&cli.global)?;
                let summary = commands::cmd_identify_gamma(manifest, &config, &cli.global.out)?;
                println!(
                    "identify-gamma: {} cases, {} failed -> {}",
                    summary.processed,
                    summary.failed,
                    cli.global.out.join("gamma.csv").display()
                );
                Ok(if summary.failed > 0 {
                    EXIT_PARTIAL
                } else {
                    EXIT_OK
                })
            }
            Command::Simulate {
                manifest,
                case_id,
                impulse_amp,
                impulse_width,
                preload,
            } => {
                let config = load_config(&cli.global)?;
                let input = match (manifest, case_id) {
                    (Some(manifest), Some(case_id)) => SimulateInput::Case { manifest, case_id },
                    _ => SimulateInput::Impulse {
                        amplitude_n: *impulse_amp,
                        width_s: *impulse_width,
                        preload_n: *preload,
                    },
                };
                let report = commands::cmd_simulate(&config, input, &cli.global.out)?;
                match (report.measured_final_n, report.percent_error_final_tension) {
                    (Some(measured), Some(percent)) => println!(
                        "simulate: T {:.4} -> {:.4} N (delta {:.4}); measured final {:.4} N, \
                         percent error {:.4}%",
                        report.t_initial_n, report.t_final_n, report.delta_n, measured, percent
                    ),
                    _ => println!(
                        "simulate: T {:.6} -> {:.6} N (delta {:.3e})",
                        report.t_initial_n, report.t_final_n, report.delta_n
                    ),
                }
                Ok(EXIT_OK)
            }
            Command::Synth => {
                let config = load_config(&cli.global)?;
                let summary = commands::cmd_synth(&config, &cli.global.out)?;
                println!(
                    "synth: {} coupled-low + {} loosening cases -> {}",
                    summary.coupled_cases,
                    summary.loosening_cases,
                    io::manifest_path(&cli.global.out).display()
                );
                Ok(EXIT_OK)
            }
        }
    })();

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
