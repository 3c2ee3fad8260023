//! Command-line front end: config ingestion, dispatch, and rendering.
//!
//! The binary is a thin sequential driver around the `prioloss` library;
//! all parallelism lives inside the simulator. Exit codes are part of the
//! scripting contract: 0 success, 2 configuration error, 3 numeric failure,
//! 4 usage error, 5 coverage failure under `--fail-on-noncoverage`.

pub mod args;
pub mod config;
pub mod output;
pub mod render;

use std::fs;
use std::path::Path;
use std::time::Instant;

use prioloss::{
    analyze, compare, run as run_simulation, write_replications_csv, AnalyticError, AnalyticReport,
    GammaMode, Protocol, SimError, SimulationReport, SystemModel,
};

pub use args::{Cli, Command};
use config::{build_model, load_config, resolve_sim_config, RunConfigFile, SimFlags};
use output::{to_json_bytes, OutputRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_NONCOVERAGE: i32 = 5;

/// A failure, classified by the exit status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, unparsable, or invalid configuration (exit 2).
    #[error("{0}")]
    Config(String),
    /// The analytic computation broke down numerically (exit 3).
    #[error("{0}")]
    Numeric(String),
    /// Unusable flag values or run parameters (exit 4).
    #[error("{0}")]
    Usage(String),
    /// `--fail-on-noncoverage` tripped (exit 5).
    #[error("{0}")]
    Noncoverage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Noncoverage(_) => EXIT_NONCOVERAGE,
        }
    }
}

fn analytic_error(err: AnalyticError) -> CliError {
    match &err {
        AnalyticError::InvalidModel(_) => CliError::Config(err.to_string()),
        _ => CliError::Numeric(err.to_string()),
    }
}

fn sim_error(err: SimError) -> CliError {
    match &err {
        SimError::InvalidModel(_) => CliError::Config(err.to_string()),
        _ => CliError::Usage(err.to_string()),
    }
}

/// Executes a parsed command line. Errors carry their exit status.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze {
            config,
            gamma_mode,
            protocol_override,
            json,
        } => cmd_analyze(config, *gamma_mode, *protocol_override, json.as_deref()),
        Command::Simulate {
            config,
            arrivals,
            replications,
            seed,
            warmup,
            protocol_override,
            json,
            csv,
        } => {
            let flags = SimFlags {
                arrivals: *arrivals,
                replications: *replications,
                seed: *seed,
                warmup: *warmup,
            };
            cmd_simulate(
                config,
                &flags,
                *protocol_override,
                json.as_deref(),
                csv.as_deref(),
            )
        }
        Command::Compare {
            config,
            gamma_mode,
            arrivals,
            replications,
            seed,
            warmup,
            protocol_override,
            json,
            csv,
            fail_on_noncoverage,
        } => {
            let flags = SimFlags {
                arrivals: *arrivals,
                replications: *replications,
                seed: *seed,
                warmup: *warmup,
            };
            cmd_compare(
                config,
                *gamma_mode,
                &flags,
                *protocol_override,
                json.as_deref(),
                csv.as_deref(),
                *fail_on_noncoverage,
            )
        }
    }
}

fn prepare(
    path: &Path,
    protocol_override: Option<Protocol>,
) -> Result<(RunConfigFile, SystemModel<f64>, Vec<String>), CliError> {
    let file = load_config(path)?;
    let (model, warnings) = build_model(&file.model, protocol_override)?;
    Ok((file, model, warnings))
}

fn resolve_gamma_mode(flag: Option<GammaMode>, file: &RunConfigFile) -> GammaMode {
    flag.or(file.analysis.as_ref().and_then(|a| a.gamma_mode))
        .unwrap_or_default()
}

fn emit_warnings<'a>(warnings: impl IntoIterator<Item = &'a String>) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn record(tool_start: Instant, seed: Option<u64>) -> OutputRecord {
    OutputRecord {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        elapsed_seconds: tool_start.elapsed().as_secs_f64(),
        analytic: None,
        simulation: None,
        comparison: None,
    }
}

fn write_json(path: &Path, record: &OutputRecord) -> Result<(), CliError> {
    let bytes = to_json_bytes(record)
        .map_err(|e| CliError::Numeric(format!("cannot serialize result document: {e}")))?;
    fs::write(path, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(path: &Path, report: &SimulationReport) -> Result<(), CliError> {
    let mut buffer = Vec::new();
    write_replications_csv(report, &mut buffer)
        .map_err(|e| CliError::Numeric(format!("cannot render CSV: {e}")))?;
    fs::write(path, buffer)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn cmd_analyze(
    path: &Path,
    mode_flag: Option<GammaMode>,
    protocol_override: Option<Protocol>,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (file, model, config_warnings) = prepare(path, protocol_override)?;
    let mode = resolve_gamma_mode(mode_flag, &file);
    let report = analyze(&model, mode).map_err(analytic_error)?;
    emit_warnings(config_warnings.iter().chain(&report.warnings));
    print!("{}", render::render_analytic(&model, &report));
    if let Some(json_path) = json {
        let mut rec = record(started, None);
        rec.analytic = Some(report);
        write_json(json_path, &rec)?;
    }
    Ok(())
}

fn cmd_simulate(
    path: &Path,
    flags: &SimFlags,
    protocol_override: Option<Protocol>,
    json: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (file, model, config_warnings) = prepare(path, protocol_override)?;
    let sim_config = resolve_sim_config(file.simulation.as_ref(), flags);
    let report = run_simulation(&model, &sim_config).map_err(sim_error)?;
    emit_warnings(&config_warnings);
    print!("{}", render::render_simulation(&report));
    if let Some(csv_path) = csv {
        write_csv(csv_path, &report)?;
    }
    if let Some(json_path) = json {
        let mut rec = record(started, Some(sim_config.base_seed));
        rec.simulation = Some(report);
        write_json(json_path, &rec)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    path: &Path,
    mode_flag: Option<GammaMode>,
    flags: &SimFlags,
    protocol_override: Option<Protocol>,
    json: Option<&Path>,
    csv: Option<&Path>,
    fail_on_noncoverage: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (file, model, config_warnings) = prepare(path, protocol_override)?;
    let mode = resolve_gamma_mode(mode_flag, &file);
    let analytic: AnalyticReport<f64> = analyze(&model, mode).map_err(analytic_error)?;
    let sim_config = resolve_sim_config(file.simulation.as_ref(), flags);
    let simulation = run_simulation(&model, &sim_config).map_err(sim_error)?;
    let comparison = compare(&analytic, &simulation).map_err(sim_error)?;
    emit_warnings(config_warnings.iter().chain(&analytic.warnings));
    print!("{}", render::render_comparison(&comparison));
    if let Some(csv_path) = csv {
        write_csv(csv_path, &simulation)?;
    }
    if let Some(json_path) = json {
        let mut rec = record(started, Some(sim_config.base_seed));
        rec.analytic = Some(analytic);
        rec.simulation = Some(simulation);
        rec.comparison = Some(comparison.clone());
        write_json(json_path, &rec)?;
    }
    if fail_on_noncoverage && !comparison.loss_covered() {
        return Err(CliError::Noncoverage(
            "analytic total loss fell outside the simulation confidence interval \
             for at least one class"
                .to_string(),
        ));
    }
    Ok(())
}
