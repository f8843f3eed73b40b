//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::experiments::{
    parse_sweep, robustness_sweep, run, write_summary_csv, Controller, ExperimentError,
    SUMMARY_HEADER,
};
use crate::model::ModelError;
use crate::quasiharmonic::polynomial_coefficients;
use crate::{sci, selftest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "flatdiode",
    version,
    about = "Flatness-based laser-diode pre-compensation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write the per-sample CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `controller` key.
        #[arg(long)]
        controller: Option<String>,
        /// Overrides the `output` key; without either the CSV goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-run the scenario with scaled plant constants, e.g. `tau_n:2.0,tau_p:0.5`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the six polynomial pre-compensator coefficients.
    Coeffs {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::Model(ModelError::StateDiverged { .. }) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            controller,
            output,
        } => cmd_run(&config, controller.as_deref(), output.as_deref(), out, err),
        Command::Sweep {
            config,
            sweep,
            controller,
            output,
        } => cmd_sweep(
            &config,
            &sweep,
            controller.as_deref(),
            output.as_deref(),
            out,
        ),
        Command::Coeffs { config } => cmd_coeffs(&config, out),
        Command::Selftest => cmd_selftest(out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(config: &Path, controller: Option<&str>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(name) = controller {
        cfg.controller = name.parse::<Controller>().map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: format!("--controller: {e}"),
        })?;
    }
    Ok(cfg)
}

fn cmd_run(
    config: &Path,
    controller: Option<&str>,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let cfg = load(config, controller)?;
    let result = run(&cfg.scenario()?)?;
    let row = result.summary_row();
    match output.map(Path::to_path_buf).or(cfg.output) {
        Some(path) => {
            let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
            let mut w = BufWriter::new(file);
            result
                .write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_failure(&path, e))?;
            writeln!(out, "{SUMMARY_HEADER}\n{row}")
                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
        }
        None => {
            result
                .write_csv(&mut *out)
                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
            let _ = writeln!(err, "{SUMMARY_HEADER}\n{row}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(
    config: &Path,
    sweep: &str,
    controller: Option<&str>,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let cfg = load(config, controller)?;
    let perturbations = parse_sweep(sweep).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("--sweep: {e}"),
    })?;
    let base = cfg.scenario()?;
    let rows = robustness_sweep(&base, &perturbations)?;
    match output.map(Path::to_path_buf).or(cfg.output) {
        Some(path) => {
            let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
            let mut w = BufWriter::new(file);
            write_summary_csv(&rows, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_failure(&path, e))?;
        }
        None => {
            write_summary_csv(&rows, &mut *out).map_err(|e| io_failure(Path::new("<stdout>"), e))?
        }
    }
    Ok(EXIT_OK)
}

fn cmd_coeffs(config: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load(config, None)?;
    let p = polynomial_coefficients(cfg.spec.y_bar(), cfg.spec.omega(), &cfg.constants);
    let values: Vec<String> = p.as_array().iter().map(|v| sci(*v)).collect();
    writeln!(out, "k0,ks,kc,kss,kcc,ksc\n{}", values.join(","))
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(EXIT_OK)
}

fn cmd_selftest(out: &mut dyn Write) -> Result<i32, Failure> {
    let checks = selftest::run_all();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status}  {}: {}", c.name, c.detail)
            .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERICAL })
}
