//! Command-line harness: single simulations, parameter sweeps, region and
//! coherence maps, purity traces and the verification suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Format, Frame, RunConfig};
pub use error::{CliError, Result};
pub use output::{Cell, Report};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "qpurify",
    version,
    about = "Time-optimal purification of a qubit coupled to a dissipative defect"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub frame: Option<Frame>,
    /// Integrator tolerances.
    #[arg(long, global = true, value_name = "ABS:REL", value_parser = config::parse_tol)]
    pub tol: Option<config::ToleranceConfig>,
    /// Divergence horizon in units of T0 = pi/(2J).
    #[arg(long, global = true, value_name = "MULT")]
    pub horizon: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Propagate one initial state and write the trajectory.
    Simulate,
    /// Minimum time against gamma/J with and without correlations.
    ScanGamma,
    /// Minimum time against inverse temperature at fixed kappa.
    ScanBeta,
    /// Fixed-point regions over the (xi, J) plane.
    RegionMap,
    /// Purity gain over the (xi, mu_q) plane.
    CoherenceMap,
    /// Qubit purity against time for a grid of coherences.
    PurityTrace,
    /// Cross-check suite with residuals and integrator statistics.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ScanGamma => "scan-gamma",
            Command::ScanBeta => "scan-beta",
            Command::RegionMap => "region-map",
            Command::CoherenceMap => "coherence-map",
            Command::PurityTrace => "purity-trace",
            Command::Verify => "verify",
        }
    }
}

impl Cli {
    /// Configuration file (or defaults) with the command-line overrides
    /// applied.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.path = Some(out.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        if let Some(f) = self.frame {
            cfg.frame = f;
        }
        if let Some(t) = self.tol {
            cfg.tolerances = t;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds the report of `command`. Failed checks of `verify` are returned
/// alongside the report rather than as an error.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<(Report, Vec<String>)> {
    let report = match command {
        Command::Simulate => commands::simulate(cfg)?,
        Command::ScanGamma => commands::scan_gamma(cfg)?,
        Command::ScanBeta => commands::scan_beta(cfg)?,
        Command::RegionMap => commands::region_map(cfg)?,
        Command::CoherenceMap => commands::coherence_map(cfg)?,
        Command::PurityTrace => commands::purity_trace(cfg)?,
        Command::Verify => return verify::verify(cfg),
    };
    Ok((report, Vec::new()))
}

/// Runs the command and writes its output. Fails after writing when a
/// verification check fails.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    let (report, failed) = execute(cli.command, &cfg)?;
    let bytes = report.render(cfg.output.format);
    match &cfg.output.path {
        Some(path) => std::fs::write(path, &bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(&bytes).and_then(|_| out.flush()) {
                // a closed reader such as `head` is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r.map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?,
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed { failed })
    }
}
