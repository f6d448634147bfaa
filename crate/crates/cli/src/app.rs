//! Argument parsing and command dispatch.

use std::fs::File;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rateloss_core::asymptotics::dstar_solve;
use rateloss_core::bounds::{Agents, BoundEvaluator};
use rateloss_core::smoothing::QuadConfig;
use rateloss_core::sources::{info_summary, make_source, SourceKind, SourceModel, TabulatedDensity};
use serde_json::{json, Map, Value};

use crate::figures::{self, Figure};
use crate::sweep::{cell, default_range, log_grid, sweep_table, DEFAULT_POINTS};
use crate::table::Cell;
use crate::verify::{self, Suite, DEFAULT_SAMPLES};
use crate::{CliError, Units};

#[derive(Debug, Parser)]
#[command(name = "rateloss", version, about = "Rate-loss bounds for the Gaussian-noise CEO problem")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Units of rates and entropies in the output.
    #[arg(long, global = true, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    /// Tolerance of the adaptive channel integrals.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Truncation half-width of the convolution, in noise standard deviations.
    #[arg(long, global = true, default_value_t = 12.0)]
    pub trunc_k: f64,
    /// Seed for Monte Carlo estimates.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
}

impl Global {
    pub fn quad_config(&self) -> Result<QuadConfig, CliError> {
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return Err(CliError::Usage(format!("--quad-tol must lie in (0, 1), got {}", self.quad_tol)));
        }
        if !(self.trunc_k >= 4.0 && self.trunc_k.is_finite()) {
            return Err(CliError::Usage(format!("--trunc-k must be at least 4, got {}", self.trunc_k)));
        }
        Ok(QuadConfig {
            tol: self.quad_tol,
            trunc_k: self.trunc_k,
            ..QuadConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// gaussian, laplace, uniform or tabulated.
    #[arg(long)]
    pub source: SourceKind,
    /// Source variance. For tabulated sources it is optional and, when
    /// given, must match the table.
    #[arg(long, visible_alias = "sx2")]
    pub variance: Option<f64>,
    /// CSV of `x,pdf` pairs on a uniform grid, for tabulated sources.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

impl SourceArgs {
    pub fn build(&self) -> Result<SourceModel, CliError> {
        match (self.source, &self.table) {
            (SourceKind::Tabulated, Some(path)) => {
                let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                Ok(SourceModel::tabulated(TabulatedDensity::from_csv(file)?, self.variance)?)
            }
            (SourceKind::Tabulated, None) => Err(CliError::Usage("tabulated sources need --table".into())),
            (_, Some(_)) => Err(CliError::Usage("--table only applies to --source tabulated".into())),
            (kind, None) => Ok(make_source(kind, self.variance.unwrap_or(1.0))?),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy, entropy power and Fisher information of a source.
    Info {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Every bound at one distortion.
    Bounds {
        #[command(flatten)]
        source: SourceArgs,
        /// Observation noise variance of each agent.
        #[arg(long, default_value_t = 1.0)]
        sw2: f64,
        /// Number of agents, a positive integer or `inf`.
        #[arg(long = "M", short = 'M')]
        agents: Agents,
        /// Target distortion.
        #[arg(long = "D", short = 'D')]
        d: f64,
    },
    /// Every bound on a log-spaced distortion grid, as CSV.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1.0)]
        sw2: f64,
        #[arg(long = "M", short = 'M')]
        agents: Agents,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        /// Grid start; defaults to 1.01 times the Gaussian minimum distortion.
        #[arg(long)]
        d_lo: Option<f64>,
        /// Grid end; defaults to 0.999 times the source variance.
        #[arg(long)]
        d_hi: Option<f64>,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tables for the bound comparison figures.
    Figure {
        #[arg(long, value_enum)]
        name: Figure,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
    /// Crossover distortion of the previous and new many-agent bounds.
    Dstar {
        /// Entropy power of a unit-variance source.
        #[arg(long, conflicts_with = "source")]
        nx: Option<f64>,
        /// Take the entropy power from a built-in unit-variance source.
        #[arg(long)]
        source: Option<SourceKind>,
        #[arg(long)]
        snr: f64,
    },
    /// Run a verification suite and report every check.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
}

/// Standard output of a command, and the error that sets the exit code.
/// A failed verification still produces its report.
pub struct Outcome {
    pub stdout: String,
    pub error: Option<CliError>,
}

impl From<Result<String, CliError>> for Outcome {
    fn from(r: Result<String, CliError>) -> Self {
        match r {
            Ok(stdout) => Outcome { stdout, error: None },
            Err(e) => Outcome { stdout: String::new(), error: Some(e) },
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("{name} must be positive and finite, got {x}")))
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Verify { suite, samples } => {
            let report = g.quad_config().and_then(|c| verify::run(*suite, g.seed, *samples, c));
            match report {
                Ok(report) => {
                    let error = report.first_failure().map(|c| {
                        CliError::Verification(format!("check `{}` failed (measured {}, limit {})", c.name, c.measured, c.limit))
                    });
                    Outcome { stdout: pretty(&report), error }
                }
                Err(e) => Outcome { stdout: String::new(), error: Some(e) },
            }
        }
        cmd => run(cmd, g).into(),
    }
}

fn run(cmd: &Command, g: &Global) -> Result<String, CliError> {
    let config = g.quad_config()?;
    match cmd {
        Command::Info { source } => {
            let info = info_summary(&source.build()?)?;
            let mut v = serde_json::to_value(info).expect("serializable");
            v["h"] = json!(g.units.scale(info.h));
            v["units"] = json!(g.units);
            Ok(pretty(&v))
        }
        Command::Bounds { source, sw2, agents, d } => {
            let ev = BoundEvaluator::new(&source.build()?, positive("--sw2", *sw2)?, *agents, config)?;
            let d = positive("--D", *d)?;
            let mut out = Map::new();
            for (id, r) in ev.evaluate_all(d) {
                let entry = match cell(r, g.units)? {
                    Cell::Value(v) => json!({ "value": v, "region": "valid" }),
                    Cell::Marker(m) => json!({ "value": Value::Null, "region": m }),
                };
                out.insert(id.as_str().to_string(), entry);
            }
            Ok(pretty(&out))
        }
        Command::Sweep { source, sw2, agents, points, d_lo, d_hi, out } => {
            let model = source.build()?;
            let ev = BoundEvaluator::new(&model, positive("--sw2", *sw2)?, *agents, config)?;
            let (lo, hi) = default_range(model.variance(), *sw2, *agents);
            let (lo, hi) = (d_lo.unwrap_or(lo), d_hi.unwrap_or(hi));
            if !(lo > 0.0 && hi > lo && *points >= 2) {
                return Err(CliError::Usage(format!("bad grid: {points} points on [{lo}, {hi}]")));
            }
            let table = sweep_table(&ev, source.source.as_str(), &log_grid(lo, hi, *points), g.units, g.seed)?;
            match out {
                Some(path) => {
                    std::fs::write(path, table.to_csv_string())
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                    Ok(pretty(&json!({ "written": path.display().to_string(), "rows": table.rows.len() })))
                }
                None => Ok(table.to_csv_string()),
            }
        }
        Command::Figure { name, out } => {
            let written = figures::write(*name, out, config, g.units, g.seed)?;
            Ok(pretty(&json!({ "figure": name.as_str(), "written": written })))
        }
        Command::Dstar { nx, source, snr } => {
            let n_x = match (nx, source) {
                (Some(n), _) => *n,
                (None, Some(kind)) => info_summary(&make_source(*kind, 1.0)?)?.entropy_power,
                (None, None) => return Err(CliError::Usage("give --nx or --source".into())),
            };
            let r = dstar_solve(n_x, *snr)?;
            let mut v = serde_json::to_value(r).expect("serializable");
            v["N_X"] = json!(n_x);
            v["snr"] = json!(snr);
            Ok(pretty(&v))
        }
        Command::Verify { .. } => unreachable!("handled in execute"),
    }
}

/// Everything the process reports: standard output, standard error and the
/// exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exit {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Exit { stdout: e.to_string(), stderr: String::new(), code: 0 };
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            return Exit { stdout: String::new(), stderr: err.to_json() + "\n", code: err.exit_code() };
        }
    };
    let outcome = execute(&cli);
    match outcome.error {
        None => Exit { stdout: outcome.stdout, stderr: String::new(), code: 0 },
        Some(e) => Exit { stdout: outcome.stdout, stderr: e.to_json() + "\n", code: e.exit_code() },
    }
}
