//! Library behind the `rateloss` command: sweeps, figure tables, the D*
//! solver front end and the verification suites.

pub mod app;
pub mod figures;
pub mod sweep;
pub mod table;
pub mod verify;

use std::fmt;

use rateloss_core::asymptotics::AsymptoticsError;
use rateloss_core::bounds::BoundsError;
use rateloss_core::mc::McError;
use rateloss_core::smoothing::SmoothingError;
use rateloss_core::sources::SourceError;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn scale(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Failure categories, each with its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Verification(String),
    Usage(String),
    Quadrature(String),
    Figure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Quadrature(_) => 3,
            CliError::Figure(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Verification(_) => "verification",
            CliError::Usage(_) => "usage",
            CliError::Quadrature(_) => "quadrature",
            CliError::Figure(_) => "figure",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Verification(m)
            | CliError::Usage(m)
            | CliError::Quadrature(m)
            | CliError::Figure(m) => m,
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.message(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }

    /// Recasts any failure as a figure pipeline failure.
    pub fn into_figure(self) -> CliError {
        match self {
            CliError::Figure(m) => CliError::Figure(m),
            other => CliError::Figure(format!("{}: {}", other.kind(), other.message())),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SmoothingError> for CliError {
    fn from(e: SmoothingError) -> Self {
        match e {
            SmoothingError::NonPositiveNoise(_) => CliError::Usage(e.to_string()),
            _ => CliError::Quadrature(e.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Smoothing(s) => s.into(),
            BoundsError::Source(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Smoothing(s) => s.into(),
            AsymptoticsError::Source(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Smoothing(s) => s.into(),
            McError::TooFewSamples(_) => CliError::Usage(e.to_string()),
            other => CliError::Quadrature(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
