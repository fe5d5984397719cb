//! Crate-level error and the exit code each failure maps to.

use std::path::PathBuf;

use thiserror::Error;

use crate::bounds::BoundsError;
use crate::channel::ChannelError;
use crate::cli::config::ConfigError;
use crate::experiments::ExperimentError;
use crate::geometry::GeometryError;
use crate::linkbudget::LinkError;
use crate::mimo::MimoError;
use crate::spectra::SpectraError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mimo(#[from] MimoError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

fn mimo_code(e: &MimoError) -> i32 {
    match e {
        MimoError::NumericalFailure(..) | MimoError::NonFinite | MimoError::AllZeroGains => {
            EXIT_NUMERICAL
        }
        _ => EXIT_CONFIG,
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for unreadable or invalid data, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Link(_) | Error::Geometry(_) => EXIT_CONFIG,
            Error::Spectra(_) | Error::Io { .. } | Error::Csv { .. } | Error::Json(_) => EXIT_DATA,
            Error::Channel(ChannelError::Link(_) | ChannelError::Geometry(_)) => EXIT_CONFIG,
            Error::Channel(_) => EXIT_NUMERICAL,
            Error::Mimo(e) => mimo_code(e),
            Error::Bounds(BoundsError::Mimo(e)) => mimo_code(e),
            Error::Bounds(_) => EXIT_CONFIG,
            Error::Experiment(e) => match e {
                ExperimentError::Spectra(_) => EXIT_DATA,
                ExperimentError::Mimo(m) => mimo_code(m),
                ExperimentError::Channel(ChannelError::PureLos | ChannelError::NotScattering) => {
                    EXIT_NUMERICAL
                }
                _ => EXIT_CONFIG,
            },
        }
    }
}
