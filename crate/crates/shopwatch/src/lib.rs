//! Pose-sequence shoplifting detection.
//!
//! The pipeline runs in two stages. Stage one trains a graph-convolutional
//! autoencoder on sliding windows of tracked 2-D skeletons; its frozen encoder
//! then serves as a tokenizer that turns each window into a short sequence of
//! embeddings. Stage two trains an encoder-decoder transformer to reconstruct
//! those token sequences, on normal behavior only. At scoring time the
//! transformer's reconstruction MSE is the anomaly score: windows it cannot
//! reconstruct look unlike anything seen in training.
//!
//! The crate also ships the surrounding machinery: data loaders, a synthetic
//! data generator, frame-level score aggregation, ROC/PR/EER metrics, an
//! experiment config with an ablation grid runner, and SVG reporting. The
//! `shopwatch` binary exposes all of it as subcommands.

pub mod config;
pub mod gcae;
pub mod graph;
pub mod metrics;
pub mod params;
pub mod pose;
pub mod report;
pub mod synth;
pub mod tokenizer;
pub mod trainer;
pub mod transformer;

use std::fmt;

/// Workspace-level error with a CLI exit-code mapping.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration (bad key, infeasible combination, missing file path).
    Config(String),
    /// Malformed or unusable input data.
    Data {
        location: Option<String>,
        message: String,
    },
    /// A runtime contract was violated (mismatched checkpoints, labeled
    /// anomalies in a training split, undefined metric).
    Contract(String),
    /// Error bubbled up from the numeric substrate.
    Num(numkit::Error),
    /// Filesystem failure.
    Io(String),
}

impl Error {
    pub fn data(message: impl Into<String>) -> Self {
        Error::Data {
            location: None,
            message: message.into(),
        }
    }

    pub fn data_at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            location: Some(location.into()),
            message: message.into(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data { .. } | Error::Io(_) => 3,
            Error::Contract(_) | Error::Num(_) => 4,
        }
    }

    /// Stable machine-parseable tag used on stderr.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data { .. } => "data",
            Error::Io(_) => "io",
            Error::Contract(_) => "contract",
            Error::Num(_) => "numeric",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "{m}"),
            Error::Data {
                location: Some(loc),
                message,
            } => write!(f, "{loc}: {message}"),
            Error::Data {
                location: None,
                message,
            } => write!(f, "{message}"),
            Error::Contract(m) => write!(f, "{m}"),
            Error::Num(e) => write!(f, "{e}"),
            Error::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<numkit::Error> for Error {
    fn from(e: numkit::Error) -> Self {
        match e {
            numkit::Error::Config(m) => Error::Config(m),
            other => Error::Num(other),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
