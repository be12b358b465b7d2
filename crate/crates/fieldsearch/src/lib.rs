//! Drone search over clustered objects in gridded fields.
//!
//! The crate simulates an agricultural-style search task: objects are
//! scattered in clusters over an `M x M` grid, a drone with an `N x N`
//! field-of-view flies over it collecting noisy detections, and a
//! deep Q-network learns to find the objects faster than a full
//! coverage sweep. Real-world detection data can be replayed through
//! the same environment via UTM-to-grid conversion, at four levels of
//! realism from pure simulation to recorded detections.

pub mod config;
pub mod coverage;
pub mod dqn;
pub mod env;
pub mod eval;
pub mod field;
pub mod geo;
pub mod grid;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod trace;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
