use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("angle u = {0} outside [-1, 1)")]
    AngleOutOfRange(f64),
    #[error("invalid region of interest [{left}, {right}]")]
    InvalidRoi { left: f64, right: f64 },
    #[error("array size must be at least {min}, got {got}")]
    ArrayTooSmall { min: usize, got: usize },
    #[error("invalid sparse array geometry: {0}")]
    InvalidGeometry(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid beam specification: {0}")]
    InvalidBeamSpec(String),
    #[error("invalid filter design: {0}")]
    InvalidDesign(String),
    #[error("codebook depth {depth} too deep for a grid of {grid} points")]
    CodebookTooDeep { depth: usize, grid: usize },
    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),
    #[error("beamformer column {column} has norm {norm}, expected 1")]
    ColumnNorm { column: usize, norm: f64 },
    #[error("noise variance must be positive for likelihood evaluation")]
    ZeroNoise,
    #[error("every likelihood is zero")]
    DegeneratePosterior,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
