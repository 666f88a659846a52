use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vertex {vertex} out of range (|V| = {vertex_count})")]
    InvalidVertex { vertex: usize, vertex_count: usize },

    #[error("destination {dst} unreachable from {src} within the allowed set")]
    Unreachable { src: usize, dst: usize },

    #[error("no safe destination available (empty safe set)")]
    NoSafeDestination,

    #[error("instance too large for exact enumeration: |V|^N = {size} > {limit}")]
    SizeLimit { size: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("sample size too small: got {got}, need at least {need}")]
    SampleSize { got: usize, need: usize },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch: file is {file_rows}x{file_cols}, expected {rows}x{cols}")]
    DimensionMismatch {
        file_rows: usize,
        file_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
