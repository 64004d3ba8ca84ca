use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScadError {
    #[error("{what} = {value} is outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("party count {0} outside supported range 1..=16")]
    PartyCount(usize),

    #[error("width mismatch: expected {expected} parties, got {got}")]
    Width { expected: usize, got: usize },

    #[error("index {index} out of range for {len} parties")]
    Index { index: usize, len: usize },

    #[error("distribution not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("negative probability {value} for pattern {pattern}")]
    Negative { pattern: String, value: f64 },

    #[error("acceptance probability is zero; key rate undefined")]
    DegenerateAcceptance,

    #[error("infeasible phase constraint: {0}")]
    Infeasible(String),

    #[error("invalid bit string {0:?}")]
    BitString(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("register {0:?} not present in state")]
    MissingRegister(String),

    #[error("qubit labels collide: {0:?}")]
    LabelCollision(Vec<usize>),

    #[error("state error: {0}")]
    State(String),

    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),

    #[error("{path}:{line}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ScadError>;
