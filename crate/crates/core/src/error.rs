use std::path::PathBuf;

use thiserror::Error;

/// Errors from the primitive samplers and densities.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("non-finite argument: {0}")]
    NonFinite(f64),
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("empty truncation interval ({lower}, {upper})")]
    EmptyInterval { lower: f64, upper: f64 },
    #[error("every categorical log weight is -inf or NaN")]
    NoMass,
}

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("mixture needs at least one component")]
    Empty,
    #[error("component arrays differ in length: {weights} weights, {means} means, {sds} sds")]
    LengthMismatch { weights: usize, means: usize, sds: usize },
    #[error("weights must be non-negative and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("component {index} has invalid sd {sd}")]
    BadScale { index: usize, sd: f64 },
    #[error("component {index} has a non-finite mean")]
    BadMean { index: usize },
    #[error("no published table for K = {0} (available: 6, 10)")]
    UnsupportedTable(usize),
    #[error("warm start has {init} components, expected {k} or {k_minus_one}", k_minus_one = .k - 1)]
    BadWarmStart { init: usize, k: usize },
    #[error("K must be at least 1")]
    ZeroComponents,
    #[error("mixture file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("orthant indicator {z:?} inconsistent with alpha = ({a1}, {a2})", a1 = .alpha[0], a2 = .alpha[1])]
    Orthant { alpha: [f64; 2], z: crate::model::Orthant },
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("hyperparameter {0} must be positive and finite")]
    Hyper(&'static str),
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("party-signed initialisation needs at least two distinct party labels")]
    MissingParties,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("no retained draws")]
    NoDraws,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ranks are not a permutation of 1..={0}")]
    NotPermutation(usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series is constant; autocorrelation undefined")]
    Degenerate,
    #[error("item index {0} out of range")]
    NoSuchItem(usize),
    #[error("legislator rosters differ: {0}")]
    Roster(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}, line {line}: duplicate vote for legislator {legislator} on item {item}")]
    Duplicate {
        path: PathBuf,
        line: usize,
        legislator: String,
        item: String,
    },
    #[error("no data left after filtering ({report})")]
    EmptyAfterFilter { report: String },
    #[error("{path}: unexpected column {found:?} at position {position}, expected {expected:?}")]
    Schema {
        path: PathBuf,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("{path}: {message}")]
    Truncated { path: PathBuf, message: String },
    #[error("simulation produced a degenerate matrix after {attempts} attempts")]
    DegenerateSimulation { attempts: usize },
    #[error("config: {0}")]
    Config(String),
}

impl IoError {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}
