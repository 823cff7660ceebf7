use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between reading the inputs and writing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value at index {0} is not positive; cannot take its logarithm")]
    NonPositiveValue(usize),
    #[error("value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("need at least {required} elements, got {found}")]
    TooFewElements { required: usize, found: usize },
    #[error("ids and values have different lengths ({ids} vs {values})")]
    LengthMismatch { ids: usize, values: usize },
    #[error("all values are equal; standardization is undefined")]
    ZeroVariance,
    #[error("distance between elements {i} and {j} is zero")]
    ZeroDistance { i: usize, j: usize },
    #[error("distance between elements {i} and {j} is invalid ({value})")]
    InvalidDistance { i: usize, j: usize, value: f64 },
    #[error("asymmetric input at ({i}, {j}): relative difference {relative:.3e}")]
    AsymmetricInput { i: usize, j: usize, relative: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix entries sum to zero")]
    DegenerateMatrix,
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("regression predictor has zero variance")]
    DegenerateRegression,
    #[error("spatial lag Wz is constant")]
    DegenerateLag,
    #[error("Moran's index is zero; the closed form divides by it")]
    ZeroMoran,
    #[error("R^2 is zero; the identity degenerates")]
    ZeroRSquared,
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("Jacobi sweeps did not converge (off-diagonal norm {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("no Durbin-Watson critical values for n = {n}, alpha = {alpha}")]
    MissingCriticalValues { n: usize, alpha: f64 },
    #[error("invalid critical values: {0}")]
    InvalidCriticalValues(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("id mismatch between sizes and distances: {0}")]
    IdMismatch(String),
    #[error("missing distance for pair ({0}, {1})")]
    MissingPair(String, String),
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("(I - rho W) is singular: rho = {rho} hits 1/lambda = {inverse_eigenvalue}")]
    SingularResolvent { rho: f64, inverse_eigenvalue: f64 },
    #[error("a = 0 and noise_sd = 0 produce the zero field")]
    DegenerateZeroField,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used by the command line to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::NoConvergence { .. }
            | Error::SingularResolvent { .. }
            | Error::DegenerateRegression
            | Error::DegenerateLag
            | Error::ZeroMoran
            | Error::ZeroRSquared => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
