use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic: expected `GEMB`, found {found:02x?}")]
    MagicMismatch { found: [u8; 4] },

    #[error("unsupported format version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("truncated data at offset {offset}: expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },

    #[error("{count} trailing bytes after payload at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at row {row}, col {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("game `{game}` maps to both {first} and {second}")]
    InconsistentGameMapping { game: String, first: String, second: String },

    #[error("unknown genre `{0}`")]
    UnknownGenre(String),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("SVD did not converge after {sweeps} sweeps (tolerance {tolerance:e})")]
    ConvergenceFailure { sweeps: usize, tolerance: f64 },

    #[error("k = {k} out of range: need 1 <= k < {available}")]
    KOutOfRange { k: usize, available: usize },

    #[error("need at least 2 distinct games, found {0}")]
    TooFewGames(usize),

    #[error("silhouette needs at least 2 clusters, found {0}")]
    SingleCluster(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("perplexity infeasible: {0}")]
    PerplexityInfeasible(String),

    #[error("non-finite t-SNE gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("degenerate design matrix: {0}")]
    DegenerateDesign(String),

    #[error("insufficient games: {0}")]
    InsufficientGames(String),

    #[error("row {row} has unknown style label; style probes need every label known")]
    UnknownStyleLabel { row: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile { path: path.into(), source: Box::new(self) }
    }

    /// Innermost error, unwrapping file context.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::ConvergenceFailure { .. } | Error::NonFiniteGradient { .. } | Error::DegenerateDesign(_)
        )
    }
}

pub(crate) fn dim_mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
