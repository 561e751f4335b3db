use thiserror::Error;

/// Failures while reading, validating or transforming tabular data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("column `{column}`: {message}")]
    Schema { column: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum DivergenceError {
    #[error(
        "KL divergence undefined: reference probability is zero where the other is {p}; \
         apply Laplace correction to the class distributions"
    )]
    ZeroReference { p: f64 },
    #[error(
        "fallback gain requires exactly one empty group at the node \
         (got {favored} favored and {deprived} deprived rows)"
    )]
    FallbackPrecondition { favored: u64, deprived: u64 },
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("cannot build a tree from an empty table")]
    EmptyTable,
    #[error("column `{0}` is numeric and must be discretized before building")]
    NotDiscretized(String),
    #[error("tree document: {0}")]
    Document(String),
    #[error("schema fingerprint mismatch: tree expects {expected}, data has {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

#[derive(Debug, Error)]
pub enum RelabelError {
    #[error("sigma must lie in [0, 2], got {0}")]
    SigmaOutOfRange(f64),
    #[error("plan was built for table {expected}, refusing to apply it to table {found}")]
    TableMismatch { expected: String, found: String },
    #[error("plan document: {0}")]
    Document(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("length mismatch: {0}")]
    Length(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Relabel(#[from] RelabelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Internal,
}

impl DataError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            DataError::MissingColumn(_) | DataError::Config(_) => ErrorCategory::Config,
            DataError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => ErrorCategory::Config,
            _ => ErrorCategory::Data,
        }
    }
}

impl TreeError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            TreeError::EmptyTable | TreeError::NotDiscretized(_) => ErrorCategory::Data,
            TreeError::Document(_) | TreeError::FingerprintMismatch { .. } => ErrorCategory::Data,
            TreeError::Divergence(_) => ErrorCategory::Internal,
        }
    }
}

impl RelabelError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            RelabelError::SigmaOutOfRange(_) => ErrorCategory::Config,
            RelabelError::TableMismatch { .. } | RelabelError::Document(_) => ErrorCategory::Data,
            RelabelError::Tree(e) => e.category(),
        }
    }
}

impl EvalError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            EvalError::Config(_) => ErrorCategory::Config,
            EvalError::Training(_) | EvalError::Metric(_) | EvalError::Io(_) => ErrorCategory::Data,
            EvalError::Data(e) => e.category(),
            EvalError::Tree(e) => e.category(),
            EvalError::Relabel(e) => e.category(),
        }
    }
}
