use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column {column:?}")]
    MissingColumn { column: String },

    #[error("missing value in column {column:?} at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("cannot parse {value:?} in column {column:?} at row {row} as a real number")]
    Parse { column: String, row: usize, value: String },

    #[error("degenerate sensitive column {column:?}: at least two distinct values are required")]
    DegenerateSensitive { column: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("label {value} is not binary (expected 0 or 1)")]
    NonBinaryLabel { value: f64 },

    #[error("{metric} is undefined for group {group}")]
    UndefinedRate { metric: &'static str, group: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Y and S linearly dependent (Sigma_S * Sigma_Y - Sigma_SY^2 = {determinant:e})")]
    LinearlyDependent { determinant: f64 },

    #[error("{what} is singular or ill-conditioned (condition number {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("need at least {required} observations, got {n}")]
    InsufficientSamples { n: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "score distribution of group {group} has an atom of mass {atom_mass:.4}; \
         the recalibration requires a continuous score law"
    )]
    AssumptionViolation { group: usize, atom_mass: f64 },

    #[error(
        "no equality-of-odds recalibration found: best theta = ({theta0}, {theta1}), \
         residuals (tpr {tpr_residual:e}, fpr {fpr_residual:e})"
    )]
    ThetaNotFound {
        theta0: f64,
        theta1: f64,
        tpr_residual: f64,
        fpr_residual: f64,
    },

    #[error("logistic fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
