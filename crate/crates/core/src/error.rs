use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error(
        "dense dimension {requested} exceeds the limit {limit}; use the matrix-free path \
         or raise SPECTRA_MAX_DENSE_DIM"
    )]
    DenseLimit { requested: usize, limit: usize },

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("eigenvalue check failed on a {dim}x{dim} matrix: {detail}")]
    EigenCheck { dim: usize, detail: String },

    #[error("QR sampling produced a singular triangular factor (min |r_ii| = {min_diag:.3e})")]
    SingularDraw { min_diag: f64 },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("order {order} exceeds the supported maximum {max}")]
    OrderGuard { order: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
