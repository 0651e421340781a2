use thiserror::Error;

/// Errors raised by constructions, validators and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    /// An affine map or triangle with non-positive determinant / signed area.
    #[error("orientation error: determinant {det:e} is not positive")]
    Orientation { det: f64 },

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Degenerate or non-finite geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Malformed input data (gauge tables, depth lists, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A materialized construction would exceed the configured depth limit.
    #[error("depth {requested} exceeds the configured limit {limit}")]
    DepthGuard { requested: usize, limit: usize },

    /// Least-squares fit without usable data.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, QcError>;
