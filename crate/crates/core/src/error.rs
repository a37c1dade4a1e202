use thiserror::Error;

/// Errors raised by the forward solvers, the reversion engine and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("mesh is not aligned with the circle of radius {rho}: triangle {triangle} straddles it")]
    NotAligned { rho: f64, triangle: usize },

    #[error("non-coercive coefficient: {0}")]
    NonCoercive(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid electrode layout: {0}")]
    InvalidLayout(String),

    #[error("electrode current pattern is not mean free (sum = {0:e})")]
    CurrentNotMeanFree(f64),

    #[error("singular derivative: {0}")]
    SingularDerivative(String),

    #[error("orders above 4 require the experimental general recursion flag")]
    ExperimentalDisabled,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
