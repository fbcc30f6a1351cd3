use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("matrix is not symmetric (max deviation {0:.3e})")]
    Asymmetric(f64),
    #[error("basis index out of range: ({k}, {l}) with p = {p}")]
    Index { k: usize, l: usize, p: usize },
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("invalid domain parameters: {0}")]
    InvalidParams(String),
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("degenerate tangent direction")]
    DegenerateDirection,
    #[error("invalid Bergman coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("coefficient fit failed: {0}")]
    Fit(String),
    #[error("finite-difference stencil left the domain after {0} step reductions")]
    Stencil(usize),
    #[error("finite-difference result failed a consistency check: {0}")]
    Conditioning(String),
    #[error("boundary probe failed: {0}")]
    Probe(String),
}

pub type Result<T> = std::result::Result<T, Error>;
