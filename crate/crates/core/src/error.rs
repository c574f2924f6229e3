//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains a NaN or infinite entry")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid tolerance: {0}")]
    BadTolerance(String),
    #[error("power {power} is not a partial isometry (residual {residual:e})")]
    NotPpi { power: usize, residual: f64 },
    #[error("reassembly residual {residual:e} exceeds tolerance")]
    ResidualExceeded { residual: f64 },
    #[error("symbol shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("symbol is not inner: lag {lag} has residual {residual:e}")]
    NotInner { lag: i64, residual: f64 },
    #[error("inner polynomial has more than one nonzero coefficient")]
    NotMonomial,
    #[error("symbol {0} has nonzero coefficients of negative degree")]
    NotAnalytic(String),
    #[error("truncation degree {degree} is below the required {needed}")]
    BadDegree { degree: usize, needed: usize },
    #[error("operator norm {norm} exceeds 1")]
    NotContraction { norm: f64 },
    #[error("subspace does not reduce the operator (residual {residual:e})")]
    NotReducing { residual: f64 },
    #[error("reducing subspace is not of product form (gap {gap:e})")]
    NotProductForm { gap: f64 },
    #[error("subspace is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("wandering subspace has dimension {found}, expected {expected}")]
    RankDeficient { expected: usize, found: usize },
    #[error("stacked symbol is not isometric-valued (residual {residual:e})")]
    NotIsometricSymbol { residual: f64 },
    #[error("symbol degree needs truncation degree {needed}, have {degree}")]
    MarginExceeded { needed: usize, degree: usize },
    #[error("chain violates admissibility between indices {i} and {j} (n_i = {n_i}, n_j = {n_j})")]
    ChainInadmissible { i: usize, j: usize, n_i: usize, n_j: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bad specification: {0}")]
    BadSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
