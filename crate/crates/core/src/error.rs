use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to
/// locate the offending input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not normal: commutator norm {defect:.3e} exceeds {bound:.3e}")]
    NotNormal { defect: f64, bound: f64 },

    #[error("matrix is not Hermitian: ||A - A^*||_F = {defect:.3e}")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel {slot} does not chain with the symbol: {reason}")]
    ChainMismatch { slot: usize, reason: String },

    #[error("expected {expected} operands, got {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("atoms of spectrum {slot} do not match the operator spectrum")]
    SpectrumMismatch { slot: usize },

    #[error("{side} multiplier does not commute with the spectral projections (defect {defect:.3e})")]
    NotInCommutant { side: &'static str, defect: f64 },

    #[error("operator {slot} has an eigenspace of dimension {multiplicity}")]
    MultiplicityNotOne { slot: usize, multiplicity: usize },

    #[error("rank {rank} for H_{slot} exceeds the bound {dim}")]
    RankTooLarge { slot: usize, rank: usize, dim: usize },

    #[error("rank for H_{slot} must be at least 1")]
    RankTooSmall { slot: usize },

    #[error("no factorization fit the symbol: best residual {residual:.3e} > tolerance {tol:.3e}")]
    RankInsufficient { residual: f64, tol: f64 },

    #[error("symbol has order {order}; the bilinear oracle needs order 2")]
    NotBilinear { order: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
