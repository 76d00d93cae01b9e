//! Multilinear Schur multipliers and multiple operator integrals for normal
//! matrices, with numerical certification of their (completely bounded)
//! norms through factorizations and contraction witnesses.

pub mod cli;
pub mod derivative;
pub mod error;
pub mod factorization;
pub mod json;
pub mod linalg;
pub mod moi;
pub mod norms;
pub mod optim;
pub mod random;
pub mod schur;
pub mod sdp;
pub mod spectral;

pub use error::{Error, Result};
pub use factorization::FactorizationData;
pub use linalg::CMatrix;
pub use norms::{NormEstimate, Report};
pub use schur::SymbolTensor;
pub use spectral::{Kernel, NormalOperator, WeightedSpectrum};
