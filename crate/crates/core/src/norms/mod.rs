//! Two-sided numerical certification of multiplier norms.
//!
//! Upper bounds come from explicit factorizations (their sup-norm product),
//! lower bounds from contraction tuples (the operator norm they produce), and
//! in the bilinear case an exact value from a semidefinite program.

mod lower;
mod oracle;
mod upper;
mod verify;

use serde::Serialize;

use crate::factorization::FactorizationData;
use crate::linalg::CMatrix;

pub use lower::{canonical_operators, lower_bound_search, LowerOptions};
pub use oracle::bilinear_oracle;
pub use upper::{default_ranks, upper_bound_search, UpperOptions};
pub use verify::{relative_gap, verify_theorem, Budget, Check, Report, SOUNDNESS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Upper,
    Lower,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Factorization(FactorizationData),
    /// Contractions `(X_1, ..., X_(n-1))` on the given operators.
    Witness(Vec<CMatrix>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_restart: Option<usize>,
    /// `max |synthesized - phi|` of the certificate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// Dual objective of the semidefinite program (a lower bound up to solver accuracy).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    pub certificate: Certificate,
    pub diagnostics: Diagnostics,
}

impl NormEstimate {
    pub fn factorization(&self) -> Option<&FactorizationData> {
        match &self.certificate {
            Certificate::Factorization(f) => Some(f),
            Certificate::Witness(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&[CMatrix]> {
        match &self.certificate {
            Certificate::Witness(xs) => Some(xs),
            Certificate::Factorization(_) => None,
        }
    }
}
