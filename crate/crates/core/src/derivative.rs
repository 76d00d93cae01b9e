//! Derivatives of matrix functions as double operator integrals:
//! `d/ds f(A + sX)|_(s=0) = Gamma^(A,A)(f^[1])(X)` for Hermitian `A`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, CMatrix};
use crate::moi::moi_apply;
use crate::schur::SymbolTensor;
use crate::spectral::NormalOperator;

/// Below this relative distance two eigenvalues count as equal and the
/// divided difference takes the derivative at their midpoint.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFunction {
    Exp,
    Square,
    /// `x -> 1 / (x + i)`.
    ReciprocalShift,
}

impl ScalarFunction {
    pub fn eval(self, z: Complex64) -> Complex64 {
        match self {
            Self::Exp => z.exp(),
            Self::Square => z * z,
            Self::ReciprocalShift => (z + Complex64::i()).inv(),
        }
    }

    pub fn derivative(self, z: Complex64) -> Complex64 {
        match self {
            Self::Exp => z.exp(),
            Self::Square => z * 2.0,
            Self::ReciprocalShift => -(z + Complex64::i()).powi(2).inv(),
        }
    }

    /// `f(M)` for an arbitrary square matrix, computed without a spectral
    /// decomposition.
    pub fn eval_matrix(self, m: &CMatrix) -> CMatrix {
        match self {
            Self::Exp => m.exp(),
            Self::Square => m * m,
            Self::ReciprocalShift => {
                let shifted = m + CMatrix::identity(m.nrows(), m.ncols()) * Complex64::i();
                shifted.try_inverse().expect("M + iI is invertible for Hermitian M")
            }
        }
    }

    /// First divided difference `(f(l) - f(m)) / (l - m)`.
    pub fn divided_difference(self, l: Complex64, m: Complex64) -> Complex64 {
        let scale = l.norm().max(m.norm()).max(1.0);
        if (l - m).norm() <= COINCIDENCE_TOL * scale {
            self.derivative((l + m) * 0.5)
        } else {
            (self.eval(l) - self.eval(m)) / (l - m)
        }
    }
}

impl FromStr for ScalarFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Self::Exp),
            "square" => Ok(Self::Square),
            "reciprocal-shift" => Ok(Self::ReciprocalShift),
            other => Err(Error::InvalidData(format!(
                "unknown function {other:?} (expected exp, square or reciprocal-shift)"
            ))),
        }
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exp => "exp",
            Self::Square => "square",
            Self::ReciprocalShift => "reciprocal-shift",
        })
    }
}

pub fn is_hermitian(a: &CMatrix) -> bool {
    a.is_square() && hs_norm(&(a - a.adjoint())) <= 1e-12 * hs_norm(a).max(1.0)
}

/// The symbol `f^[1]` on the spectrum of `a`, twice.
pub fn divided_difference_symbol(f: ScalarFunction, a: &NormalOperator) -> Result<SymbolTensor> {
    let s = a.spectrum().clone();
    let atoms = s.atoms().to_vec();
    SymbolTensor::from_fn(vec![s.clone(), s], |i| f.divided_difference(atoms[i[0]], atoms[i[1]]))
}

/// `Gamma^(A,A)(f^[1])(X)` for Hermitian `A`.
pub fn moi_derivative(f: ScalarFunction, a: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !is_hermitian(a) {
        return Err(Error::NotHermitian {
            defect: hs_norm(&(a - a.adjoint())),
        });
    }
    let op = NormalOperator::decompose(a)?;
    let phi = divided_difference_symbol(f, &op)?;
    moi_apply(&phi, &[op.clone(), op], std::slice::from_ref(x))
}

/// Central difference `(f(A + hX) - f(A - hX)) / 2h`.
pub fn finite_difference(f: ScalarFunction, a: &CMatrix, x: &CMatrix, h: f64) -> CMatrix {
    let step = x * Complex64::new(h, 0.0);
    (f.eval_matrix(&(a + &step)) - f.eval_matrix(&(a - &step))) / Complex64::new(2.0 * h, 0.0)
}

/// `||a - b||_HS / max(||a||_HS, ||b||_HS)`, zero when both vanish.
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = hs_norm(a).max(hs_norm(b));
    if scale == 0.0 {
        0.0
    } else {
        hs_norm(&(a - b)) / scale
    }
}
