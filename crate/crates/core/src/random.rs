//! Seeded generators for test instances and search starting points.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::factorization::FactorizationData;
use crate::linalg::{to_contraction, CMatrix, CVector};
use crate::schur::SymbolTensor;
use crate::spectral::WeightedSpectrum;

/// Complex Gaussian with independent standard normal parts.
pub fn complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

pub fn vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex(rng))
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let a = matrix(rng, d, d);
    (&a + a.adjoint()).scale(0.5)
}

/// Haar-distributed unitary (QR of a Gaussian matrix with phase correction).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = matrix(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Operator-norm contraction (norm exactly one unless degenerate).
pub fn contraction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    to_contraction(&matrix(rng, d, d))
}

/// Random normal matrix `U diag(..) U^*` whose distinct eigenvalues have the
/// given multiplicities.
pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize, multiplicities: &[usize]) -> CMatrix {
    assert_eq!(multiplicities.iter().sum::<usize>(), d, "multiplicities must sum to d");
    let mut diag = Vec::with_capacity(d);
    for &m in multiplicities {
        let l = complex(rng);
        diag.extend(std::iter::repeat_n(l, m));
    }
    let u = unitary(rng, d);
    &u * CMatrix::from_diagonal(&CVector::from_vec(diag)) * u.adjoint()
}

/// Random complex atoms with weights drawn from `[0.5, 3)`.
pub fn spectrum<R: Rng + ?Sized>(rng: &mut R, m: usize) -> WeightedSpectrum {
    let atoms = (0..m).map(|_| complex(rng)).collect();
    let weights = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
    WeightedSpectrum::new(atoms, weights).expect("random atoms are distinct")
}

pub fn symbol<R: Rng + ?Sized>(rng: &mut R, spectra: Vec<WeightedSpectrum>) -> SymbolTensor {
    let len: usize = spectra.iter().map(|s| s.len()).product();
    let values = (0..len).map(|_| complex(rng)).collect();
    SymbolTensor::new(spectra, values).expect("shape matches spectra")
}

/// Gaussian factorization data over spectra with the given atom counts.
pub fn factorization<R: Rng + ?Sized>(rng: &mut R, counts: &[usize], dims: &[usize]) -> FactorizationData {
    let n = counts.len();
    assert_eq!(dims.len() + 1, n, "need one Hilbert space per adjacent pair");
    let a_first = (0..counts[0]).map(|_| vector(rng, dims[0])).collect();
    let a_mid = (1..n - 1)
        .map(|i| (0..counts[i]).map(|_| matrix(rng, dims[i - 1], dims[i])).collect())
        .collect();
    let a_last = (0..counts[n - 1]).map(|_| vector(rng, dims[n - 2])).collect();
    FactorizationData::new(dims.to_vec(), a_first, a_mid, a_last).expect("consistent dims")
}
