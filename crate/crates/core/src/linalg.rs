//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest singular value. Empty matrices have norm zero.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn is_finite<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
    m: &nalgebra::Matrix<Complex64, R, C, S>,
) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}

/// Top singular triple `(sigma, u, v)` with `m v = sigma u`.
pub fn top_singular(m: &CMatrix) -> (f64, CVector, CVector) {
    let svd = m.clone().svd(true, true);
    let (k, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, &s)| if s > best.1 { (i, s) } else { best });
    let u = svd.u.as_ref().expect("u requested").column(k).into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("v_t requested")
        .row(k)
        .adjoint()
        .into_owned();
    (sigma.max(0.0), u, v)
}

/// Maximizer of `Re tr(m x)` over the operator-norm unit ball: the adjoint of
/// the polar factor of `m`.
pub fn contraction_maximizer(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    v_t.adjoint() * u.adjoint()
}

/// Rescales `m` to operator norm one (zero stays zero).
pub fn to_contraction(m: &CMatrix) -> CMatrix {
    let n = op_norm(m);
    if n > 0.0 {
        m.unscale(n)
    } else {
        m.clone()
    }
}

/// Projection of a Hermitian matrix onto the positive semidefinite cone.
pub fn psd_part(h: &CMatrix) -> CMatrix {
    if h.nrows() == 1 {
        return CMatrix::from_element(1, 1, Complex64::new(h[(0, 0)].re.max(0.0), 0.0));
    }
    let eig = SymmetricEigen::new(hermitian_part(h));
    let d = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(h: &CMatrix) -> f64 {
    if h.nrows() == 1 {
        return h[(0, 0)].re;
    }
    SymmetricEigen::new(hermitian_part(h))
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &l| acc.max(l))
}

pub fn hermitian_part(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// Minimum-norm least-squares solution of `a x = b`, singular values below
/// `rcond * sigma_max` treated as zero.
pub fn lstsq(a: &CMatrix, b: &CVector, rcond: f64) -> CVector {
    if a.is_empty() {
        return CVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("u and v_t computed")
}

/// Kronecker-style block diagonal `diag(x, ..., x)` with `copies` blocks.
pub fn block_diagonal_copies(x: &CMatrix, copies: usize) -> CMatrix {
    let (r, c) = x.shape();
    let mut out = CMatrix::zeros(r * copies, c * copies);
    for k in 0..copies {
        out.view_mut((k * r, k * c), (r, c)).copy_from(x);
    }
    out
}

/// Row-major iteration over all multi-indices of `shape`.
pub struct MultiIndex {
    shape: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl MultiIndex {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            current: vec![0; shape.len()],
            done: shape.iter().any(|&s| s == 0),
        }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut k = self.shape.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.current[k] += 1;
            if self.current[k] < self.shape[k] {
                break;
            }
            self.current[k] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_is_row_major() {
        let all: Vec<_> = MultiIndex::new(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(MultiIndex::new(&[]).count(), 1);
        assert_eq!(MultiIndex::new(&[2, 0]).count(), 0);
    }

    #[test]
    fn contraction_maximizer_attains_trace_norm() {
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64, i as f64 - 1.0));
        let x = contraction_maximizer(&m);
        let value = (&m * &x).trace().re;
        let trace_norm: f64 = m.clone().svd(false, false).singular_values.iter().sum();
        assert!((value - trace_norm).abs() < 1e-12 * trace_norm);
        assert!(op_norm(&x) <= 1.0 + 1e-12);
    }

    #[test]
    fn psd_part_clips_negative_eigenvalues() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, -ONE]));
        let p = psd_part(&h);
        assert!((p[(0, 0)] - ONE).norm() < 1e-15);
        assert!(p[(1, 1)].norm() < 1e-15);
    }
}
