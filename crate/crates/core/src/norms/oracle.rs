//! Exact norm of a bilinear multiplier as an optimal Gram factorization:
//!
//! ```text
//! minimize s  subject to  [[R, phi], [phi^*, S]] >= 0,  R_ii <= s,  S_jj <= s.
//! ```
//!
//! The program is solved directly by the interior-point method, and the
//! factorization is read off the Gram vectors of the optimal block matrix.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{Certificate, Diagnostics, EstimateKind, NormEstimate};
use crate::error::{Error, Result};
use crate::factorization::FactorizationData;
use crate::linalg::{lstsq, CMatrix, CVector, ONE};
use crate::schur::SymbolTensor;
use crate::sdp::{entry_selector, solve};

/// Gram vectors of dimension below this fraction of the largest eigenvalue
/// are dropped.
const EIGEN_CUTOFF: f64 = 1e-13;

pub fn bilinear_oracle(phi: &SymbolTensor) -> Result<NormEstimate> {
    if phi.order() != 2 {
        return Err(Error::NotBilinear { order: phi.order() });
    }
    let (m1, m2) = (phi.shape()[0], phi.shape()[1]);
    let scale = phi.sup_norm();
    if scale == 0.0 {
        let f = FactorizationData::new(
            vec![1],
            vec![CVector::zeros(1); m1],
            Vec::new(),
            vec![CVector::zeros(1); m2],
        )?;
        return Ok(NormEstimate {
            kind: EstimateKind::Exact,
            value: 0.0,
            certificate: Certificate::Factorization(f),
            diagnostics: Diagnostics {
                residual: Some(0.0),
                dual_bound: Some(0.0),
                converged: Some(true),
                ..Diagnostics::default()
            },
        });
    }
    let target = phi.as_matrix()?.unscale(scale);

    // Variable: block diagonal (G, diag(slack), s) inside one dense matrix.
    let n = m1 + m2;
    let dim = 2 * n + 1;
    let s_idx = 2 * n;
    let mut constraints = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut a = CMatrix::zeros(dim, dim);
        a[(i, i)] = ONE;
        a[(n + i, n + i)] = ONE;
        a[(s_idx, s_idx)] = -ONE;
        constraints.push(a);
        rhs.push(0.0);
    }
    for a in 0..m1 {
        for b in 0..m2 {
            let v = target[(a, b)];
            constraints.push(entry_selector(dim, a, m1 + b, false));
            rhs.push(v.re);
            constraints.push(entry_selector(dim, a, m1 + b, true));
            rhs.push(v.im);
        }
    }
    let mut c = CMatrix::zeros(dim, dim);
    c[(s_idx, s_idx)] = ONE;
    let sol = solve(&c, &constraints, &DVector::from_vec(rhs), 200, 1e-10);

    // Gram vectors: G = W^* W with w_p[k] = sqrt(lambda_k) conj(V_pk).
    let gram = sol.x.view((0, 0), (n, n)).into_owned();
    let eig = SymmetricEigen::new((&gram + gram.adjoint()).scale(0.5));
    let lmax = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > EIGEN_CUTOFF * lmax).collect();
    let rank = keep.len().max(1);
    let vector = |p: usize| {
        CVector::from_iterator(
            rank,
            keep.iter()
                .map(|&k| eig.eigenvectors[(p, k)].conj() * eig.eigenvalues[k].max(0.0).sqrt())
                .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                .take(rank),
        )
    };
    let mut a_first: Vec<CVector> = (0..m1).map(vector).collect();
    let mut a_last: Vec<CVector> = (0..m2).map(|b| vector(m1 + b)).collect();

    // Remove the solver's residual infeasibility with minimum-change
    // corrections of the first factor: conj(phi(a, b)) = a_last[b]^* a_first[a].
    let basis = CMatrix::from_fn(m2, rank, |b, k| a_last[b][k].conj());
    for (a, x) in a_first.iter_mut().enumerate() {
        let want = CVector::from_iterator(m2, (0..m2).map(|b| target[(a, b)].conj()));
        let dx = lstsq(&basis, &(want - &basis * &*x), 1e-12);
        *x += dx;
    }
    let sup = |vs: &[CVector]| vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (s1, s2) = (sup(&a_first), sup(&a_last));
    if s1 > 0.0 && s2 > 0.0 {
        let g = (s1 * s2).sqrt();
        a_first.iter_mut().for_each(|v| *v *= Complex64::new(g / s1, 0.0));
        a_last.iter_mut().for_each(|v| *v *= Complex64::new(g / s2, 0.0));
    }
    let f = FactorizationData::new(vec![rank], a_first, Vec::new(), a_last)?;
    let residual = (0..m1)
        .flat_map(|a| (0..m2).map(move |b| (a, b)))
        .map(|(a, b)| (f.evaluate(&[a, b]) - target[(a, b)]).norm())
        .fold(0.0, f64::max);
    let f = f.scaled(Complex64::new(scale, 0.0));
    Ok(NormEstimate {
        kind: EstimateKind::Exact,
        value: f.sup_norm_product(),
        certificate: Certificate::Factorization(f),
        diagnostics: Diagnostics {
            iterations: sol.iterations,
            residual: Some(residual),
            dual_bound: Some(sol.dual_objective * scale),
            converged: Some(sol.converged),
            ..Diagnostics::default()
        },
    })
}
