//! Small dense complex semidefinite programs in standard form
//!
//! ```text
//! minimize <C, X>  subject to  Re tr(A_k X) = b_k,  X >= 0,
//! ```
//!
//! solved by a primal-dual interior-point method (HKM direction with a
//! Mehrotra predictor-corrector). `C` and every `A_k` must be Hermitian.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::linalg::{CMatrix, ONE, ZERO};

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: CMatrix,
    pub y: DVector<f64>,
    pub z: CMatrix,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // Re tr(A B) without forming the product.
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn apply_a(a: &[CMatrix], x: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().map(|ak| re_trace_product(ak, x)))
}

fn apply_at(a: &[CMatrix], y: &DVector<f64>, n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n, n);
    for (ak, &yk) in a.iter().zip(y.iter()) {
        out += ak.scale(yk);
    }
    out
}

/// Largest `alpha <= 1` keeping `X + alpha dX` positive definite, damped.
fn step_length(x: &CMatrix, dx: &CMatrix) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let linv = l.clone().try_inverse().unwrap_or_else(|| CMatrix::identity(x.nrows(), x.ncols()));
    let w = hermitize(&(&linv * dx * linv.adjoint()));
    let lmin = SymmetricEigen::new(w).eigenvalues.min();
    if lmin >= 0.0 {
        1.0
    } else {
        (0.98 * (-1.0 / lmin)).min(1.0)
    }
}

pub fn solve(c: &CMatrix, a: &[CMatrix], b: &DVector<f64>, max_iter: usize, tol: f64) -> SdpSolution {
    let n = c.nrows();
    let m = a.len();
    let scale = 1.0 + b.amax().max(c.iter().fold(0.0f64, |s, z| s.max(z.norm())));
    let mut x = CMatrix::identity(n, n).scale(scale);
    let mut z = CMatrix::identity(n, n).scale(scale);
    let mut y = DVector::<f64>::zeros(m);
    let identity = CMatrix::identity(n, n);
    let b_norm = 1.0 + b.norm();
    let c_norm = 1.0 + c.norm();
    let mut converged = false;
    let mut iterations = 0;
    // Near the optimum the Schur complement loses accuracy and iterates can
    // drift; the best iterate by the worst of the three residuals is kept.
    let mut best: Option<(f64, CMatrix, DVector<f64>, CMatrix)> = None;
    let mut stalled = 0;

    for it in 0..max_iter {
        iterations = it;
        let rp = b - apply_a(a, &x);
        let rd = c - apply_at(a, &y, n) - &z;
        let mu = re_trace_product(&x, &z) / n as f64;
        let pobj = re_trace_product(c, &x);
        let dobj = b.dot(&y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = gap.max(rp.norm() / b_norm).max(rd.norm() / c_norm);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
            stalled = 0;
        } else {
            stalled += 1;
        }
        if merit < tol {
            converged = true;
            break;
        }
        if stalled >= 8 {
            break;
        }

        let Some(zinv) = z.clone().try_inverse() else { break };
        let zinv = hermitize(&zinv);
        // Schur complement M_ij = Re tr(A_i X A_j Z^-1).
        let xa: Vec<CMatrix> = a.iter().map(|aj| &x * aj * &zinv).collect();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = re_trace_product(&a[i], &xa[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let Some(chol) = Cholesky::new(schur.clone()).or_else(|| {
            let bump = 1e-14 * schur.diagonal().amax().max(1e-300);
            Cholesky::new(schur + DMatrix::identity(m, m) * bump)
        }) else {
            break;
        };
        let x_rd_zinv = &x * &rd * &zinv;
        let direction = |r: &CMatrix| -> (CMatrix, DVector<f64>, CMatrix) {
            let rhs = &rp - apply_a(a, &(r * &zinv)) + apply_a(a, &x_rd_zinv);
            let dy = chol.solve(&rhs);
            let dz = &rd - apply_at(a, &dy, n);
            let dx = hermitize(&((r - &x * &dz) * &zinv));
            (dx, dy, dz)
        };

        // Predictor.
        let xz = &x * &z;
        let (dxa, _, dza) = direction(&(-&xz));
        let ap = step_length(&x, &dxa);
        let ad = step_length(&z, &dza);
        let mu_aff = re_trace_product(&(&x + dxa.scale(ap)), &(&z + dza.scale(ad))) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let r = identity.scale(sigma * mu) - &xz - &dxa * &dza;
        let (dx, dy, dz) = direction(&r);
        let ap = step_length(&x, &dx);
        let ad = step_length(&z, &dz);
        x = hermitize(&(&x + dx.scale(ap)));
        y += dy * ad;
        z = hermitize(&(&z + dz.scale(ad)));
        iterations = it + 1;
    }
    if let Some((_, bx, by, bz)) = best {
        (x, y, z) = (bx, by, bz);
    }
    let primal_objective = re_trace_product(c, &x);
    let dual_objective = b.dot(&y);
    SdpSolution {
        x,
        y,
        z,
        primal_objective,
        dual_objective,
        iterations,
        converged,
    }
}

/// Hermitian constraint matrix selecting `Re X_pq` (`imag = false`) or
/// `Im X_pq` (`imag = true`).
pub fn entry_selector(n: usize, p: usize, q: usize, imag: bool) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    if p == q {
        a[(p, p)] = if imag { ZERO } else { ONE };
        return a;
    }
    if imag {
        a[(p, q)] = nalgebra::Complex::new(0.0, 0.5);
        a[(q, p)] = nalgebra::Complex::new(0.0, -0.5);
    } else {
        a[(p, q)] = ONE * 0.5;
        a[(q, p)] = ONE * 0.5;
    }
    a
}
