//! Multiple operator integrals for normal matrices.
//!
//! `moi_apply(phi, [A_1..A_n], [X_1..X_(n-1)])` evaluates
//!
//! ```text
//! sum_{i_1..i_n} phi(l_{i_1}, ..., l_{i_n}) P^1_{i_1} X_1 P^2_{i_2} ... X_(n-1) P^n_{i_n}
//! ```
//!
//! where `P^k_i` are the spectral projections of `A_k`. The atom weights do
//! not enter this sum; they only matter where the result is compared with a
//! Schur multiplier.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, CMatrix};
use crate::schur::{apply_multiplier, SymbolTensor};
use crate::spectral::{Kernel, NormalOperator};

/// `f(A) = sum_i f(l_i) P_i`.
pub fn functional_calculus(f: &[Complex64], a: &NormalOperator) -> Result<CMatrix> {
    if f.len() != a.spectrum().len() {
        return Err(Error::SpectrumMismatch { slot: 0 });
    }
    let d = a.dim();
    Ok(a.projections()
        .iter()
        .zip(f)
        .fold(CMatrix::zeros(d, d), |acc, (p, v)| acc + p * *v))
}

/// Shared precondition of every evaluation: operator count, atom alignment
/// (exact, order included) and square matrices of one common size.
pub(crate) fn check_operands(phi: &SymbolTensor, ops: &[NormalOperator], xs: &[CMatrix]) -> Result<usize> {
    let n = phi.order();
    if ops.len() != n {
        return Err(Error::OrderMismatch {
            expected: n,
            found: ops.len(),
        });
    }
    if xs.len() != n - 1 {
        return Err(Error::OrderMismatch {
            expected: n - 1,
            found: xs.len(),
        });
    }
    for (slot, (op, s)) in ops.iter().zip(phi.spectra()).enumerate() {
        if op.spectrum().atoms() != s.atoms() {
            return Err(Error::SpectrumMismatch { slot });
        }
    }
    let d = ops[0].dim();
    if let Some(op) = ops.iter().find(|op| op.dim() != d) {
        return Err(Error::DimensionMismatch(format!("operators of size {d} and {}", op.dim())));
    }
    if let Some(x) = xs.iter().find(|x| x.shape() != (d, d)) {
        return Err(Error::DimensionMismatch(format!("operand is {:?}, expected ({d}, {d})", x.shape())));
    }
    Ok(d)
}

/// Evaluates the multiple operator integral of `phi` at `(X_1, ..., X_(n-1))`.
///
/// Prefix products `P^1_{i_1} X_1 ... P^k_{i_k}` are reused across all
/// tuples sharing them. The outer index `i_1` runs in parallel; partial sums
/// are added in increasing `i_1`, so the result does not depend on the
/// thread count.
pub fn moi_apply(phi: &SymbolTensor, ops: &[NormalOperator], xs: &[CMatrix]) -> Result<CMatrix> {
    let d = check_operands(phi, ops, xs)?;
    let n = phi.order();
    // steps[k][i] = X_(k-1) P^(k)_i for k >= 1
    let steps: Vec<Vec<CMatrix>> = (1..n)
        .map(|k| ops[k].projections().iter().map(|p| &xs[k - 1] * p).collect())
        .collect();
    let shape = phi.shape();

    let partials: Vec<CMatrix> = (0..shape[0])
        .into_par_iter()
        .map(|i1| {
            let mut acc = CMatrix::zeros(d, d);
            let mut idx = vec![0usize; n];
            idx[0] = i1;
            let mut prefixes: Vec<CMatrix> = Vec::with_capacity(n);
            prefixes.push(ops[0].projections()[i1].clone());
            accumulate(phi, &steps, shape, 1, &mut idx, &mut prefixes, &mut acc);
            acc
        })
        .collect();
    Ok(partials.into_iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p))
}

fn accumulate(
    phi: &SymbolTensor,
    steps: &[Vec<CMatrix>],
    shape: &[usize],
    depth: usize,
    idx: &mut Vec<usize>,
    prefixes: &mut Vec<CMatrix>,
    acc: &mut CMatrix,
) {
    if depth == shape.len() {
        let coeff = phi.get(idx);
        if coeff != Complex64::new(0.0, 0.0) {
            *acc += prefixes.last().expect("non-empty prefix") * coeff;
        }
        return;
    }
    for i in 0..shape[depth] {
        idx[depth] = i;
        let next = prefixes.last().expect("non-empty prefix") * &steps[depth - 1][i];
        prefixes.push(next);
        accumulate(phi, steps, shape, depth + 1, idx, prefixes, acc);
        prefixes.pop();
    }
}

/// Largest `||[m, P_i]||_F` over the spectral projections of `op`.
pub fn commutant_defect(m: &CMatrix, op: &NormalOperator) -> f64 {
    op.projections()
        .iter()
        .map(|p| hs_norm(&(m * p - p * m)))
        .fold(0.0, f64::max)
}

/// Outcome of [`bimodule_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimoduleCheck {
    /// `||Gamma(dX_1, ..., X_(n-1)c) - d Gamma(X) c||_F`.
    pub deviation: f64,
    pub holds: bool,
}

/// Checks `Gamma(phi)(d X_1, ..., X_(n-1) c) = d Gamma(phi)(X_1, ..., X_(n-1)) c`
/// for `d` in the commutant of `A_1` and `c` in the commutant of `A_n`.
///
/// Membership is tested as `||[d, P_i]||_F <= tol * max(1, ||d||_F)`; failing
/// inputs are reported as [`Error::NotInCommutant`]. The identity itself is
/// accepted when the deviation is at most `tol * max(1, ||rhs||_F)`.
pub fn bimodule_check(
    phi: &SymbolTensor,
    ops: &[NormalOperator],
    xs: &[CMatrix],
    d: &CMatrix,
    c: &CMatrix,
    tol: f64,
) -> Result<BimoduleCheck> {
    let dim = check_operands(phi, ops, xs)?;
    if d.shape() != (dim, dim) || c.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch("module multipliers must match the operator size".into()));
    }
    let n = phi.order();
    let left = commutant_defect(d, &ops[0]);
    if left > tol * hs_norm(d).max(1.0) {
        return Err(Error::NotInCommutant {
            side: "left",
            defect: left,
        });
    }
    let right = commutant_defect(c, &ops[n - 1]);
    if right > tol * hs_norm(c).max(1.0) {
        return Err(Error::NotInCommutant {
            side: "right",
            defect: right,
        });
    }
    let mut moved = xs.to_vec();
    moved[0] = d * &moved[0];
    moved[n - 2] = &moved[n - 2] * c;
    let lhs = moi_apply(phi, ops, &moved)?;
    let rhs = d * moi_apply(phi, ops, xs)? * c;
    let deviation = hs_norm(&(&lhs - &rhs));
    Ok(BimoduleCheck {
        deviation,
        holds: deviation <= tol * hs_norm(&rhs).max(1.0),
    })
}

/// Outcome of [`connection_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCheck {
    /// The Schur multiplier evaluated on the kernels.
    pub multiplier: Kernel,
    /// The operator integral on the transported kernels, pulled back to
    /// `L^2(O_1) x L^2(O_n)`.
    pub pulled_back: Kernel,
    /// `||pulled_back - multiplier||_L2 / max(1, ||multiplier||_L2)`.
    pub deviation: f64,
    pub holds: bool,
}

/// Compares the Schur multiplier with the operator integral in the
/// eigenbases, for operators whose eigenvalues are all simple.
///
/// The unitary `rho_i : L^2(spectrum_i) -> H` sends the weighted orthonormal
/// basis vector of an atom to the stored unit eigenvector. Kernels are
/// transported as `rho_i K_i rho_(i+1)^*`, using their chain orientation
/// (see [`Kernel::chain_operator`]); the weights of `phi`'s spectra define
/// the measures.
pub fn connection_check(phi: &SymbolTensor, ops: &[NormalOperator], kernels: &[Kernel], tol: f64) -> Result<ConnectionCheck> {
    for (slot, op) in ops.iter().enumerate() {
        if let Some(&m) = op.multiplicities().iter().find(|&&m| m != 1) {
            return Err(Error::MultiplicityNotOne { slot, multiplicity: m });
        }
    }
    let multiplier = apply_multiplier(phi, kernels)?;
    let rho: Vec<CMatrix> = ops
        .iter()
        .map(|op| {
            let bases = op.eigenbases();
            let mut u = CMatrix::zeros(op.dim(), bases.len());
            for (j, b) in bases.iter().enumerate() {
                u.set_column(j, &b.column(0));
            }
            u
        })
        .collect();
    if let Some((slot, _)) = rho.iter().enumerate().find(|(_, u)| !u.is_square()) {
        return Err(Error::DimensionMismatch(format!(
            "operator {slot}: eigenvalue count differs from the dimension"
        )));
    }
    let transported: Vec<CMatrix> = kernels
        .iter()
        .enumerate()
        .map(|(i, k)| &rho[i] * k.chain_operator() * rho[i + 1].adjoint())
        .collect();
    let n = phi.order();
    let gamma = moi_apply(phi, ops, &transported)?;
    let pulled = rho[0].adjoint() * gamma * &rho[n - 1];
    let pulled_back = Kernel::from_chain_operator(&pulled, &phi.spectra()[0], &phi.spectra()[n - 1])?;
    let scale = multiplier.l2_norm().max(1.0);
    let diff = Kernel::new(
        multiplier.domain().clone(),
        multiplier.codomain().clone(),
        pulled_back.values() - multiplier.values(),
    )?;
    let deviation = diff.l2_norm() / scale;
    Ok(ConnectionCheck {
        multiplier,
        pulled_back,
        deviation,
        holds: deviation <= tol,
    })
}

/// One step of [`truncation_stability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationStep {
    /// `||Gamma(phi_k)(X) - Gamma(phi)(X)||_HS`.
    pub deviation: f64,
    /// `||phi_k - phi||_inf * prod ||X_i||_HS`.
    pub bound: f64,
}

/// Deviations of the operator integrals of a sequence of symbols from that of
/// its limit, each paired with the Hilbert-Schmidt contraction bound.
pub fn truncation_stability(
    sequence: &[SymbolTensor],
    limit: &SymbolTensor,
    ops: &[NormalOperator],
    xs: &[CMatrix],
) -> Result<Vec<TruncationStep>> {
    let target = moi_apply(limit, ops, xs)?;
    let hs_product: f64 = xs.iter().map(hs_norm).product();
    sequence
        .iter()
        .enumerate()
        .map(|(slot, phi_k)| {
            if phi_k.spectra() != limit.spectra() {
                return Err(Error::SpectrumMismatch { slot });
            }
            let value = moi_apply(phi_k, ops, xs)?;
            Ok(TruncationStep {
                deviation: hs_norm(&(value - &target)),
                bound: phi_k.sup_distance(limit)? * hs_product,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::spectral::WeightedSpectrum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    fn spectra_of(ops: &[NormalOperator]) -> Vec<WeightedSpectrum> {
        ops.iter().map(|o| o.spectrum().clone()).collect()
    }

    #[test]
    fn constant_symbol_gives_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::hermitian(&mut rng, 3)).unwrap())
            .collect();
        let phi = SymbolTensor::constant(spectra_of(&ops), c(1.0)).unwrap();
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let out = moi_apply(&phi, &ops, &xs).unwrap();
        assert!((out - &xs[0] * &xs[1]).norm() < 1e-12);
    }

    #[test]
    fn sum_symbol_gives_anticommutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = diag(&[1.0, 2.0]);
        let op = NormalOperator::decompose(&a).unwrap();
        let atoms = op.spectrum().atoms().to_vec();
        let phi = SymbolTensor::from_fn(vec![op.spectrum().clone(); 2], |idx| atoms[idx[0]] + atoms[idx[1]]).unwrap();
        let x = random::matrix(&mut rng, 2, 2);
        let out = moi_apply(&phi, &[op.clone(), op], &[x.clone()]).unwrap();
        let entrywise = CMatrix::from_fn(2, 2, |i, j| x[(i, j)] * c((i + 1 + j + 1) as f64));
        assert!((&out - entrywise).norm() < 1e-14);
        assert!((&out - (&a * &x + &x * &a)).norm() < 1e-14);
    }

    #[test]
    fn elementary_symbol_matches_functional_calculus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 4, &[1, 2, 1])).unwrap())
            .collect();
        let fs: Vec<Vec<Complex64>> = ops
            .iter()
            .map(|o| (0..o.spectrum().len()).map(|_| random::complex(&mut rng)).collect())
            .collect();
        let phi = SymbolTensor::elementary(spectra_of(&ops), &fs).unwrap();
        let xs = vec![random::matrix(&mut rng, 4, 4), random::matrix(&mut rng, 4, 4)];
        let out = moi_apply(&phi, &ops, &xs).unwrap();
        let f: Vec<CMatrix> = fs.iter().zip(&ops).map(|(f, o)| functional_calculus(f, o).unwrap()).collect();
        let expected = &f[0] * &xs[0] * &f[1] * &xs[1] * &f[2];
        assert!((out - &expected).norm() <= 1e-13 * expected.norm());
    }

    #[test]
    fn functional_calculus_basics() {
        let op = NormalOperator::decompose(&diag(&[1.0, 2.0, 3.0])).unwrap();
        let one = functional_calculus(&[c(1.0); 3], &op).unwrap();
        assert!((one - CMatrix::identity(3, 3)).norm() < 1e-15);
        let id = functional_calculus(op.spectrum().atoms(), &op).unwrap();
        assert!((id - diag(&[1.0, 2.0, 3.0])).norm() < 1e-15);
        assert!(matches!(functional_calculus(&[c(1.0)], &op), Err(Error::SpectrumMismatch { .. })));
    }

    #[test]
    fn functional_calculus_is_star_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let op = NormalOperator::decompose(&random::normal_matrix(&mut rng, 4, &[2, 1, 1])).unwrap();
        let f: Vec<_> = (0..3).map(|_| random::complex(&mut rng)).collect();
        let g: Vec<_> = (0..3).map(|_| random::complex(&mut rng)).collect();
        let fg: Vec<_> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
        let fa = functional_calculus(&f, &op).unwrap();
        let ga = functional_calculus(&g, &op).unwrap();
        assert!((functional_calculus(&fg, &op).unwrap() - &fa * &ga).norm() < 1e-12);
        let fbar: Vec<_> = f.iter().map(|z| z.conj()).collect();
        assert!((functional_calculus(&fbar, &op).unwrap() - fa.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn exp_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let h = random::hermitian(&mut rng, 4);
            let op = NormalOperator::decompose(&h).unwrap();
            let f: Vec<_> = op.spectrum().atoms().iter().map(|z| z.exp()).collect();
            let via_spectrum = functional_calculus(&f, &op).unwrap();
            let oracle = h.clone().exp();
            assert!((via_spectrum - &oracle).norm() <= 1e-10 * oracle.norm());
        }
    }

    #[test]
    fn multilinear_in_each_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::hermitian(&mut rng, 3)).unwrap())
            .collect();
        let phi = random::symbol(&mut rng, spectra_of(&ops));
        let (x, y, z) = (random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3));
        let (a, b) = (random::complex(&mut rng), random::complex(&mut rng));
        let lhs = moi_apply(&phi, &ops, &[x.clone(), &y * a + &z * b]).unwrap();
        let rhs = moi_apply(&phi, &ops, &[x.clone(), y]).unwrap() * a + moi_apply(&phi, &ops, &[x, z]).unwrap() * b;
        assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn unitary_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random::unitary(&mut rng, 3);
        let mut ops = Vec::new();
        let mut rotated = Vec::new();
        for _ in 0..3 {
            let s = random::spectrum(&mut rng, 3);
            let v = random::unitary(&mut rng, 3);
            ops.push(NormalOperator::rotated_diagonal(&s, &v).unwrap());
            rotated.push(NormalOperator::rotated_diagonal(&s, &(&u * &v)).unwrap());
        }
        let phi = random::symbol(&mut rng, spectra_of(&ops));
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let xs_rot: Vec<_> = xs.iter().map(|x| &u * x * u.adjoint()).collect();
        let lhs = moi_apply(&phi, &rotated, &xs_rot).unwrap();
        let rhs = &u * moi_apply(&phi, &ops, &xs).unwrap() * u.adjoint();
        assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn hilbert_schmidt_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let ops: Vec<_> = (0..3)
                .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 4, &[1, 3])).unwrap())
                .collect();
            let phi = random::symbol(&mut rng, spectra_of(&ops));
            let xs = vec![random::matrix(&mut rng, 4, 4), random::matrix(&mut rng, 4, 4)];
            let out = moi_apply(&phi, &ops, &xs).unwrap();
            assert!(out.norm() <= phi.sup_norm() * xs[0].norm() * xs[1].norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn operand_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let op = NormalOperator::decompose(&diag(&[1.0, 2.0])).unwrap();
        let other = NormalOperator::decompose(&diag(&[1.0, 3.0])).unwrap();
        let phi = random::symbol(&mut rng, vec![op.spectrum().clone(); 2]);
        let x = random::matrix(&mut rng, 2, 2);
        assert!(matches!(
            moi_apply(&phi, &[op.clone(), other], &[x.clone()]),
            Err(Error::SpectrumMismatch { slot: 1 })
        ));
        assert!(matches!(
            moi_apply(&phi, &[op.clone(), op.clone()], &[random::matrix(&mut rng, 3, 3)]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(moi_apply(&phi, &[op], &[x]), Err(Error::OrderMismatch { .. })));
    }

    #[test]
    fn bimodule_identity_and_rejection() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 3, &[1, 1, 1])).unwrap())
            .collect();
        let phi = random::symbol(&mut rng, spectra_of(&ops));
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let id = CMatrix::identity(3, 3);
        assert!(bimodule_check(&phi, &ops, &xs, &id, &id, 1e-12).unwrap().holds);

        let a1 = ops[0].matrix();
        let d = a1 * a1 * c(0.5) + a1 * Complex64::new(0.0, 2.0) + &id * c(-1.0);
        let a3 = ops[2].matrix();
        let cm = a3 * Complex64::new(1.0, 1.0) + &id;
        assert!(bimodule_check(&phi, &ops, &xs, &d, &cm, 1e-12).unwrap().holds);

        let bad = random::matrix(&mut rng, 3, 3);
        assert!(matches!(
            bimodule_check(&phi, &ops, &xs, &bad, &id, 1e-12),
            Err(Error::NotInCommutant { side: "left", .. })
        ));
        assert!(matches!(
            bimodule_check(&phi, &ops, &xs, &id, &bad, 1e-12),
            Err(Error::NotInCommutant { side: "right", .. })
        ));
    }

    fn random_kernels(rng: &mut ChaCha8Rng, spectra: &[WeightedSpectrum]) -> Vec<Kernel> {
        spectra
            .windows(2)
            .map(|w| Kernel::new(w[0].clone(), w[1].clone(), random::matrix(rng, w[0].len(), w[1].len())).unwrap())
            .collect()
    }

    #[test]
    fn connection_in_standard_basis_is_literal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spectrum = WeightedSpectrum::uniform(vec![c(1.0), c(2.0), c(3.0)]).unwrap();
        let op = NormalOperator::diagonal(&spectrum);
        let ops = vec![op.clone(), op.clone(), op];
        let phi = random::symbol(&mut rng, vec![spectrum.clone(); 3]);
        let kernels = random_kernels(&mut rng, phi.spectra());
        let xs: Vec<_> = kernels.iter().map(|k| k.values().clone()).collect();
        let gamma = moi_apply(&phi, &ops, &xs).unwrap();
        let lambda = apply_multiplier(&phi, &kernels).unwrap();
        assert!((gamma - lambda.values()).norm() < 1e-13);
        assert!(connection_check(&phi, &ops, &kernels, 1e-12).unwrap().holds);
    }

    #[test]
    fn connection_with_rotations_and_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for weights in [vec![1.0, 1.0], vec![2.0, 1.0]] {
            let ops: Vec<_> = (0..3)
                .map(|_| {
                    let s = random::spectrum(&mut rng, 2).with_weights(weights.clone()).unwrap();
                    NormalOperator::rotated_diagonal(&s, &random::unitary(&mut rng, 2)).unwrap()
                })
                .collect();
            let phi = random::symbol(&mut rng, spectra_of(&ops));
            let kernels = random_kernels(&mut rng, phi.spectra());
            let check = connection_check(&phi, &ops, &kernels, 1e-12).unwrap();
            assert!(check.holds, "deviation {}", check.deviation);
        }
    }

    #[test]
    fn connection_rejects_multiplicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let op = NormalOperator::decompose(&diag(&[1.0, 1.0, 2.0])).unwrap();
        let phi = random::symbol(&mut rng, vec![op.spectrum().clone(); 2]);
        let kernels = random_kernels(&mut rng, phi.spectra());
        assert!(matches!(
            connection_check(&phi, &[op.clone(), op], &kernels, 1e-12),
            Err(Error::MultiplicityNotOne { slot: 0, multiplicity: 2 })
        ));
    }

    #[test]
    fn truncation_constant_and_scaled_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::hermitian(&mut rng, 3)).unwrap())
            .collect();
        let phi = random::symbol(&mut rng, spectra_of(&ops));
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let same = truncation_stability(&[phi.clone(), phi.clone()], &phi, &ops, &xs).unwrap();
        assert!(same.iter().all(|s| s.deviation == 0.0));

        let full = moi_apply(&phi, &ops, &xs).unwrap().norm();
        let seq: Vec<_> = (1..=5).map(|k| phi.scaled(c(1.0 - 1.0 / k as f64))).collect();
        let steps = truncation_stability(&seq, &phi, &ops, &xs).unwrap();
        for (k, s) in steps.iter().enumerate() {
            let expected = full / (k + 1) as f64;
            assert!((s.deviation - expected).abs() <= 1e-12 * full);
            assert!(s.deviation <= s.bound * (1.0 + 1e-12));
        }
    }
}
