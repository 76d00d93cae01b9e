//! Factorization data `phi(t) = <a_1(t_1), a_2(t_2) ... a_(n-1)(t_(n-1)) a_n(t_n)>`
//! through auxiliary Hilbert spaces `H_1, ..., H_(n-1)`.
//!
//! The inner product is conjugate-linear in its first argument, so in
//! coordinates `phi(t) = a_1(t_1)^* a_2(t_2) ... a_n(t_n)`. The middle factor
//! `a_i(t)` maps `H_i -> H_(i-1)` and is stored as a `dim H_(i-1) x dim H_i`
//! matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal_copies, is_finite, op_norm, CMatrix, CVector};
use crate::moi::{check_operands, functional_calculus};
use crate::schur::SymbolTensor;
use crate::spectral::{NormalOperator, WeightedSpectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationData {
    hilbert_dims: Vec<usize>,
    a_first: Vec<CVector>,
    a_mid: Vec<Vec<CMatrix>>,
    a_last: Vec<CVector>,
}

impl FactorizationData {
    /// `a_mid[j]` holds the factor for the `(j + 2)`-th spectrum, one matrix
    /// per atom.
    pub fn new(hilbert_dims: Vec<usize>, a_first: Vec<CVector>, a_mid: Vec<Vec<CMatrix>>, a_last: Vec<CVector>) -> Result<Self> {
        if hilbert_dims.is_empty() {
            return Err(Error::InvalidData("need at least one auxiliary Hilbert space".into()));
        }
        if let Some(slot) = hilbert_dims.iter().position(|&d| d == 0) {
            return Err(Error::RankTooSmall { slot: slot + 1 });
        }
        let m = hilbert_dims.len();
        if a_mid.len() != m - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} middle factors for {} Hilbert spaces",
                a_mid.len(),
                m
            )));
        }
        if a_first.is_empty() || a_last.is_empty() || a_mid.iter().any(|f| f.is_empty()) {
            return Err(Error::InvalidData("every factor needs at least one atom".into()));
        }
        if a_first.iter().any(|v| v.len() != hilbert_dims[0]) {
            return Err(Error::DimensionMismatch("a_first entries must lie in H_1".into()));
        }
        if a_last.iter().any(|v| v.len() != hilbert_dims[m - 1]) {
            return Err(Error::DimensionMismatch(format!("a_last entries must lie in H_{m}")));
        }
        for (j, factor) in a_mid.iter().enumerate() {
            let shape = (hilbert_dims[j], hilbert_dims[j + 1]);
            if factor.iter().any(|a| a.shape() != shape) {
                return Err(Error::DimensionMismatch(format!(
                    "factor {} must map H_{} -> H_{}",
                    j + 2,
                    j + 2,
                    j + 1
                )));
            }
        }
        let finite = a_first.iter().chain(&a_last).all(|v| is_finite(v)) && a_mid.iter().flatten().all(is_finite);
        if !finite {
            return Err(Error::InvalidData("factorization has non-finite entries".into()));
        }
        Ok(Self {
            hilbert_dims,
            a_first,
            a_mid,
            a_last,
        })
    }

    pub fn order(&self) -> usize {
        self.hilbert_dims.len() + 1
    }

    pub fn hilbert_dims(&self) -> &[usize] {
        &self.hilbert_dims
    }

    pub fn a_first(&self) -> &[CVector] {
        &self.a_first
    }

    pub fn a_mid(&self) -> &[Vec<CMatrix>] {
        &self.a_mid
    }

    pub fn a_last(&self) -> &[CVector] {
        &self.a_last
    }

    /// Number of atoms each factor is tabulated on.
    pub fn atom_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.a_first.len()];
        counts.extend(self.a_mid.iter().map(|f| f.len()));
        counts.push(self.a_last.len());
        counts
    }

    /// Per-factor `||a_i||_inf`: Euclidean norm for the end factors, operator
    /// norm for the middle ones, maximized over atoms.
    pub fn sup_norms(&self) -> Vec<f64> {
        let vec_sup = |vs: &[CVector]| vs.iter().fold(0.0, |m: f64, v| m.max(v.norm()));
        let mut out = vec![vec_sup(&self.a_first)];
        out.extend(self.a_mid.iter().map(|f| f.iter().fold(0.0, |m: f64, a| m.max(op_norm(a)))));
        out.push(vec_sup(&self.a_last));
        out
    }

    /// `prod_i ||a_i||_inf`, an upper bound for the Haagerup norm of the
    /// synthesized symbol.
    pub fn sup_norm_product(&self) -> f64 {
        self.sup_norms().iter().product()
    }

    /// Tensor-train cores: `G_1(t) = a_1(t)^*` (row), the middle factors, and
    /// `G_n(t) = a_n(t)` (column), so `phi(t) = G_1(t_1) ... G_n(t_n)`.
    #[cfg(test)]
    pub(crate) fn to_cores(&self) -> Vec<Vec<CMatrix>> {
        let mut cores = vec![self.a_first.iter().map(|v| CMatrix::from_row_slice(1, v.len(), v.adjoint().as_slice())).collect::<Vec<CMatrix>>()];
        cores.extend(self.a_mid.iter().cloned());
        cores.push(self.a_last.iter().map(|v| CMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect());
        cores
    }

    pub(crate) fn from_cores(cores: &[Vec<CMatrix>]) -> Result<Self> {
        let n = cores.len();
        if n < 2 {
            return Err(Error::InvalidData("need at least two cores".into()));
        }
        let dims: Vec<usize> = cores[..n - 1].iter().map(|c| c[0].ncols()).collect();
        let a_first = cores[0].iter().map(|g| g.adjoint().column(0).into_owned()).collect();
        let a_mid = cores[1..n - 1].to_vec();
        let a_last = cores[n - 1].iter().map(|g| g.column(0).into_owned()).collect();
        Self::new(dims, a_first, a_mid, a_last)
    }

    /// Value of the synthesized symbol at one atom tuple.
    pub fn evaluate(&self, idx: &[usize]) -> Complex64 {
        let n = self.order();
        let mut row = self.a_first[idx[0]].adjoint();
        for (j, f) in self.a_mid.iter().enumerate() {
            row = row * &f[idx[j + 1]];
        }
        (row * &self.a_last[idx[n - 1]])[(0, 0)]
    }

    /// Pointwise synthesis over the given spectra.
    pub fn synthesize_symbol(&self, spectra: &[WeightedSpectrum]) -> Result<SymbolTensor> {
        let counts = self.atom_counts();
        let sizes: Vec<usize> = spectra.iter().map(|s| s.len()).collect();
        if sizes != counts {
            return Err(Error::DimensionMismatch(format!(
                "spectra have {sizes:?} atoms, factorization is tabulated on {counts:?}"
            )));
        }
        SymbolTensor::from_fn(spectra.to_vec(), |idx| self.evaluate(idx))
    }

    /// Realizes the operator integral of the synthesized symbol as the block
    /// product `A^1 (X_1 (x) I) A^2 (X_2 (x) I) ... (X_(n-1) (x) I) A^n`.
    ///
    /// `A^1` is the row `[a^1_k(A_1)]_k` with `a^1_k = <a_1, e_k>`, `A^i` the
    /// block matrix `[a^i_kl(A_i)]`, and `A^n` the column `[a^n_l(A_n)]_l`.
    pub fn block_realization(&self, ops: &[NormalOperator], xs: &[CMatrix]) -> Result<CMatrix> {
        let n = self.order();
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
        let counts = self.atom_counts();
        for (slot, (op, &m)) in ops.iter().zip(&counts).enumerate() {
            if op.spectrum().len() != m {
                return Err(Error::SpectrumMismatch { slot });
            }
        }
        let d = ops[0].dim();
        if ops.iter().any(|o| o.dim() != d) || xs.iter().any(|x| x.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("operands must share one square size".into()));
        }

        let coordinate = |values: Vec<Complex64>, op: &NormalOperator| functional_calculus(&values, op);
        let dims = &self.hilbert_dims;

        let mut first = CMatrix::zeros(d, dims[0] * d);
        for k in 0..dims[0] {
            let f = coordinate(self.a_first.iter().map(|v| v[k].conj()).collect(), &ops[0])?;
            first.view_mut((0, k * d), (d, d)).copy_from(&f);
        }
        let mut product = first * block_diagonal_copies(&xs[0], dims[0]);
        for (j, factor) in self.a_mid.iter().enumerate() {
            let (rows, cols) = (dims[j], dims[j + 1]);
            let mut block = CMatrix::zeros(rows * d, cols * d);
            for k in 0..rows {
                for l in 0..cols {
                    let f = coordinate(factor.iter().map(|a| a[(k, l)]).collect(), &ops[j + 1])?;
                    block.view_mut((k * d, l * d), (d, d)).copy_from(&f);
                }
            }
            product = product * block * block_diagonal_copies(&xs[j + 1], cols);
        }
        let last_dim = dims[n - 2];
        let mut last = CMatrix::zeros(last_dim * d, d);
        for l in 0..last_dim {
            let f = coordinate(self.a_last.iter().map(|v| v[l]).collect(), &ops[n - 1])?;
            last.view_mut((l * d, 0), (d, d)).copy_from(&f);
        }
        Ok(product * last)
    }

    /// Compresses every factor through the projections onto the first
    /// `ranks[i]` basis vectors of `H_(i+1)`.
    pub fn truncate(&self, ranks: &[usize]) -> Result<Self> {
        if ranks.len() != self.hilbert_dims.len() {
            return Err(Error::OrderMismatch {
                expected: self.hilbert_dims.len(),
                found: ranks.len(),
            });
        }
        for (i, (&r, &dim)) in ranks.iter().zip(&self.hilbert_dims).enumerate() {
            if r == 0 {
                return Err(Error::RankTooSmall { slot: i + 1 });
            }
            if r > dim {
                return Err(Error::RankTooLarge { slot: i + 1, rank: r, dim });
            }
        }
        let m = ranks.len();
        let a_first = self.a_first.iter().map(|v| v.rows(0, ranks[0]).into_owned()).collect();
        let a_mid = self
            .a_mid
            .iter()
            .enumerate()
            .map(|(j, f)| f.iter().map(|a| a.view((0, 0), (ranks[j], ranks[j + 1])).into_owned()).collect())
            .collect();
        let a_last = self.a_last.iter().map(|v| v.rows(0, ranks[m - 1]).into_owned()).collect();
        Self::new(ranks.to_vec(), a_first, a_mid, a_last)
    }

    /// Expresses the same factorization in rotated bases: `a_1 -> U_1 a_1`,
    /// `a_i -> U_(i-1) a_i U_i^*`, `a_n -> U_(n-1) a_n`. The synthesized symbol
    /// and the sup norms are unchanged for unitary `U_i`.
    pub fn change_basis(&self, unitaries: &[CMatrix]) -> Result<Self> {
        let m = self.hilbert_dims.len();
        if unitaries.len() != m {
            return Err(Error::OrderMismatch {
                expected: m,
                found: unitaries.len(),
            });
        }
        for (u, &dim) in unitaries.iter().zip(&self.hilbert_dims) {
            if u.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("basis change {:?} on H of dim {dim}", u.shape())));
            }
        }
        let a_first = self.a_first.iter().map(|v| &unitaries[0] * v).collect();
        let a_mid = self
            .a_mid
            .iter()
            .enumerate()
            .map(|(j, f)| f.iter().map(|a| &unitaries[j] * a * unitaries[j + 1].adjoint()).collect())
            .collect();
        let a_last = self.a_last.iter().map(|v| &unitaries[m - 1] * v).collect();
        Self::new(self.hilbert_dims.clone(), a_first, a_mid, a_last)
    }

    /// Multiplies the synthesized symbol by `c`, absorbing it into `a_1`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.a_first {
            *v *= c.conj();
        }
        out
    }
}

/// Convenience wrapper: the operator integral of the synthesized symbol
/// evaluated the direct way, for cross-checking [`FactorizationData::block_realization`].
pub fn realization_via_moi(f: &FactorizationData, ops: &[NormalOperator], xs: &[CMatrix]) -> Result<CMatrix> {
    let spectra: Vec<WeightedSpectrum> = ops.iter().map(|o| o.spectrum().clone()).collect();
    let phi = f.synthesize_symbol(&spectra)?;
    check_operands(&phi, ops, xs)?;
    crate::moi::moi_apply(&phi, ops, xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{MultiIndex, ONE, ZERO};
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectra(counts: &[usize]) -> Vec<WeightedSpectrum> {
        counts.iter().map(|&m| WeightedSpectrum::indices(m)).collect()
    }

    fn unit_factorization(counts: &[usize], dims: &[usize]) -> FactorizationData {
        let e = |dim: usize| CVector::from_fn(dim, |i, _| if i == 0 { ONE } else { ZERO });
        let n = counts.len();
        FactorizationData::new(
            dims.to_vec(),
            (0..counts[0]).map(|_| e(dims[0])).collect(),
            (1..n - 1)
                .map(|i| (0..counts[i]).map(|_| CMatrix::identity(dims[i - 1], dims[i])).collect())
                .collect(),
            (0..counts[n - 1]).map(|_| e(dims[n - 2])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_spaces_give_product_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random::factorization(&mut rng, &[2, 3, 2], &[1, 1]);
        let phi = f.synthesize_symbol(&spectra(&[2, 3, 2])).unwrap();
        for idx in MultiIndex::new(&[2, 3, 2]) {
            let expected = f.a_first()[idx[0]][0].conj() * f.a_mid()[0][idx[1]][(0, 0)] * f.a_last()[idx[2]][0];
            assert!((phi.get(&idx) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_vectors_and_identities_give_one() {
        let f = unit_factorization(&[2, 3, 2], &[3, 3]);
        let phi = f.synthesize_symbol(&spectra(&[2, 3, 2])).unwrap();
        assert!(phi.values().iter().all(|z| (z - ONE).norm() < 1e-15));
        assert!((f.sup_norm_product() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_pointwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random::factorization(&mut rng, &[3, 2, 4], &[2, 3]);
        let phi = f.synthesize_symbol(&spectra(&[3, 2, 4])).unwrap();
        for idx in MultiIndex::new(&[3, 2, 4]) {
            let a1 = &f.a_first()[idx[0]];
            let m = &f.a_mid()[0][idx[1]];
            let a3 = &f.a_last()[idx[2]];
            let mut acc = ZERO;
            for k in 0..2 {
                for l in 0..3 {
                    acc += a1[k].conj() * m[(k, l)] * a3[l];
                }
            }
            assert!((phi.get(&idx) - acc).norm() <= 1e-14 * acc.norm().max(1.0));
        }
    }

    #[test]
    fn synthesis_bound_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let counts = vec![3; n];
            let dims = vec![2; n - 1];
            let f = random::factorization(&mut rng, &counts, &dims);
            let phi = f.synthesize_symbol(&spectra(&counts)).unwrap();
            assert!(phi.sup_norm() <= f.sup_norm_product() * (1.0 + 1e-12));
            let c = Complex64::new(-2.0, 1.5);
            let scaled = f.scaled(c);
            assert!((scaled.sup_norm_product() - c.norm() * f.sup_norm_product()).abs() < 1e-12);
            let phi_c = scaled.synthesize_symbol(&spectra(&counts)).unwrap();
            assert!(phi_c.sup_distance(&phi.scaled(c)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sup_norms_recomputed_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random::factorization(&mut rng, &[2, 3, 3, 2], &[2, 3, 2]);
        let mut expected = 1.0;
        expected *= f.a_first().iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
        for factor in f.a_mid() {
            // operator norm as the square root of the top eigenvalue of a^* a
            let best = factor
                .iter()
                .map(|a| {
                    let g = a.adjoint() * a;
                    nalgebra::SymmetricEigen::new(g).eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l)).sqrt()
                })
                .fold(0.0, f64::max);
            expected *= best;
        }
        expected *= f.a_last().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((f.sup_norm_product() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn basis_change_is_invisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random::factorization(&mut rng, &[3, 3, 3], &[2, 3]);
        let us = vec![random::unitary(&mut rng, 2), random::unitary(&mut rng, 3)];
        let g = f.change_basis(&us).unwrap();
        let s = spectra(&[3, 3, 3]);
        let d = f.synthesize_symbol(&s).unwrap().sup_distance(&g.synthesize_symbol(&s).unwrap()).unwrap();
        assert!(d < 1e-13);
        assert!((f.sup_norm_product() - g.sup_norm_product()).abs() < 1e-12 * f.sup_norm_product());
    }

    #[test]
    fn realization_with_scalar_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 3, &[1, 1, 1])).unwrap())
            .collect();
        let f = random::factorization(&mut rng, &[3, 3, 3], &[1, 1]);
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let block = f.block_realization(&ops, &xs).unwrap();
        let f1 = functional_calculus(&f.a_first().iter().map(|v| v[0].conj()).collect::<Vec<_>>(), &ops[0]).unwrap();
        let f2 = functional_calculus(&f.a_mid()[0].iter().map(|a| a[(0, 0)]).collect::<Vec<_>>(), &ops[1]).unwrap();
        let f3 = functional_calculus(&f.a_last().iter().map(|v| v[0]).collect::<Vec<_>>(), &ops[2]).unwrap();
        let expected = f1 * &xs[0] * f2 * &xs[1] * f3;
        assert!((block - &expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn realization_of_unit_symbol_is_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ops: Vec<_> = (0..3)
            .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 3, &[2, 1])).unwrap())
            .collect();
        let f = unit_factorization(&[2, 2, 2], &[2, 2]);
        let xs = vec![random::matrix(&mut rng, 3, 3), random::matrix(&mut rng, 3, 3)];
        let block = f.block_realization(&ops, &xs).unwrap();
        assert!((block - &xs[0] * &xs[1]).norm() < 1e-12);
    }

    #[test]
    fn realization_matches_moi_and_norm_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let ops: Vec<_> = (0..3)
                .map(|_| NormalOperator::decompose(&random::normal_matrix(&mut rng, 3, &[1, 1, 1])).unwrap())
                .collect();
            let f = random::factorization(&mut rng, &[3, 3, 3], &[2, 2]);
            let xs = vec![random::contraction(&mut rng, 3), random::contraction(&mut rng, 3)];
            let block = f.block_realization(&ops, &xs).unwrap();
            let direct = realization_via_moi(&f, &ops, &xs).unwrap();
            assert!((&block - &direct).norm() <= 1e-12 * direct.norm().max(1.0));
            assert!(op_norm(&block) <= f.sup_norm_product() + 1e-9);
        }
    }

    #[test]
    fn truncation_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random::factorization(&mut rng, &[3, 3, 3], &[3, 3]);
        assert_eq!(f.truncate(&[3, 3]).unwrap(), f);
        assert!(matches!(f.truncate(&[0, 3]), Err(Error::RankTooSmall { slot: 1 })));
        assert!(matches!(f.truncate(&[3, 4]), Err(Error::RankTooLarge { slot: 2, rank: 4, dim: 3 })));
    }

    #[test]
    fn truncation_converges_and_certificate_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random::factorization(&mut rng, &[3, 3, 3], &[3, 3]);
        let s = spectra(&[3, 3, 3]);
        let phi = f.synthesize_symbol(&s).unwrap();
        let mut previous = f64::INFINITY;
        for r in 1..=3 {
            let t = f.truncate(&[r, r]).unwrap();
            assert!(t.sup_norm_product() <= f.sup_norm_product() * (1.0 + 1e-12));
            let err = t.synthesize_symbol(&s).unwrap().sup_distance(&phi).unwrap();
            assert!(err < previous);
            previous = err;
        }
        assert!(previous < 1e-13);
    }

    #[test]
    fn rejects_inconsistent_dims() {
        let v = CVector::from_element(2, ONE);
        assert!(FactorizationData::new(vec![2], vec![v.clone()], vec![], vec![CVector::from_element(3, ONE)]).is_err());
        assert!(matches!(
            FactorizationData::new(vec![0], vec![v.clone()], vec![], vec![v]),
            Err(Error::RankTooSmall { slot: 1 })
        ));
    }

    #[test]
    fn cores_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random::factorization(&mut rng, &[2, 3, 2], &[2, 3]);
        assert_eq!(FactorizationData::from_cores(&f.to_cores()).unwrap(), f);
    }
}
