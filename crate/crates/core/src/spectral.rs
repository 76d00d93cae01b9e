//! Weighted discrete spectra, spectral decomposition of normal matrices and
//! the identification of kernels with Hilbert-Schmidt operators.

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, is_finite, op_norm, CMatrix};

/// Relative clustering tolerance used by [`NormalOperator::decompose`].
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
/// Normality tolerance used by [`NormalOperator::decompose`].
pub const DEFAULT_NORMALITY_TOL: f64 = 1e-10;

/// A finite measure space: distinct atoms carrying strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpectrum {
    atoms: Vec<Complex64>,
    weights: Vec<f64>,
}

impl WeightedSpectrum {
    pub fn new(atoms: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidSpectrum("no atoms".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidSpectrum(format!("weight {w} is not strictly positive")));
        }
        if atoms.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidSpectrum("non-finite atom".into()));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if atoms[i] == atoms[j] {
                    return Err(Error::InvalidSpectrum(format!("atom {} repeated", atoms[i])));
                }
            }
        }
        Ok(Self { atoms, weights })
    }

    /// Counting measure on the given atoms.
    pub fn uniform(atoms: Vec<Complex64>) -> Result<Self> {
        let weights = vec![1.0; atoms.len()];
        Self::new(atoms, weights)
    }

    /// Atoms `0, 1, ..., m-1` with unit weights.
    pub fn indices(m: usize) -> Self {
        Self::uniform((0..m).map(|k| Complex64::new(k as f64, 0.0)).collect())
            .expect("distinct integer atoms")
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.atoms.clone(), weights)
    }

    pub fn atoms(&self) -> &[Complex64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// A normal matrix with its grouped spectral decomposition.
///
/// `bases[i]` holds an orthonormal basis of the `i`-th eigenspace, so the
/// spectral projection is `bases[i] * bases[i]^*`.
#[derive(Debug, Clone)]
pub struct NormalOperator {
    matrix: CMatrix,
    spectrum: WeightedSpectrum,
    projections: Vec<CMatrix>,
    bases: Vec<CMatrix>,
}

impl NormalOperator {
    /// [`spectral_decompose`] with the default tolerances.
    pub fn decompose(a: &CMatrix) -> Result<Self> {
        spectral_decompose(a, DEFAULT_CLUSTER_TOL * op_norm(a).max(1.0), DEFAULT_NORMALITY_TOL)
    }

    /// `diag(atoms)` in the standard basis.
    pub fn diagonal(spectrum: &WeightedSpectrum) -> Self {
        let m = spectrum.len();
        let bases: Vec<CMatrix> = (0..m)
            .map(|i| CMatrix::from_fn(m, 1, |r, _| if r == i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }))
            .collect();
        let projections = bases.iter().map(|b| b * b.adjoint()).collect();
        let matrix = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spectrum.atoms()));
        Self {
            matrix,
            spectrum: spectrum.clone(),
            projections,
            bases,
        }
    }

    /// Diagonal operator of size `dim >= |atoms|` whose `j`-th diagonal entry
    /// is atom `j mod |atoms|`, so every atom occurs with multiplicity
    /// `dim / |atoms|` rounded up or down.
    pub fn cyclic_diagonal(spectrum: &WeightedSpectrum, dim: usize) -> Result<Self> {
        let m = spectrum.len();
        if dim < m {
            return Err(Error::DimensionMismatch(format!("{dim} rows cannot hold {m} atoms")));
        }
        let bases: Vec<CMatrix> = (0..m)
            .map(|a| {
                let rows: Vec<usize> = (a..dim).step_by(m).collect();
                CMatrix::from_fn(dim, rows.len(), |r, c| {
                    if r == rows[c] {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        let projections = bases.iter().map(|b| b * b.adjoint()).collect();
        let diag: Vec<Complex64> = (0..dim).map(|j| spectrum.atoms()[j % m]).collect();
        let matrix = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        Ok(Self {
            matrix,
            spectrum: spectrum.clone(),
            projections,
            bases,
        })
    }

    /// `U diag(atoms) U^*` for a unitary `U`; each atom has multiplicity one.
    pub fn rotated_diagonal(spectrum: &WeightedSpectrum, unitary: &CMatrix) -> Result<Self> {
        let m = spectrum.len();
        if unitary.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {:?}, spectrum has {m} atoms",
                unitary.shape()
            )));
        }
        let bases: Vec<CMatrix> = (0..m).map(|i| unitary.columns(i, 1).into_owned()).collect();
        let projections = bases.iter().map(|b| b * b.adjoint()).collect();
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(spectrum.atoms()));
        let matrix = unitary * diag * unitary.adjoint();
        Ok(Self {
            matrix,
            spectrum: spectrum.clone(),
            projections,
            bases,
        })
    }

    /// Replaces the scalar spectral measure; the operator is unchanged.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Ok(Self {
            spectrum: self.spectrum.with_weights(weights)?,
            ..self.clone()
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn spectrum(&self) -> &WeightedSpectrum {
        &self.spectrum
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    pub fn eigenbases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }
}

/// Groups the eigenvalues of a normal matrix into atoms and returns the
/// orthogonal spectral projections.
///
/// Eigenvalues closer than `cluster_tol` (single linkage) share an atom,
/// placed at the cluster mean. Atoms are sorted by real then imaginary part.
/// The default weight of an atom is the rank of its projection.
pub fn spectral_decompose(a: &CMatrix, cluster_tol: f64, normality_tol: f64) -> Result<NormalOperator> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NonSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::InvalidData("empty matrix".into()));
    }
    if !is_finite(a) {
        return Err(Error::InvalidData("matrix has non-finite entries".into()));
    }
    let fro = hs_norm(a);
    let defect = hs_norm(&(a * a.adjoint() - a.adjoint() * a));
    let bound = normality_tol * fro.powi(2).max(1.0);
    if defect > bound {
        return Err(Error::NotNormal { defect, bound });
    }

    let (q, t) = Schur::new(a.clone()).unpack();
    let eigenvalues: Vec<Complex64> = (0..rows).map(|i| t[(i, i)]).collect();

    // single-linkage clustering via union-find
    let mut parent: Vec<usize> = (0..rows).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..rows {
        for j in 0..i {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= cluster_tol {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; rows];
    for i in 0..rows {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    let mut groups: Vec<(Complex64, Vec<usize>)> = clusters
        .into_iter()
        .map(|members| {
            let sum: Complex64 = members.iter().map(|&i| eigenvalues[i]).sum();
            (sum / members.len() as f64, members)
        })
        .collect();
    groups.sort_by(|x, y| {
        x.0.re
            .total_cmp(&y.0.re)
            .then_with(|| x.0.im.total_cmp(&y.0.im))
    });
    // clustering can in principle produce equal means for distinct groups
    for w in groups.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidSpectrum("two eigenvalue clusters share a mean".into()));
        }
    }

    let mut atoms = Vec::with_capacity(groups.len());
    let mut weights = Vec::with_capacity(groups.len());
    let mut bases = Vec::with_capacity(groups.len());
    for (atom, members) in &groups {
        let mut basis = CMatrix::zeros(rows, members.len());
        for (c, &i) in members.iter().enumerate() {
            basis.set_column(c, &q.column(i));
        }
        atoms.push(*atom);
        weights.push(members.len() as f64);
        bases.push(basis);
    }
    let projections = bases.iter().map(|b| b * b.adjoint()).collect();
    Ok(NormalOperator {
        matrix: a.clone(),
        spectrum: WeightedSpectrum::new(atoms, weights)?,
        projections,
        bases,
    })
}

/// A kernel `K(t1, t2)` on `domain x codomain`; `values` has one row per
/// domain atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    domain: WeightedSpectrum,
    codomain: WeightedSpectrum,
    values: CMatrix,
}

impl Kernel {
    pub fn new(domain: WeightedSpectrum, codomain: WeightedSpectrum, values: CMatrix) -> Result<Self> {
        if values.shape() != (domain.len(), codomain.len()) {
            return Err(Error::DimensionMismatch(format!(
                "kernel values are {:?}, spectra have {} and {} atoms",
                values.shape(),
                domain.len(),
                codomain.len()
            )));
        }
        if !is_finite(&values) {
            return Err(Error::InvalidData("kernel has non-finite values".into()));
        }
        Ok(Self {
            domain,
            codomain,
            values,
        })
    }

    pub fn zeros(domain: WeightedSpectrum, codomain: WeightedSpectrum) -> Self {
        let values = CMatrix::zeros(domain.len(), codomain.len());
        Self {
            domain,
            codomain,
            values,
        }
    }

    pub fn domain(&self) -> &WeightedSpectrum {
        &self.domain
    }

    pub fn codomain(&self) -> &WeightedSpectrum {
        &self.codomain
    }

    pub fn values(&self) -> &CMatrix {
        &self.values
    }

    /// Norm in `L^2(domain x codomain)` for the product measure.
    pub fn l2_norm(&self) -> f64 {
        let mut sum = 0.0;
        for (i, wi) in self.domain.weights().iter().enumerate() {
            for (j, wj) in self.codomain.weights().iter().enumerate() {
                sum += self.values[(i, j)].norm_sqr() * wi * wj;
            }
        }
        sum.sqrt()
    }

    /// The operator `L^2(codomain) -> L^2(domain)` obtained by integrating
    /// against the second variable, in weighted orthonormal bases. This is the
    /// transpose of [`kernel_to_operator`] and is the orientation used when a
    /// kernel sits in a multiplier chain.
    pub fn chain_operator(&self) -> CMatrix {
        let (dw, cw) = (self.domain.weights(), self.codomain.weights());
        CMatrix::from_fn(self.domain.len(), self.codomain.len(), |i, j| {
            self.values[(i, j)] * (dw[i] * cw[j]).sqrt()
        })
    }

    /// Inverse of [`Kernel::chain_operator`].
    pub fn from_chain_operator(x: &CMatrix, domain: &WeightedSpectrum, codomain: &WeightedSpectrum) -> Result<Self> {
        let kernel = operator_to_kernel(&x.transpose(), domain, codomain)?;
        Ok(kernel)
    }
}

/// Matrix of `X_K : L^2(domain) -> L^2(codomain)`,
/// `(X_K f)(s) = sum_t K(t, s) f(t) w(t)`, in the orthonormal bases
/// `delta_t / sqrt(w_t)`. Rows index codomain atoms.
pub fn kernel_to_operator(kernel: &Kernel) -> CMatrix {
    kernel.chain_operator().transpose()
}

/// Inverse of [`kernel_to_operator`].
pub fn operator_to_kernel(x: &CMatrix, domain: &WeightedSpectrum, codomain: &WeightedSpectrum) -> Result<Kernel> {
    if x.shape() != (codomain.len(), domain.len()) {
        return Err(Error::DimensionMismatch(format!(
            "operator is {:?}, expected ({}, {})",
            x.shape(),
            codomain.len(),
            domain.len()
        )));
    }
    let (dw, cw) = (domain.weights(), codomain.weights());
    let values = CMatrix::from_fn(domain.len(), codomain.len(), |t, s| x[(s, t)] / (dw[t] * cw[s]).sqrt());
    Kernel::new(domain.clone(), codomain.clone(), values)
}

/// Operator norm and Hilbert-Schmidt norm of `s`, and the trace pairing
/// `tr(s t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormsAndPairing {
    pub op_norm: f64,
    pub hs_norm: f64,
    pub trace_pairing: Complex64,
}

pub fn norms_and_pairing(s: &CMatrix, t: &CMatrix) -> Result<NormsAndPairing> {
    if s.ncols() != t.nrows() || s.nrows() != t.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot pair {:?} with {:?}",
            s.shape(),
            t.shape()
        )));
    }
    Ok(NormsAndPairing {
        op_norm: op_norm(s),
        hs_norm: hs_norm(s),
        trace_pairing: (s * t).trace(),
    })
}
