//! Multilinear Schur multipliers on weighted discrete spaces.
//!
//! For a symbol `phi` on `O_1 x ... x O_n` and kernels `K_i` on
//! `O_i x O_{i+1}`, the multiplier integrates out the middle variables:
//!
//! ```text
//! out(t1, tn) = sum_{t2..t(n-1)} phi(t) K_1(t1,t2) ... K_(n-1)(t(n-1),tn) w_2(t2) ... w_(n-1)(t(n-1))
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, MultiIndex};
use crate::spectral::{Kernel, WeightedSpectrum};

/// Order-`n` complex tensor over a product of weighted spectra, stored
/// row-major (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTensor {
    spectra: Vec<WeightedSpectrum>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<Complex64>,
    sup_norm: f64,
}

impl SymbolTensor {
    pub fn new(spectra: Vec<WeightedSpectrum>, values: Vec<Complex64>) -> Result<Self> {
        if spectra.len() < 2 {
            return Err(Error::InvalidData(format!("symbol order {} < 2", spectra.len())));
        }
        let shape: Vec<usize> = spectra.iter().map(|s| s.len()).collect();
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{} values for shape {:?}",
                values.len(),
                shape
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidData("symbol has non-finite values".into()));
        }
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len() - 1).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let sup_norm = values.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
        Ok(Self {
            spectra,
            shape,
            strides,
            values,
            sup_norm,
        })
    }

    pub fn from_fn(spectra: Vec<WeightedSpectrum>, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let shape: Vec<usize> = spectra.iter().map(|s| s.len()).collect();
        let values = MultiIndex::new(&shape).map(|idx| f(&idx)).collect();
        Self::new(spectra, values)
    }

    pub fn constant(spectra: Vec<WeightedSpectrum>, c: Complex64) -> Result<Self> {
        Self::from_fn(spectra, |_| c)
    }

    /// `f_1 (x) ... (x) f_n`, each `f_i` given by its values on the atoms.
    pub fn elementary(spectra: Vec<WeightedSpectrum>, factors: &[Vec<Complex64>]) -> Result<Self> {
        if factors.len() != spectra.len() {
            return Err(Error::OrderMismatch {
                expected: spectra.len(),
                found: factors.len(),
            });
        }
        for (i, (f, s)) in factors.iter().zip(&spectra).enumerate() {
            if f.len() != s.len() {
                return Err(Error::DimensionMismatch(format!(
                    "factor {i} has {} values for {} atoms",
                    f.len(),
                    s.len()
                )));
            }
        }
        Self::from_fn(spectra, |idx| idx.iter().enumerate().map(|(i, &k)| factors[i][k]).product())
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spectra(&self) -> &[WeightedSpectrum] {
        &self.spectra
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `max |phi|` over atoms (all atoms carry positive weight).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.values[self.offset(idx)]
    }

    /// First (row-major) index where `|phi|` is maximal.
    pub fn argmax(&self) -> Vec<usize> {
        let mut best = (0, -1.0);
        for (k, z) in self.values.iter().enumerate() {
            if z.norm() > best.1 {
                best = (k, z.norm());
            }
        }
        let mut rem = best.0;
        self.strides
            .iter()
            .map(|s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let values = self.values.iter().map(|z| z * c).collect();
        Self::new(self.spectra.clone(), values).expect("same shape")
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = self.values.iter().map(|&z| f(z)).collect();
        Self::new(self.spectra.clone(), values).expect("same shape")
    }

    /// `a * self + b * other`; the spectra must agree.
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.spectra != other.spectra {
            return Err(Error::DimensionMismatch("symbols live on different spectra".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Self::new(self.spectra.clone(), values)
    }

    /// `max |self - other|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).norm())))
    }

    /// The same values over different spectra of identical sizes.
    pub fn with_spectra(&self, spectra: Vec<WeightedSpectrum>) -> Result<Self> {
        let shape: Vec<usize> = spectra.iter().map(|s| s.len()).collect();
        if shape != self.shape {
            return Err(Error::DimensionMismatch(format!("{shape:?} vs {:?}", self.shape)));
        }
        Self::new(spectra, self.values.clone())
    }

    /// View an order-2 symbol as a matrix.
    pub fn as_matrix(&self) -> Result<CMatrix> {
        if self.order() != 2 {
            return Err(Error::NotBilinear { order: self.order() });
        }
        Ok(CMatrix::from_row_slice(self.shape[0], self.shape[1], &self.values))
    }
}

fn check_chain(phi: &SymbolTensor, kernels: &[Kernel]) -> Result<()> {
    let n = phi.order();
    if kernels.len() != n - 1 {
        return Err(Error::OrderMismatch {
            expected: n - 1,
            found: kernels.len(),
        });
    }
    for (i, k) in kernels.iter().enumerate() {
        if k.domain() != &phi.spectra()[i] {
            return Err(Error::ChainMismatch {
                slot: i,
                reason: format!("domain differs from spectrum {i} of the symbol"),
            });
        }
        if k.codomain() != &phi.spectra()[i + 1] {
            return Err(Error::ChainMismatch {
                slot: i,
                reason: format!("codomain differs from spectrum {} of the symbol", i + 1),
            });
        }
    }
    Ok(())
}

/// Evaluates the multilinear Schur multiplier of `phi` on a chain of kernels.
///
/// Summation order: output pair `(t1, tn)` outermost, middle indices in
/// row-major order, so results are bitwise reproducible.
pub fn apply_multiplier(phi: &SymbolTensor, kernels: &[Kernel]) -> Result<Kernel> {
    check_chain(phi, kernels)?;
    let n = phi.order();
    let shape = phi.shape();
    let (first, last) = (shape[0], shape[n - 1]);
    let middle_shape = &shape[1..n - 1];
    let middle_weights: Vec<&[f64]> = phi.spectra()[1..n - 1].iter().map(|s| s.weights()).collect();

    let mut out = CMatrix::zeros(first, last);
    let mut idx = vec![0usize; n];
    for t1 in 0..first {
        for tn in 0..last {
            idx[0] = t1;
            idx[n - 1] = tn;
            let mut acc = Complex64::new(0.0, 0.0);
            for mid in MultiIndex::new(middle_shape) {
                idx[1..n - 1].copy_from_slice(&mid);
                let mut term = phi.get(&idx);
                for (i, k) in kernels.iter().enumerate() {
                    term *= k.values()[(idx[i], idx[i + 1])];
                }
                for (j, &m) in mid.iter().enumerate() {
                    term *= middle_weights[j][m];
                }
                acc += term;
            }
            out[(t1, tn)] = acc;
        }
    }
    Kernel::new(phi.spectra()[0].clone(), phi.spectra()[n - 1].clone(), out)
}

/// Norm of the multiplier as a multilinear map between weighted
/// Hilbert-Schmidt classes. The map `phi -> Lambda(phi)` is isometric from
/// `L^inf`, so this is `max |phi|`.
pub fn multiplier_s2_norm(phi: &SymbolTensor) -> f64 {
    phi.sup_norm()
}

/// Unit-norm delta kernels concentrated at the atom tuple `idx`.
pub fn delta_kernels(phi: &SymbolTensor, idx: &[usize]) -> Vec<Kernel> {
    let spectra = phi.spectra();
    (0..phi.order() - 1)
        .map(|i| {
            let (dom, cod) = (&spectra[i], &spectra[i + 1]);
            let mut values = CMatrix::zeros(dom.len(), cod.len());
            let (a, b) = (idx[i], idx[i + 1]);
            values[(a, b)] = Complex64::new(1.0 / (dom.weights()[a] * cod.weights()[b]).sqrt(), 0.0);
            Kernel::new(dom.clone(), cod.clone(), values).expect("shape matches")
        })
        .collect()
}

/// Delta kernels at the argmax of `|phi|`; `apply_multiplier` on them has
/// L2 norm `max |phi|`.
pub fn norm_witness(phi: &SymbolTensor) -> Vec<Kernel> {
    delta_kernels(phi, &phi.argmax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_spectra(sizes: &[usize]) -> Vec<WeightedSpectrum> {
        sizes.iter().map(|&m| WeightedSpectrum::indices(m)).collect()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, dom: &WeightedSpectrum, cod: &WeightedSpectrum) -> Kernel {
        Kernel::new(dom.clone(), cod.clone(), random::matrix(rng, dom.len(), cod.len())).unwrap()
    }

    #[test]
    fn constant_symbol_composes_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spectra = unit_spectra(&[2, 3, 2]);
        let phi = SymbolTensor::constant(spectra.clone(), Complex64::new(1.0, 0.0)).unwrap();
        let k1 = random_kernel(&mut rng, &spectra[0], &spectra[1]);
        let k2 = random_kernel(&mut rng, &spectra[1], &spectra[2]);
        let out = apply_multiplier(&phi, &[k1.clone(), k2.clone()]).unwrap();
        let expected = k1.values() * k2.values();
        assert!((out.values() - expected).norm() < 1e-14);
    }

    #[test]
    fn elementary_bilinear_symbol_is_scaled_schur_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spectra = vec![random::spectrum(&mut rng, 3), random::spectrum(&mut rng, 2)];
        let f1: Vec<_> = (0..3).map(|_| random::complex(&mut rng)).collect();
        let f2: Vec<_> = (0..2).map(|_| random::complex(&mut rng)).collect();
        let phi = SymbolTensor::elementary(spectra.clone(), &[f1.clone(), f2.clone()]).unwrap();
        let k = random_kernel(&mut rng, &spectra[0], &spectra[1]);
        let out = apply_multiplier(&phi, &[k.clone()]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let expected = f1[i] * k.values()[(i, j)] * f2[j];
                assert!((out.values()[(i, j)] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s1 = WeightedSpectrum::indices(2).with_weights(vec![1.0, 2.0]).unwrap();
        let s2 = WeightedSpectrum::indices(3);
        let s3 = WeightedSpectrum::indices(2).with_weights(vec![3.0, 1.0]).unwrap();
        let phi = random::symbol(&mut rng, vec![s1.clone(), s2.clone(), s3.clone()]);
        let k1 = random_kernel(&mut rng, &s1, &s2);
        let k2 = random_kernel(&mut rng, &s2, &s3);
        let out = apply_multiplier(&phi, &[k1.clone(), k2.clone()]).unwrap();
        let raw: Vec<Complex64> = phi.values().to_vec();
        for a in 0..2 {
            for c in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..3 {
                    acc += raw[a * 6 + b * 2 + c] * k1.values()[(a, b)] * k2.values()[(b, c)] * 1.0;
                }
                let got = out.values()[(a, c)];
                assert!((got - acc).norm() <= 1e-13 * acc.norm().max(1.0));
            }
        }
    }

    #[test]
    fn norm_of_zero_and_constant() {
        let spectra = unit_spectra(&[2, 2, 3]);
        let zero = SymbolTensor::constant(spectra.clone(), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(multiplier_s2_norm(&zero), 0.0);
        let c = Complex64::new(3.0, -4.0);
        let phi = SymbolTensor::constant(spectra, c).unwrap();
        assert!((multiplier_s2_norm(&phi) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn witness_attains_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=4 {
            let spectra: Vec<_> = (0..n).map(|_| random::spectrum(&mut rng, 3)).collect();
            let phi = random::symbol(&mut rng, spectra);
            let witness = norm_witness(&phi);
            for k in &witness {
                assert!((k.l2_norm() - 1.0).abs() < 1e-14);
            }
            let out = apply_multiplier(&phi, &witness).unwrap();
            assert!((out.l2_norm() - multiplier_s2_norm(&phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spectra = unit_spectra(&[2, 3, 2]);
        let phi = random::symbol(&mut rng, spectra.clone());
        let k1 = random_kernel(&mut rng, &spectra[0], &spectra[1]);
        assert!(matches!(
            apply_multiplier(&phi, &[k1.clone()]),
            Err(Error::OrderMismatch { expected: 2, found: 1 })
        ));
        let wrong = random_kernel(&mut rng, &spectra[0], &spectra[1]);
        assert!(matches!(
            apply_multiplier(&phi, &[k1, wrong]),
            Err(Error::ChainMismatch { slot: 1, .. })
        ));
    }

    #[test]
    fn argmax_is_first_maximum() {
        let spectra = unit_spectra(&[2, 2]);
        let one = Complex64::new(1.0, 0.0);
        let phi = SymbolTensor::new(spectra, vec![0.5 * one, one, -one, 0.0 * one]).unwrap();
        assert_eq!(phi.argmax(), vec![0, 1]);
    }
}
