//! Lower bounds: contraction tuples with large `||Gamma(phi)(X_1, ..., X_(n-1))||`.
//!
//! Each restart runs block-coordinate ascent on `Re <u, Gamma(X) v>`: with
//! `(u, v)` the top singular pair of the current value, the functional is
//! linear in each `X_k`, and its maximizer over the operator-norm unit ball is
//! the adjoint polar factor of the coefficient matrix (the limit of a
//! projected gradient step with infinite step size). Every update can only
//! increase the operator norm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Certificate, Diagnostics, EstimateKind, NormEstimate};
use crate::error::Result;
use crate::linalg::{contraction_maximizer, op_norm, top_singular, CMatrix};
use crate::moi::{check_operands, moi_apply};
use crate::random;
use crate::schur::SymbolTensor;
use crate::spectral::{NormalOperator, WeightedSpectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerOptions {
    /// Random contraction tuples tried per restart; the best one starts the ascent.
    pub samples: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Ascent sweeps per restart.
    pub max_iter: usize,
}

impl Default for LowerOptions {
    fn default() -> Self {
        Self {
            samples: 4,
            restarts: 8,
            seed: 0,
            max_iter: 200,
        }
    }
}

/// Diagonal operators carrying the spectra of a symbol, all of size
/// `copies * max |Omega_i|`.
pub fn canonical_operators(spectra: &[WeightedSpectrum], copies: usize) -> Result<Vec<NormalOperator>> {
    let dim = copies.max(1) * spectra.iter().map(|s| s.len()).max().unwrap_or(1);
    spectra.iter().map(|s| NormalOperator::cyclic_diagonal(s, dim)).collect()
}

/// Tuple attaining `|phi(t)|` at the first maximizing atom tuple `t`:
/// `X_k = e_k e_(k+1)^*` with `e_k` a unit vector in the range of the spectral
/// projection of `A_k` at `t_k`.
fn delta_witness(phi: &SymbolTensor, ops: &[NormalOperator]) -> Vec<CMatrix> {
    let idx = phi.argmax();
    let vecs: Vec<CMatrix> = ops
        .iter()
        .zip(&idx)
        .map(|(op, &a)| op.eigenbases()[a].columns(0, 1).into_owned())
        .collect();
    (0..ops.len() - 1).map(|k| &vecs[k] * vecs[k + 1].adjoint()).collect()
}

struct Ascent<'a> {
    phi: &'a SymbolTensor,
    ops: &'a [NormalOperator],
}

impl Ascent<'_> {
    fn value(&self, xs: &[CMatrix]) -> f64 {
        op_norm(&moi_apply(self.phi, self.ops, xs).expect("operands checked"))
    }

    /// Coefficient matrix `M` with `u^* Gamma(X) v = tr(X_k M)`.
    fn coefficient(&self, xs: &[CMatrix], k: usize, u: &CMatrix, v: &CMatrix) -> CMatrix {
        let n = self.phi.order();
        let shape = self.phi.shape();
        let proj = |slot: usize, a: usize| &self.ops[slot].projections()[a];

        // Rows u^* P^1 X_1 ... X_(k-1) P^k over prefixes (i_1..i_k), row-major.
        let mut lefts: Vec<CMatrix> = (0..shape[0]).map(|a| u.adjoint() * proj(0, a)).collect();
        for slot in 1..=k {
            lefts = lefts
                .iter()
                .flat_map(|l| {
                    let lx = l * &xs[slot - 1];
                    (0..shape[slot]).map(move |a| &lx * proj(slot, a))
                })
                .collect();
        }
        // Columns P^(k+1) X_(k+1) ... P^n v over suffixes (i_(k+1)..i_n), row-major.
        let mut rights: Vec<CMatrix> = (0..shape[n - 1]).map(|a| proj(n - 1, a) * v).collect();
        for slot in (k + 1..n - 1).rev() {
            let mut next = Vec::with_capacity(rights.len() * shape[slot]);
            for a in 0..shape[slot] {
                let px = proj(slot, a) * &xs[slot];
                next.extend(rights.iter().map(|r| &px * r));
            }
            rights = next;
        }
        let d = self.ops[0].dim();
        let values = self.phi.values();
        let suffixes = rights.len();
        let mut m = CMatrix::zeros(d, d);
        for (s, r) in rights.iter().enumerate() {
            let mut w = CMatrix::zeros(1, d);
            for (p, l) in lefts.iter().enumerate() {
                let c = values[p * suffixes + s];
                if c.norm() > 0.0 {
                    w += l * c;
                }
            }
            m += r * w;
        }
        m
    }

    fn run(&self, mut xs: Vec<CMatrix>, max_iter: usize) -> (Vec<CMatrix>, f64, usize) {
        let mut value = self.value(&xs);
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            let mut trial = xs.clone();
            for k in 0..trial.len() {
                let y = moi_apply(self.phi, self.ops, &trial).expect("operands checked");
                let (sigma, u, v) = top_singular(&y);
                if sigma == 0.0 {
                    break;
                }
                let u = CMatrix::from_column_slice(u.len(), 1, u.as_slice());
                let v = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
                trial[k] = contraction_maximizer(&self.coefficient(&trial, k, &u, &v));
            }
            let next = self.value(&trial);
            if next <= value {
                break;
            }
            let gain = next - value;
            xs = trial;
            value = next;
            if gain <= 1e-13 * value.max(1.0) {
                break;
            }
        }
        (xs, value, iterations)
    }
}

/// Best operator norm of `Gamma(phi)` found over contraction tuples on `ops`.
///
/// Restart 0 starts from the delta witness, so the result is at least
/// `max |phi|`; later restarts start from the best of `samples` random
/// unitary tuples. Ties go to the lowest restart index.
pub fn lower_bound_search(phi: &SymbolTensor, ops: &[NormalOperator], opts: &LowerOptions) -> Result<NormEstimate> {
    let n = phi.order();
    let d = ops.first().map_or(0, |o| o.dim());
    let identities = vec![CMatrix::identity(d, d); n.saturating_sub(1)];
    check_operands(phi, ops, &identities)?;
    let ascent = Ascent { phi, ops };
    let restarts = opts.restarts.max(1);

    let runs: Vec<(Vec<CMatrix>, f64, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                delta_witness(phi, ops)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                let mut best: Option<(Vec<CMatrix>, f64)> = None;
                for _ in 0..opts.samples.max(1) {
                    let xs: Vec<CMatrix> = (0..n - 1).map(|_| random::unitary(&mut rng, d)).collect();
                    let v = ascent.value(&xs);
                    if best.as_ref().is_none_or(|b| v > b.1) {
                        best = Some((xs, v));
                    }
                }
                best.expect("at least one sample").0
            };
            ascent.run(start, opts.max_iter)
        })
        .collect();

    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = r;
        }
    }
    let (xs, _, iterations) = runs.into_iter().nth(best).expect("at least one restart");
    let value = ascent.value(&xs);
    Ok(NormEstimate {
        kind: EstimateKind::Lower,
        value,
        certificate: Certificate::Witness(xs),
        diagnostics: Diagnostics {
            iterations,
            restarts,
            seed: opts.seed,
            best_restart: Some(best),
            ..Diagnostics::default()
        },
    })
}
