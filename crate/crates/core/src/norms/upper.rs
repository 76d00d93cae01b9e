//! Upper bounds: search for a factorization with small sup-norm product.
//!
//! The factors are handled as tensor-train cores `G_1(t) = a_1(t)^*`,
//! `G_i = a_i` and `G_n(t) = a_n(t)`. Minimizing the product of sup norms is
//! equivalent (after rescaling the factors to equal sup norms) to the
//! epigraph problem
//!
//! ```text
//! minimize s  subject to  G_1(t_1) ... G_n(t_n) = phi(t),  ||G_k(a)||^2 <= s,
//! ```
//!
//! which is solved by an augmented Lagrangian method: Gram-matrix eigenvalue
//! constraints with matrix multipliers, the fit with complex multipliers,
//! and L-BFGS on the smooth inner problem. Alternating least-squares sweeps
//! provide the starting point and the final exact fit.
//!
//! When the requested ranks exceed the ranks of the unfoldings of `phi`, the
//! fit constraint is degenerate and the search tends to stall; even restarts
//! therefore search through the unfolding ranks and pad with zeros.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Certificate, Diagnostics, EstimateKind, NormEstimate};
use crate::error::{Error, Result};
use crate::factorization::FactorizationData;
use crate::linalg::{lstsq, max_eigenvalue, op_norm, psd_part, CMatrix, CVector, MultiIndex, ZERO};
use crate::optim::{minimize, LbfgsOptions};
use crate::random;
use crate::schur::SymbolTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Outer augmented-Lagrangian iterations per restart.
    pub max_iter: usize,
    /// Accepted fit residual, relative to `max |phi|`.
    pub tol: f64,
}

impl Default for UpperOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 80,
            tol: 1e-8,
        }
    }
}

/// `r_i = min(prod_{j <= i} |Omega_j|, prod_{j > i} |Omega_j|)`, enough to fit
/// any symbol exactly.
pub fn default_ranks(shape: &[usize]) -> Vec<usize> {
    (1..shape.len())
        .map(|i| {
            let left: usize = shape[..i].iter().product();
            let right: usize = shape[i..].iter().product();
            left.min(right)
        })
        .collect()
}

type Cores = Vec<Vec<CMatrix>>;

struct Problem {
    shape: Vec<usize>,
    /// `dims[k] x dims[k + 1]` is the shape of core `k`; `dims[0] = dims[n] = 1`.
    dims: Vec<usize>,
    tuples: Vec<Vec<usize>>,
    target: Vec<Complex64>,
}

/// Numerical ranks of the unfoldings `(t_1..t_i) x (t_(i+1)..t_n)`, capped
/// at `ranks`.
fn unfolding_ranks(phi: &SymbolTensor, ranks: &[usize]) -> Vec<usize> {
    let shape = phi.shape();
    let total: usize = shape.iter().product();
    ranks
        .iter()
        .enumerate()
        .map(|(i, &cap)| {
            let rows: usize = shape[..=i].iter().product();
            let cols = total / rows;
            let m = CMatrix::from_fn(rows, cols, |r, c| phi.values()[r * cols + c]);
            let sv = m.singular_values();
            let top = sv.max();
            sv.iter().filter(|&&s| s > UNFOLDING_RCOND * top).count().clamp(1, cap)
        })
        .collect()
}

const UNFOLDING_RCOND: f64 = 1e-10;

/// Embeds cores into larger bond dimensions with zero padding.
fn pad(cores: &Cores, dims: &[usize]) -> Cores {
    cores
        .iter()
        .enumerate()
        .map(|(k, core)| {
            core.iter()
                .map(|g| {
                    let mut out = CMatrix::zeros(dims[k], dims[k + 1]);
                    out.view_mut((0, 0), g.shape()).copy_from(g);
                    out
                })
                .collect()
        })
        .collect()
}

/// Gram matrix used for the norm constraint of one core value: the smaller
/// of `G G^*` and `G^* G` (they share their nonzero spectrum).
fn gram(g: &CMatrix) -> CMatrix {
    if g.nrows() <= g.ncols() {
        g * g.adjoint()
    } else {
        g.adjoint() * g
    }
}

fn max_sq_norm(cores: &Cores) -> f64 {
    cores
        .iter()
        .flatten()
        .map(|g| max_eigenvalue(&gram(g)))
        .fold(0.0, f64::max)
}

impl Problem {
    fn new(phi: &SymbolTensor, ranks: &[usize], scale: Complex64) -> Self {
        let shape = phi.shape().to_vec();
        let mut dims = vec![1];
        dims.extend_from_slice(ranks);
        dims.push(1);
        let tuples: Vec<Vec<usize>> = MultiIndex::new(&shape).collect();
        let target = phi.values().iter().map(|v| v / scale).collect();
        Self {
            shape,
            dims,
            tuples,
            target,
        }
    }

    fn order(&self) -> usize {
        self.shape.len()
    }

    fn param_len(&self) -> usize {
        let entries: usize = (0..self.order()).map(|k| self.shape[k] * self.dims[k] * self.dims[k + 1]).sum();
        2 * entries + 1
    }

    fn pack(&self, cores: &Cores, t: f64) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.param_len());
        for g in cores.iter().flatten() {
            for v in g.iter() {
                z.push(v.re);
                z.push(v.im);
            }
        }
        z.push(t);
        z
    }

    fn unpack(&self, z: &[f64]) -> (Cores, f64) {
        let mut pos = 0;
        let mut cores = Vec::with_capacity(self.order());
        for k in 0..self.order() {
            let (p, q) = (self.dims[k], self.dims[k + 1]);
            let core = (0..self.shape[k])
                .map(|_| {
                    let g = CMatrix::from_fn(p, q, |i, j| {
                        let o = pos + 2 * (i + j * p);
                        Complex64::new(z[o], z[o + 1])
                    });
                    pos += 2 * p * q;
                    g
                })
                .collect();
            cores.push(core);
        }
        (cores, z[pos])
    }

    /// Left products `G_1 ... G_k` (`1 x dims[k]`) and right products
    /// `G_(k+2) ... G_n` (`dims[k+1] x 1`) for one tuple, indexed by core.
    fn environments(&self, cores: &Cores, idx: &[usize]) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let n = self.order();
        let mut lefts = Vec::with_capacity(n);
        lefts.push(CMatrix::identity(1, 1));
        for k in 1..n {
            let next = &lefts[k - 1] * &cores[k - 1][idx[k - 1]];
            lefts.push(next);
        }
        let mut rights = vec![CMatrix::identity(1, 1); n];
        for k in (0..n - 1).rev() {
            rights[k] = &cores[k + 1][idx[k + 1]] * &rights[k + 1];
        }
        (lefts, rights)
    }

    fn evaluate(&self, cores: &Cores, idx: &[usize]) -> Complex64 {
        let mut row = cores[0][idx[0]].clone();
        for k in 1..self.order() {
            row = row * &cores[k][idx[k]];
        }
        row[(0, 0)]
    }

    fn residual(&self, cores: &Cores) -> f64 {
        self.tuples
            .iter()
            .zip(&self.target)
            .map(|(idx, &v)| (self.evaluate(cores, idx) - v).norm())
            .fold(0.0, f64::max)
    }

    /// One cycle of minimum-change least-squares refits, one core at a time.
    fn fit_sweep(&self, cores: &mut Cores) {
        for k in 0..self.order() {
            let (p, q) = (self.dims[k], self.dims[k + 1]);
            for a in 0..self.shape[k] {
                let rows: Vec<(Vec<Complex64>, Complex64)> = self
                    .tuples
                    .iter()
                    .zip(&self.target)
                    .filter(|(idx, _)| idx[k] == a)
                    .map(|(idx, &v)| {
                        let (lefts, rights) = self.environments(cores, idx);
                        let (l, r) = (&lefts[k], &rights[k]);
                        let coeffs = (0..p * q).map(|e| l[(0, e % p)] * r[(e / p, 0)]).collect();
                        (coeffs, v)
                    })
                    .collect();
                let b = CMatrix::from_fn(rows.len(), p * q, |i, e| rows[i].0[e]);
                let x = CVector::from_column_slice(cores[k][a].as_slice());
                let target = CVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
                let dx = lstsq(&b, &(target - &b * &x), 1e-12);
                let x = x + dx;
                cores[k][a] = CMatrix::from_column_slice(p, q, x.as_slice());
            }
        }
    }

    /// Rescales the cores to equal sup norms; the synthesized symbol is
    /// unchanged.
    fn balance(&self, cores: &mut Cores) {
        let sups: Vec<f64> = cores.iter().map(|c| c.iter().map(op_norm).fold(0.0, f64::max)).collect();
        if sups.iter().any(|&s| s == 0.0) {
            return;
        }
        let mean = (sups.iter().map(|s| s.ln()).sum::<f64>() / sups.len() as f64).exp();
        for (core, s) in cores.iter_mut().zip(&sups) {
            for g in core.iter_mut() {
                *g *= Complex64::new(mean / s, 0.0);
            }
        }
    }

    /// Augmented Lagrangian value and gradient at `z`.
    fn lagrangian(&self, z: &[f64], grad: &mut [f64], fit_mult: &[Complex64], norm_mult: &Cores, mu: f64) -> f64 {
        let (cores, t) = self.unpack(z);
        let n = self.order();
        let mut grads: Cores = cores
            .iter()
            .map(|c| c.iter().map(|g| CMatrix::zeros(g.nrows(), g.ncols())).collect())
            .collect();
        let mut value = t;
        let mut dt = 1.0;
        for k in 0..n {
            for (a, g) in cores[k].iter().enumerate() {
                let s = gram(g);
                let m = s.nrows();
                let nm = &norm_mult[k][a];
                let shifted = nm + (s - CMatrix::identity(m, m) * Complex64::new(t, 0.0)) * Complex64::new(mu, 0.0);
                let h = psd_part(&shifted);
                value += (h.norm_squared() - nm.norm_squared()) / (2.0 * mu);
                dt -= h.trace().re;
                let dg = if g.nrows() <= g.ncols() { &h * g } else { g * &h };
                grads[k][a] += dg * Complex64::new(2.0, 0.0);
            }
        }
        for ((idx, &target), &lam) in self.tuples.iter().zip(&self.target).zip(fit_mult) {
            let (lefts, rights) = self.environments(&cores, idx);
            let psi = (&lefts[n - 1] * &cores[n - 1][idx[n - 1]])[(0, 0)];
            let r = psi - target;
            value += (lam.conj() * r).re + 0.5 * mu * r.norm_sqr();
            let c = lam + r * mu;
            for k in 0..n {
                grads[k][idx[k]] += (lefts[k].adjoint() * rights[k].adjoint()) * c;
            }
        }
        let packed = self.pack(&grads, dt);
        grad.copy_from_slice(&packed);
        value
    }

    fn random_cores(&self, rng: &mut ChaCha8Rng) -> Cores {
        (0..self.order())
            .map(|k| {
                let (p, q) = (self.dims[k], self.dims[k + 1]);
                (0..self.shape[k])
                    .map(|_| random::matrix(rng, p, q).unscale(((p * q) as f64).sqrt()))
                    .collect()
            })
            .collect()
    }

    /// One restart; returns the final cores and the outer iteration count.
    fn run(&self, rng: &mut ChaCha8Rng, max_iter: usize) -> (Cores, usize) {
        let mut cores = self.random_cores(rng);
        for _ in 0..3 {
            self.fit_sweep(&mut cores);
        }
        self.balance(&mut cores);

        let t0 = max_sq_norm(&cores).max(1e-12);
        let mut z = self.pack(&cores, t0);
        let mut fit_mult = vec![ZERO; self.tuples.len()];
        let mut norm_mult: Cores = cores
            .iter()
            .map(|c| c.iter().map(|g| CMatrix::zeros(gram(g).nrows(), gram(g).nrows())).collect())
            .collect();
        let mut mu = 10.0 / t0;
        let inner = LbfgsOptions {
            max_iter: 1000,
            ..LbfgsOptions::default()
        };
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            let res = minimize(|x, g| self.lagrangian(x, g, &fit_mult, &norm_mult, mu), z, inner);
            z = res.x;
            let (cur, t) = self.unpack(&z);
            let mut violation: f64 = 0.0;
            for ((idx, &target), lam) in self.tuples.iter().zip(&self.target).zip(fit_mult.iter_mut()) {
                let r = self.evaluate(&cur, idx) - target;
                *lam += r * mu;
                violation = violation.max(r.norm());
            }
            for (core, mults) in cur.iter().zip(norm_mult.iter_mut()) {
                for (g, nm) in core.iter().zip(mults.iter_mut()) {
                    let s = gram(g);
                    let m = s.nrows();
                    let excess = &s - CMatrix::identity(m, m) * Complex64::new(t, 0.0);
                    violation = violation.max(max_eigenvalue(&excess));
                    *nm = psd_part(&(&*nm + excess * Complex64::new(mu, 0.0)));
                }
            }
            if violation < 1e-10 {
                break;
            }
            mu = (mu * 1.5).min(1e6);
        }
        let (mut cores, _) = self.unpack(&z);
        for _ in 0..2 {
            self.fit_sweep(&mut cores);
        }
        self.balance(&mut cores);
        (cores, iterations)
    }
}

fn check_ranks(shape: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() + 1 != shape.len() {
        return Err(Error::OrderMismatch {
            expected: shape.len() - 1,
            found: ranks.len(),
        });
    }
    for (i, (&r, bound)) in ranks.iter().zip(default_ranks(shape)).enumerate() {
        if r == 0 {
            return Err(Error::RankTooSmall { slot: i + 1 });
        }
        if r > bound {
            return Err(Error::RankTooLarge {
                slot: i + 1,
                rank: r,
                dim: bound,
            });
        }
    }
    Ok(())
}

/// Searches for factorization data of `phi` through spaces of dimensions
/// `ranks` and returns the best sup-norm product found over `restarts`
/// independent starts (ties go to the lowest restart index).
pub fn upper_bound_search(phi: &SymbolTensor, ranks: &[usize], opts: &UpperOptions) -> Result<NormEstimate> {
    check_ranks(phi.shape(), ranks)?;
    let restarts = opts.restarts.max(1);
    let diagnostics = Diagnostics {
        restarts,
        seed: opts.seed,
        ..Diagnostics::default()
    };
    let peak = phi.get(&phi.argmax());
    if peak == ZERO {
        let zero = |r: usize, c: usize| CMatrix::zeros(r, c);
        let counts = phi.shape();
        let n = counts.len();
        let a_first = (0..counts[0]).map(|_| CVector::zeros(ranks[0])).collect();
        let a_mid = (1..n - 1).map(|i| (0..counts[i]).map(|_| zero(ranks[i - 1], ranks[i])).collect()).collect();
        let a_last = (0..counts[n - 1]).map(|_| CVector::zeros(ranks[n - 2])).collect();
        let f = FactorizationData::new(ranks.to_vec(), a_first, a_mid, a_last)?;
        return Ok(NormEstimate {
            kind: EstimateKind::Upper,
            value: 0.0,
            certificate: Certificate::Factorization(f),
            diagnostics: Diagnostics {
                residual: Some(0.0),
                best_restart: Some(0),
                ..diagnostics
            },
        });
    }

    let problem = Problem::new(phi, ranks, peak);
    let reduced = Problem::new(phi, &unfolding_ranks(phi, ranks), peak);
    let runs: Vec<(FactorizationData, f64, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let (cores, iterations) = if r % 2 == 0 && reduced.dims != problem.dims {
                let (cores, iterations) = reduced.run(&mut rng, opts.max_iter);
                (pad(&cores, &problem.dims), iterations)
            } else {
                problem.run(&mut rng, opts.max_iter)
            };
            let residual = problem.residual(&cores);
            let f = FactorizationData::from_cores(&cores).expect("core shapes are consistent");
            (f, residual, iterations)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (r, (f, residual, _)) in runs.iter().enumerate() {
        if *residual <= opts.tol {
            let v = f.sup_norm_product();
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((r, v));
            }
        }
    }
    let Some((r, _)) = best else {
        let residual = runs.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        return Err(Error::RankInsufficient { residual, tol: opts.tol });
    };
    let (f, residual, iterations) = &runs[r];
    let f = f.scaled(peak);
    Ok(NormEstimate {
        kind: EstimateKind::Upper,
        value: f.sup_norm_product(),
        certificate: Certificate::Factorization(f),
        diagnostics: Diagnostics {
            iterations: *iterations,
            best_restart: Some(r),
            residual: Some(*residual),
            ..diagnostics
        },
    })
}
