//! Limited-memory BFGS for the smooth subproblems of the factorization search.
//!
//! Unlike general-purpose drivers, a failed line search is not an error here:
//! the best point found so far is returned, which is what an outer
//! augmented-Lagrangian loop wants near convergence.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the gradient infinity norm drops below this.
    pub grad_tol: f64,
    /// Stop once the relative decrease of one step drops below this.
    pub cost_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-12,
            cost_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= opts.grad_tol || !fx.is_finite() {
            break;
        }
        iterations += 1;

        // Two-loop recursion for d = -H g.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        // Backtracking/expanding search for the weak Wolfe conditions.
        let (c1, c2) = (1e-4, 0.9);
        let mut step = if history.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut accepted = None;
        for _ in 0..60 {
            x_new.iter_mut().zip(&x).zip(&d).for_each(|((xn, xi), di)| *xn = xi + step * di);
            let f_new = f(&x_new, &mut g_new);
            if !f_new.is_finite() || f_new > fx + c1 * step * slope {
                hi = step;
            } else if dot(&g_new, &d) < c2 * slope {
                lo = step;
                accepted = Some(f_new);
            } else {
                accepted = Some(f_new);
                break;
            }
            step = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
            if accepted.is_some() && hi.is_finite() {
                // Sufficient decrease holds at `lo`; re-evaluate there and accept.
                x_new.iter_mut().zip(&x).zip(&d).for_each(|((xn, xi), di)| *xn = xi + lo * di);
                accepted = Some(f(&x_new, &mut g_new));
                break;
            }
            if hi - lo < 1e-20 {
                break;
            }
        }
        let Some(f_new) = accepted else { break };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let decrease = fx - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        if decrease <= opts.cost_tol * fx.abs().max(1.0) {
            break;
        }
    }
    LbfgsResult { x, value: fx, iterations }
}
