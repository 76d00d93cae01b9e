//! Sandwich report `lower <= (exact) <= upper` for one symbol.

use std::fmt;

use serde::Serialize;

use super::{
    bilinear_oracle, canonical_operators, default_ranks, lower_bound_search, upper_bound_search, LowerOptions,
    NormEstimate, UpperOptions,
};
use crate::factorization::realization_via_moi;
use crate::linalg::hs_norm;
use crate::schur::SymbolTensor;

/// Slack allowed in `lower <= upper`, relative to `max(1, upper)`.
pub const SOUNDNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub samples: usize,
    /// Multiplicity of each atom in the operators used by the lower bound.
    pub copies: usize,
    /// Run the semidefinite oracle on bilinear symbols.
    pub oracle: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 80,
            tol: 1e-8,
            samples: 4,
            copies: 1,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Hard checks guard soundness; failing one means an implementation bug.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gaps {
    pub upper_lower: Option<f64>,
    pub upper_exact: Option<f64>,
    pub exact_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub order: usize,
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub sup_norm: f64,
    pub upper: Option<NormEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_error: Option<String>,
    pub lower: Option<NormEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<NormEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<String>,
    pub gaps: Gaps,
    pub checks: Vec<Check>,
    pub sound: bool,
}

/// `(high - low) / high`, zero when both vanish.
pub fn relative_gap(high: f64, low: f64) -> f64 {
    if high == 0.0 && low == 0.0 {
        0.0
    } else {
        (high - low) / high.abs().max(low.abs())
    }
}

fn not_above(low: f64, high: f64) -> bool {
    low <= high + SOUNDNESS_TOL * high.abs().max(1.0)
}

pub fn verify_theorem(phi: &SymbolTensor, ranks: Option<&[usize]>, budget: &Budget) -> Report {
    let ranks = ranks.map_or_else(|| default_ranks(phi.shape()), <[usize]>::to_vec);
    let upper_opts = UpperOptions {
        restarts: budget.restarts,
        seed: budget.seed,
        max_iter: budget.max_iter,
        tol: budget.tol,
    };
    let lower_opts = LowerOptions {
        samples: budget.samples,
        restarts: budget.restarts,
        seed: budget.seed,
        ..LowerOptions::default()
    };
    let (upper, upper_error) = split(upper_bound_search(phi, &ranks, &upper_opts));
    let ops = canonical_operators(phi.spectra(), budget.copies);
    let (lower, lower_error) = match &ops {
        Ok(ops) => split(lower_bound_search(phi, ops, &lower_opts)),
        Err(e) => (None, Some(e.to_string())),
    };
    let (exact, exact_error) = if budget.oracle && phi.order() == 2 {
        split(bilinear_oracle(phi))
    } else {
        (None, None)
    };

    let mut checks = Vec::new();
    let sup = phi.sup_norm();
    if let Some(l) = &lower {
        checks.push(Check {
            name: "lower >= max|phi|".into(),
            passed: l.value >= sup - 1e-9,
            hard: false,
            detail: format!("{:.12e} vs {:.12e}", l.value, sup),
        });
    }
    for (label, est) in [("upper", &upper), ("exact", &exact)] {
        let Some(est) = est else { continue };
        let Some(f) = est.factorization() else { continue };
        let fit = f
            .synthesize_symbol(phi.spectra())
            .and_then(|s| s.sup_distance(phi))
            .unwrap_or(f64::INFINITY);
        let fit_tol = budget.tol * sup.max(f64::MIN_POSITIVE);
        checks.push(Check {
            name: format!("{label} certificate fits phi"),
            passed: fit <= fit_tol.max(1e-9 * sup),
            hard: false,
            detail: format!("max deviation {fit:.3e}"),
        });
        let product = f.sup_norm_product();
        checks.push(Check {
            name: format!("{label} certificate value"),
            passed: (product - est.value).abs() <= 1e-9 * est.value.max(1.0),
            hard: false,
            detail: format!("sup-norm product {product:.12e}"),
        });
    }
    if let (Some(u), Some(l), Ok(ops)) = (&upper, &lower, &ops) {
        let (f, xs) = (u.factorization().expect("upper certificate"), l.witness().expect("lower witness"));
        let detail = match (f.block_realization(ops, xs), realization_via_moi(f, ops, xs)) {
            (Ok(block), Ok(moi)) => {
                let dev = hs_norm(&(&block - &moi));
                let scale = hs_norm(&moi).max(1.0);
                Some((dev <= 1e-10 * scale, format!("deviation {dev:.3e}")))
            }
            (Err(e), _) | (_, Err(e)) => Some((false, e.to_string())),
        };
        if let Some((passed, detail)) = detail {
            checks.push(Check {
                name: "block realization matches operator integral".into(),
                passed,
                hard: false,
                detail,
            });
        }
    }
    let value = |e: &Option<NormEstimate>| e.as_ref().map(|e| e.value);
    let (uv, lv, ev) = (value(&upper), value(&lower), value(&exact));
    for (name, low, high) in [
        ("lower <= upper", lv, uv),
        ("lower <= exact", lv, ev),
        ("exact <= upper", ev, uv),
    ] {
        if let (Some(low), Some(high)) = (low, high) {
            checks.push(Check {
                name: name.into(),
                passed: not_above(low, high),
                hard: true,
                detail: format!("{low:.12e} <= {high:.12e}"),
            });
        }
    }
    let gap = |h: Option<f64>, l: Option<f64>| Some(relative_gap(h?, l?));
    let gaps = Gaps {
        upper_lower: gap(uv, lv),
        upper_exact: gap(uv, ev),
        exact_lower: gap(ev, lv),
    };
    let sound = checks.iter().all(|c| c.passed || !c.hard);
    Report {
        order: phi.order(),
        shape: phi.shape().to_vec(),
        ranks,
        sup_norm: sup,
        upper,
        upper_error,
        lower,
        lower_error,
        exact,
        exact_error,
        gaps,
        checks,
        sound,
    }
}

fn split(r: crate::error::Result<NormEstimate>) -> (Option<NormEstimate>, Option<String>) {
    match r {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape: Vec<String> = self.shape.iter().map(|s| s.to_string()).collect();
        writeln!(f, "symbol: order {}, shape {}, max|phi| = {:.12e}", self.order, shape.join("x"), self.sup_norm)?;
        let line = |f: &mut fmt::Formatter<'_>, label: &str, est: &Option<NormEstimate>, err: &Option<String>| {
            match (est, err) {
                (Some(e), _) => {
                    write!(f, "{label:<6} {:.12e}", e.value)?;
                    if let Some(r) = e.diagnostics.best_restart {
                        write!(f, "  (restart {r} of {})", e.diagnostics.restarts)?;
                    }
                    if let Some(d) = e.diagnostics.dual_bound {
                        write!(f, "  (dual bound {d:.12e})")?;
                    }
                    writeln!(f)
                }
                (None, Some(err)) => writeln!(f, "{label:<6} unavailable: {err}"),
                (None, None) => Ok(()),
            }
        };
        let ranks: Vec<String> = self.ranks.iter().map(|r| r.to_string()).collect();
        writeln!(f, "ranks: {}", ranks.join(","))?;
        line(f, "upper", &self.upper, &self.upper_error)?;
        line(f, "exact", &self.exact, &self.exact_error)?;
        line(f, "lower", &self.lower, &self.lower_error)?;
        for (label, g) in [
            ("gap upper/lower", self.gaps.upper_lower),
            ("gap upper/exact", self.gaps.upper_exact),
            ("gap exact/lower", self.gaps.exact_lower),
        ] {
            if let Some(g) = g {
                writeln!(f, "{label}: {:.6}%", 100.0 * g)?;
            }
        }
        for c in &self.checks {
            let status = if c.passed { "ok" } else if c.hard { "FAIL" } else { "warn" };
            writeln!(f, "[{status}] {}: {}", c.name, c.detail)?;
        }
        writeln!(f, "soundness: {}", if self.sound { "ok" } else { "VIOLATED" })
    }
}
