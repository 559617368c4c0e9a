//! Causal sweep for one mode of the coupled system with the other mode frozen.
//!
//! The discretised equation at a node is
//!
//! ```text
//! sqrt((Dx u)^2 + (Dy u)^2) = C0 + beta * (v - u)
//! ```
//!
//! with `C0 = (K1 + lambda1 R) / f1`, `beta = phi / f1`, `v = u2` for mode 1 and
//! `C0 = K2 / f2`, `beta = lambda2 / f2`, `v = u1 + R` for mode 2.

use crate::error::{Error, Result};
use crate::field::{NodeSet, ScalarField};
use crate::marching::{march, neighbor_minima, MarchReport, NodeUpdate};

#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub base_cost: ScalarField,
    pub coupling_rate: ScalarField,
    pub coupled_value: ScalarField,
    pub boundary: NodeSet,
}

impl CoupledProblem {
    pub fn new(
        base_cost: ScalarField,
        coupling_rate: ScalarField,
        coupled_value: ScalarField,
        boundary: NodeSet,
    ) -> Result<Self> {
        let p = Self {
            base_cost,
            coupling_rate,
            coupled_value,
            boundary,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.base_cost.grid();
        if !grid.matches(self.coupling_rate.grid()) || !grid.matches(self.coupled_value.grid()) {
            return Err(Error::InvalidProblem("coupled problem fields live on different grids".into()));
        }
        if self.boundary.is_empty() {
            return Err(Error::InvalidProblem("boundary node set is empty".into()));
        }
        if self.base_cost.values().iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidProblem("base cost must be strictly positive".into()));
        }
        if self.coupling_rate.values().iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidProblem("coupling rate must be nonnegative".into()));
        }
        if !self.coupled_value.all_finite() {
            return Err(Error::InvalidProblem("coupled value must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledUpdate {
    pub value: f64,
    /// No admissible root existed; the right-hand side was clamped to zero.
    pub stalled: bool,
}

/// Root of `((u-a)+/dx)^2 + ((u-b)+/dy)^2 = (C0 + beta v - beta u)^2` with
/// `u` above every neighbour it uses and a nonnegative right-hand side.
pub fn local_update_coupled(
    a: Option<f64>,
    b: Option<f64>,
    base_cost: f64,
    beta: f64,
    v: f64,
    dx: f64,
    dy: f64,
) -> Option<CoupledUpdate> {
    let c = base_cost + beta * v;
    let m = match (a, b) {
        (None, None) => return None,
        (Some(a), Some(b)) => a.min(b),
        (x, y) => x.or(y).unwrap(),
    };
    // right-hand side at the smallest admissible u
    let c_shift = c - beta * m;
    if c_shift < 0.0 {
        return Some(CoupledUpdate {
            value: m,
            stalled: true,
        });
    }

    let one_sided = |n: f64, h: f64| n + h * (c - beta * n) / (1.0 + beta * h);

    let mut best = f64::INFINITY;
    let mut consider = |u: f64| {
        if u < best {
            best = u;
        }
    };

    match (a, b) {
        (Some(a), None) => consider(one_sided(a, dx)),
        (None, Some(b)) => consider(one_sided(b, dy)),
        (Some(a), Some(b)) => {
            let ua = one_sided(a, dx);
            if ua >= a && ua <= b {
                consider(ua);
            }
            let ub = one_sided(b, dy);
            if ub >= b && ub <= a {
                consider(ub);
            }
            // two-sided root in t = u - m
            let (da, db) = (a - m, b - m);
            let (wx, wy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
            let qa = wx + wy - beta * beta;
            let qb = -2.0 * (da * wx + db * wy) + 2.0 * beta * c_shift;
            let qc = da * da * wx + db * db * wy - c_shift * c_shift;
            let hi = da.max(db);
            let tol = 1e-14 * (hi + c_shift * (dx + dy)).max(f64::MIN_POSITIVE);
            let admissible = |t: f64| t >= hi - tol && c_shift - beta * t >= -tol;
            for t in quadratic_roots(qa, qb, qc).into_iter().flatten() {
                if admissible(t) {
                    consider(m + t.max(hi));
                }
            }
        }
        (None, None) => unreachable!(),
    }

    if best.is_finite() {
        Some(CoupledUpdate {
            value: best,
            stalled: false,
        })
    } else {
        // rounding left no candidate; use the update from the smaller neighbour
        let (n, h) = match (a, b) {
            (Some(a), Some(b)) if b < a => (b, dy),
            (Some(a), _) => (a, dx),
            (None, Some(b)) => (b, dy),
            (None, None) => unreachable!(),
        };
        Some(CoupledUpdate {
            value: one_sided(n, h),
            stalled: false,
        })
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return [None, None];
    }
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { [Some(-c / b), None] } else { [None, None] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return [Some(0.0), None];
    }
    [Some(q / a), Some(c / q)]
}

/// Solved mode field plus sweep diagnostics.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub values: ScalarField,
    pub report: MarchReport,
}

impl ModeSolution {
    pub fn stall_count(&self) -> usize {
        self.report.stalled_nodes.len()
    }
}

pub fn solve_mode(problem: &CoupledProblem) -> Result<ModeSolution> {
    problem.validate()?;
    let grid = *problem.base_cost.grid();
    let c0 = problem.base_cost.values();
    let beta = problem.coupling_rate.values();
    let v = problem.coupled_value.values();
    let (values, report) = march(&grid, &problem.boundary, |idx, a, b| {
        local_update_coupled(a, b, c0[idx], beta[idx], v[idx], grid.dx, grid.dy).map(|u| NodeUpdate {
            value: u.value,
            stalled: u.stalled,
        })
    });
    Ok(ModeSolution {
        values: ScalarField::new(grid, values)?,
        report,
    })
}

/// Per-node `|u - local_update_coupled(...)|` using the final neighbour values.
pub fn node_residuals(problem: &CoupledProblem, u: &ScalarField) -> Vec<f64> {
    let grid = *u.grid();
    let mask = problem.boundary.mask(&grid);
    let c0 = problem.base_cost.values();
    let beta = problem.coupling_rate.values();
    let v = problem.coupled_value.values();
    (0..grid.len())
        .map(|idx| {
            if mask[idx] {
                return 0.0;
            }
            let (a, b) = neighbor_minima(u.values(), &grid, idx);
            match local_update_coupled(a, b, c0[idx], beta[idx], v[idx], grid.dx, grid.dy) {
                Some(upd) => (u.at(idx) - upd.value).abs(),
                None => f64::INFINITY,
            }
        })
        .collect()
}

pub fn residual(problem: &CoupledProblem, u: &ScalarField) -> f64 {
    node_residuals(problem, u).into_iter().fold(0.0, f64::max)
}
