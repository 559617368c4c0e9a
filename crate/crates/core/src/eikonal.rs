//! Fast Marching solver for `f |grad u| = K` with Dirichlet data on a node set.

use crate::error::{Error, Result};
use crate::field::{NodeSet, ScalarField};
use crate::marching::{march, neighbor_minima, MarchReport, NodeUpdate};

#[derive(Debug, Clone)]
pub struct EikonalProblem {
    pub speed: ScalarField,
    pub running_cost: ScalarField,
    pub boundary: NodeSet,
}

impl EikonalProblem {
    pub fn new(speed: ScalarField, running_cost: ScalarField, boundary: NodeSet) -> Result<Self> {
        let p = Self {
            speed,
            running_cost,
            boundary,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.speed.grid().matches(self.running_cost.grid()) {
            return Err(Error::InvalidProblem("speed and running cost grids differ".into()));
        }
        if self.boundary.is_empty() {
            return Err(Error::InvalidProblem("boundary node set is empty".into()));
        }
        if let Some(k) = self.speed.values().iter().position(|&f| !(f > 0.0 && f.is_finite())) {
            let (i, j) = self.speed.grid().ij(k);
            return Err(Error::InvalidProblem(format!(
                "speed must be strictly positive; got {} at node ({i}, {j}) (use a small positive floor instead of 0)",
                self.speed.at(k)
            )));
        }
        if let Some(k) = self
            .running_cost
            .values()
            .iter()
            .position(|&c| !(c > 0.0 && c.is_finite()))
        {
            let (i, j) = self.running_cost.grid().ij(k);
            return Err(Error::InvalidProblem(format!(
                "running cost must be strictly positive; got {} at node ({i}, {j})",
                self.running_cost.at(k)
            )));
        }
        if self.boundary.values().iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidProblem("boundary values must be finite".into()));
        }
        Ok(())
    }
}

/// Largest root of `((u-a)+/dx)^2 + ((u-b)+/dy)^2 = c^2`.
///
/// `a` and `b` are the smaller neighbours along x and y. Falls back to the
/// one-sided update when the two-sided root does not exceed both neighbours.
pub fn local_update(a: Option<f64>, b: Option<f64>, c: f64, dx: f64, dy: f64) -> Option<f64> {
    match (a, b) {
        (None, None) => None,
        (Some(a), None) => Some(a + c * dx),
        (None, Some(b)) => Some(b + c * dy),
        (Some(a), Some(b)) => {
            // shift by the smaller neighbour so the quadratic stays well scaled
            let m = a.min(b);
            let (da, db) = (a - m, b - m);
            let (wx, wy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
            let qa = wx + wy;
            let qb = -2.0 * (da * wx + db * wy);
            let qc = da * da * wx + db * db * wy - c * c;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let t = (-qb + disc.sqrt()) / (2.0 * qa);
                if t >= da.max(db) {
                    return Some(m + t);
                }
            }
            Some((a + c * dx).min(b + c * dy))
        }
    }
}

pub fn solve(problem: &EikonalProblem) -> Result<ScalarField> {
    solve_with_report(problem).map(|(u, _)| u)
}

pub fn solve_with_report(problem: &EikonalProblem) -> Result<(ScalarField, MarchReport)> {
    problem.validate()?;
    let grid = *problem.speed.grid();
    let f = problem.speed.values();
    let k = problem.running_cost.values();
    let (values, report) = march(&grid, &problem.boundary, |idx, a, b| {
        local_update(a, b, k[idx] / f[idx], grid.dx, grid.dy).map(|value| NodeUpdate {
            value,
            stalled: false,
        })
    });
    Ok((ScalarField::new(grid, values)?, report))
}

/// Largest `|u - local_update(...)|` over non-boundary nodes.
pub fn residual(problem: &EikonalProblem, u: &ScalarField) -> f64 {
    let grid = *u.grid();
    let mask = problem.boundary.mask(&grid);
    let f = problem.speed.values();
    let k = problem.running_cost.values();
    (0..grid.len())
        .filter(|&idx| !mask[idx])
        .map(|idx| {
            let (a, b) = neighbor_minima(u.values(), &grid, idx);
            let upd = local_update(a, b, k[idx] / f[idx], grid.dx, grid.dy).unwrap_or(f64::INFINITY);
            (u.at(idx) - upd).abs()
        })
        .fold(0.0, f64::max)
}
