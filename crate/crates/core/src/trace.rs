//! Optimal paths by descending the value function.

use crate::error::{Error, Result};
use crate::field::{interp_gradient, interp_value, Grid2D, ScalarField};

/// Time step that keeps every step below half a cell.
pub fn default_step(grid: &Grid2D, speed: &ScalarField) -> f64 {
    grid.min_spacing() / (2.0 * speed.max())
}

/// Unit steepest-descent direction of `u` at `p`, or `None` on a flat spot.
pub fn descent_direction(u: &ScalarField, p: [f64; 2]) -> Result<Option<[f64; 2]>> {
    let g = interp_gradient(u, p)?;
    if g.singular {
        return Ok(None);
    }
    let n = g.norm();
    Ok(Some([-g.gradient[0] / n, -g.gradient[1] / n]))
}

/// Closest member of `sites` lying within `radius` of `p`.
pub(crate) fn captured(sites: &[[f64; 2]], p: [f64; 2], radius: f64) -> Option<[f64; 2]> {
    sites
        .iter()
        .map(|s| (s, (s[0] - p[0]).hypot(s[1] - p[1])))
        .filter(|(_, d)| *d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(s, _)| *s)
}

/// Midpoint step of `dy/ds = f(y) a(y)`, clamped to the domain.
pub(crate) fn midpoint_step(u: &ScalarField, speed: &ScalarField, p: [f64; 2], h: f64) -> Result<Option<[f64; 2]>> {
    let grid = u.grid();
    let Some(a0) = descent_direction(u, p)? else {
        return Ok(None);
    };
    let f0 = interp_value(speed, p)?;
    let mid = grid.clamp([p[0] + 0.5 * h * f0 * a0[0], p[1] + 0.5 * h * f0 * a0[1]]);
    let Some(am) = descent_direction(u, mid)? else {
        return Ok(None);
    };
    let fm = interp_value(speed, mid)?;
    Ok(Some(grid.clamp([p[0] + h * fm * am[0], p[1] + h * fm * am[1]])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracedPath {
    pub points: Vec<[f64; 2]>,
    /// Time spent moving when each point is reached.
    pub times: Vec<f64>,
}

impl TracedPath {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `sum K/f * segment length`, evaluated at segment midpoints.
    pub fn travel_cost(&self, running_cost: &ScalarField, speed: &ScalarField) -> Result<f64> {
        let mut total = 0.0;
        for w in self.points.windows(2) {
            let mid = [0.5 * (w[0][0] + w[1][0]), 0.5 * (w[0][1] + w[1][1])];
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            total += len * interp_value(running_cost, mid)? / interp_value(speed, mid)?;
        }
        Ok(total)
    }
}

/// Follow `-grad u` from `start` until one of `targets` is within one grid
/// spacing, then finish with a straight segment onto it.
pub fn trace(
    u: &ScalarField,
    speed: &ScalarField,
    targets: &[[f64; 2]],
    start: [f64; 2],
    step: f64,
) -> Result<TracedPath> {
    let grid = *u.grid();
    if !grid.contains(start) {
        return Err(Error::OutOfDomain {
            x: start[0],
            y: start[1],
        });
    }
    if targets.is_empty() {
        return Err(Error::InvalidProblem("no targets to trace toward".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidProblem(format!("trace step must be positive, got {step}")));
    }
    let radius = grid.max_spacing();
    let budget = 10.0 * grid.diameter() * speed.max() / speed.min();
    let max_steps = (budget / (step * speed.min())).ceil() as usize + 1;

    let mut p = grid.clamp(start);
    let mut path = TracedPath {
        points: vec![p],
        times: vec![0.0],
    };
    let mut travelled = 0.0;
    loop {
        if let Some(t) = captured(targets, p, radius) {
            let gap = (t[0] - p[0]).hypot(t[1] - p[1]);
            if gap > 0.0 {
                let f = interp_value(speed, p)?;
                let s = path.duration() + gap / f;
                path.points.push(t);
                path.times.push(s);
            }
            return Ok(path);
        }
        let next = midpoint_step(u, speed, p, step)?;
        let Some(q) = next else {
            return Err(Error::TraceAborted {
                reason: format!("value function is flat at ({:.6}, {:.6})", p[0], p[1]),
                steps: path.points.len() - 1,
                partial: path.points,
            });
        };
        travelled += (q[0] - p[0]).hypot(q[1] - p[1]);
        if travelled > budget || path.points.len() > max_steps {
            return Err(Error::TraceAborted {
                reason: format!("path exceeded length budget {budget:.3}"),
                steps: path.points.len() - 1,
                partial: path.points,
            });
        }
        p = q;
        path.points.push(p);
        path.times.push(path.duration() + step);
    }
}
