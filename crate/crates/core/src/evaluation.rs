//! Exact value of a fixed pair of policies.
//!
//! With the motion directions frozen both mode equations become linear
//! transport equations. Each is discretised with one-sided differences taken
//! in the direction of motion, so a node only looks at the neighbours it is
//! heading to, and the two modes are solved jointly as one sparse system.

use crate::error::{Error, Result};
use crate::field::{Axis, ScalarField};
use crate::linalg::{gmres, CsrMatrix};
use crate::policy::PolicyField;
use crate::solver::EnvironmentSpec;

const RESTART: usize = 30;
const MAX_ITER: usize = 3000;
pub const LINEAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PolicyValues {
    pub r1: ScalarField,
    pub r2: ScalarField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Transport weights `f |a_k| / h_k` and the neighbour each one points to.
fn transport_terms(env: &EnvironmentSpec, idx: usize, a: [f64; 2], speed: f64) -> Vec<(usize, f64)> {
    let grid = &env.grid;
    let mut out = Vec::with_capacity(2);
    for (axis, comp) in [(Axis::X, a[0]), (Axis::Y, a[1])] {
        if comp == 0.0 {
            continue;
        }
        let (minus, plus) = grid.axis_neighbors(idx, axis);
        let target = if comp > 0.0 { plus } else { minus };
        if let Some(nb) = target {
            out.push((nb, speed * comp.abs() / grid.spacing(axis)));
        }
    }
    out
}

fn ascending(values: &ScalarField) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.values().len()).collect();
    order.sort_by(|&a, &b| values.at(a).total_cmp(&values.at(b)).then(a.cmp(&b)));
    order
}

/// Solve the linear system for `(r1, r2)` under the given policies.
///
/// `current` supplies the values used for nodes whose policy is undefined
/// away from the boundary sets, and the ordering for the preconditioner.
pub fn evaluate_policy(
    policy1: &PolicyField,
    policy2: &PolicyField,
    env: &EnvironmentSpec,
    repair_cost: &ScalarField,
    current: [&ScalarField; 2],
) -> Result<PolicyValues> {
    let grid = env.grid;
    let n = grid.len();
    if !policy1.grid().matches(&grid) || !policy2.grid().matches(&grid) {
        return Err(Error::InvalidProblem("policy grid differs from the environment grid".into()));
    }
    let targets = env.targets.mask(&grid);
    let mut depot_cost = vec![None; n];
    for ((i, j), rd) in env.depots.iter() {
        depot_cost[grid.index(i, j)] = Some(rd);
    }
    let has_depots = env.has_depots();

    let mut a = CsrMatrix::with_capacity(2 * n, 8 * n);
    let mut b = vec![0.0; 2 * n];

    for k in 0..n {
        let terms = policy1
            .direction(k)
            .filter(|_| !targets[k])
            .map(|d| transport_terms(env, k, d, env.speed1.at(k)))
            .unwrap_or_default();
        let phi = env.partial_rate.at(k);
        if targets[k] {
            a.push_row(&[(k, 1.0)]);
        } else if terms.is_empty() && phi == 0.0 {
            a.push_row(&[(k, 1.0)]);
            b[k] = current[0].at(k);
        } else {
            let total: f64 = terms.iter().map(|t| t.1).sum();
            let mut row = vec![(k, total + phi), (n + k, -phi)];
            row.extend(terms.iter().map(|&(nb, w)| (nb, -w)));
            a.push_row(&row);
            b[k] = env.cost1.at(k) + env.total_rate1.at(k) * repair_cost.at(k);
        }
    }
    for k in 0..n {
        let row_idx = n + k;
        if !has_depots {
            a.push_row(&[(row_idx, 1.0), (k, -1.0)]);
            continue;
        }
        if let Some(rd) = depot_cost[k] {
            a.push_row(&[(row_idx, 1.0), (k, -1.0)]);
            b[row_idx] = rd;
            continue;
        }
        let terms = policy2
            .direction(k)
            .map(|d| transport_terms(env, k, d, env.speed2.at(k)))
            .unwrap_or_default();
        let lambda = env.total_rate2.at(k);
        if terms.is_empty() && lambda == 0.0 {
            a.push_row(&[(row_idx, 1.0)]);
            b[row_idx] = current[1].at(k);
        } else {
            let total: f64 = terms.iter().map(|t| t.1).sum();
            let mut row = vec![(row_idx, total + lambda), (k, -lambda)];
            row.extend(terms.iter().map(|&(nb, w)| (n + nb, -w)));
            a.push_row(&row);
            b[row_idx] = env.cost2.at(k) + lambda * repair_cost.at(k);
        }
    }

    let mut order = ascending(current[0]);
    order.extend(ascending(current[1]).into_iter().map(|k| n + k));

    let mut x: Vec<f64> = current[0].values().iter().chain(current[1].values()).copied().collect();
    let outcome = gmres(
        &a,
        &b,
        &mut x,
        |v, z| a.gauss_seidel_from_zero(&order, v, z),
        RESTART,
        LINEAR_TOLERANCE,
        MAX_ITER,
    );
    if !outcome.converged || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve(format!(
            "GMRES stopped at relative residual {:.3e} after {} iterations on a {}x{} grid",
            outcome.relative_residual, outcome.iterations, grid.nx, grid.ny
        )));
    }

    let mut r2 = x.split_off(n);
    let mut r1 = x;
    for k in 0..n {
        if targets[k] {
            r1[k] = 0.0;
        }
    }
    for k in 0..n {
        if !has_depots {
            r2[k] = r1[k];
        } else if let Some(rd) = depot_cost[k] {
            r2[k] = rd + r1[k];
        }
    }
    Ok(PolicyValues {
        r1: ScalarField::new(grid, r1)?,
        r2: ScalarField::new(grid, r2)?,
        iterations: outcome.iterations,
        relative_residual: outcome.relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid2D, NodeSet};
    use crate::policy::extract_policy;
    use crate::solver::{self, EnvironmentSpec};

    fn line_env(n: usize) -> EnvironmentSpec {
        let grid = Grid2D::new(n, 3, 1.0 / (n - 1) as f64, 0.5, 0.0, 0.0).unwrap();
        EnvironmentSpec::new(
            grid,
            NodeSet::zeros(&grid, vec![(0, 0), (0, 1), (0, 2)]).unwrap(),
            NodeSet::zeros(&grid, vec![(0, 0), (0, 1), (0, 2)]).unwrap(),
        )
    }

    #[test]
    fn straight_transport_gives_distance() {
        let env = line_env(41);
        let grid = env.grid;
        let p = PolicyField::uniform(grid, [-1.0, 0.0]).unwrap();
        let zero = ScalarField::constant(grid, 0.0);
        let r = evaluate_policy(&p, &p, &env, &env.location_cost, [&zero, &zero]).unwrap();
        for idx in 0..grid.len() {
            let (i, j) = grid.ij(idx);
            assert!((r.r1.get(i, j) - grid.x(i)).abs() <= 1e-10);
        }
    }

    #[test]
    fn optimal_policy_reproduces_converged_values() {
        let grid = Grid2D::unit_square(31).unwrap();
        let mut env = EnvironmentSpec::new(
            grid,
            NodeSet::zeros(&grid, vec![(25, 25)]).unwrap(),
            NodeSet::zeros(&grid, vec![(5, 20), (25, 25)]).unwrap(),
        );
        env.speed2 = ScalarField::constant(grid, 0.3);
        env.partial_rate = ScalarField::from_fn(grid, |x, y| 2.0 + (5.0 * x).sin() * (3.0 * y).cos());
        env.total_rate1 = ScalarField::constant(grid, 0.4);
        env.total_rate2 = ScalarField::constant(grid, 0.8);
        env.repair_speed = ScalarField::constant(grid, 0.2);
        let sol = solver::solve(&env).unwrap();
        assert_eq!(sol.diagnostics.stall_count, 0);
        let r = evaluate_policy(
            &extract_policy(&sol.u1),
            &extract_policy(&sol.u2),
            &env,
            &sol.repair_cost,
            [&sol.u1, &sol.u2],
        )
        .unwrap();
        let tol = env.settings.tol;
        assert!(r.r1.max_abs_diff(&sol.u1) <= 10.0 * tol);
        assert!(r.r2.max_abs_diff(&sol.u2) <= 10.0 * tol);
        assert!(r.relative_residual <= LINEAR_TOLERANCE);
    }

    #[test]
    fn suboptimal_policy_costs_more() {
        let grid = Grid2D::unit_square(25).unwrap();
        let mut env = EnvironmentSpec::new(
            grid,
            NodeSet::zeros(&grid, vec![(12, 12)]).unwrap(),
            NodeSet::zeros(&grid, vec![(12, 12)]).unwrap(),
        );
        env.partial_rate = ScalarField::constant(grid, 1.0);
        env.speed2 = ScalarField::constant(grid, 0.5);
        let sol = solver::solve(&env).unwrap();
        // a distance field to a different point gives a worse but still proper policy
        let detour = ScalarField::from_fn(grid, |x, y| (x - 0.5).abs() + 2.0 * (y - 0.5).abs());
        let p = extract_policy(&detour);
        let r = evaluate_policy(&p, &p, &env, &sol.repair_cost, [&sol.u1, &sol.u2]).unwrap();
        let tol = env.settings.tol;
        assert!(r.r1.values().iter().zip(sol.u1.values()).all(|(a, b)| *a >= *b - 10.0 * tol));
    }
}
