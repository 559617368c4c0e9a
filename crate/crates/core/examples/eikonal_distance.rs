//! Fast Marching on a single-mode problem: travel time to a point through
//! a medium with a slow band, and the error of the constant-speed case.

use breakdown_planner::eikonal::{self, EikonalProblem};
use breakdown_planner::field::{interp_value, Grid2D, NodeSet, ScalarField};
use breakdown_planner::trace::{default_step, trace};

fn main() -> breakdown_planner::Result<()> {
    for n in [51, 101, 201] {
        let grid = Grid2D::unit_square(n)?;
        let centre = ((n - 1) / 2, (n - 1) / 2);
        let problem = EikonalProblem::new(
            ScalarField::constant(grid, 1.0),
            ScalarField::constant(grid, 1.0),
            NodeSet::zeros(&grid, vec![centre])?,
        )?;
        let u = eikonal::solve(&problem)?;
        let exact = ScalarField::from_fn(grid, |x, y| (x - 0.5).hypot(y - 0.5));
        println!("n = {n:>3}: max error against Euclidean distance {:.4e}", u.max_abs_diff(&exact));
    }

    // a vertical band at x in [0.4, 0.6] where speed drops to 0.2, with a gap at the top
    let grid = Grid2D::unit_square(201)?;
    let speed = ScalarField::from_fn(grid, |x, y| if (0.4..=0.6).contains(&x) && y < 0.8 { 0.2 } else { 1.0 });
    let target = grid.nearest_node([0.9, 0.2])?;
    let problem = EikonalProblem::new(speed.clone(), ScalarField::constant(grid, 1.0), NodeSet::zeros(&grid, vec![target])?)?;
    let u = eikonal::solve(&problem)?;
    let start = [0.1, 0.2];
    let path = trace(&u, &speed, &[grid.point(target.0, target.1)], start, default_step(&grid, &speed))?;
    let highest = path.points.iter().map(|p| p[1]).fold(f64::MIN, f64::max);
    println!(
        "slow band: time from {start:?} is {:.4}, path length {:.4}, highest point y = {highest:.3}",
        interp_value(&u, start)?,
        path.length()
    );
    println!("discrete equation residual {:.2e}", eikonal::residual(&problem, &u));
    Ok(())
}
