//! Three depots away from the target. As the partial-breakdown rate grows
//! the healthy robot first bends its route toward the depots, then gives up
//! on visiting every one of them.

use breakdown_planner::field::ScalarField;
use breakdown_planner::scenario::ScenarioConfig;
use breakdown_planner::solver;
use breakdown_planner::trace::{default_step, trace};

fn main() -> breakdown_planner::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let start = [0.1, 0.1];
    let mut previous: Option<ScalarField> = None;
    for phi in [0, 3, 5] {
        let config = ScenarioConfig::load(format!("{dir}/example3_phi{phi}.json"))?;
        let env = config.environment()?;
        let sol = solver::solve(&env)?;
        let path = trace(&sol.u1, &env.speed1, &env.targets.points(&env.grid), start, default_step(&env.grid, &env.speed1))?;
        let nearest_depot = path
            .points
            .iter()
            .map(|p| {
                env.depots
                    .points(&env.grid)
                    .iter()
                    .map(|d| (d[0] - p[0]).hypot(d[1] - p[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        let raised = previous
            .as_ref()
            .is_none_or(|u| sol.u1.values().iter().zip(u.values()).all(|(a, b)| a >= b));
        println!(
            "phi = {phi}: path length {:.4}, closest approach to a depot {:.4}, u1 raised everywhere: {raised}",
            path.length(),
            nearest_depot
        );
        previous = Some(sol.u1);
    }
    Ok(())
}
