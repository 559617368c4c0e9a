//! Spatially varying partial-breakdown rate with the target and depot at the
//! same point. Without total breakdowns the damaged robot's value is just
//! distance over speed, so it is symmetric about the target; adding total
//! breakdowns couples it to the mode-1 value and the symmetry is lost.

use breakdown_planner::field::{interp_value, lattice_asymmetry};
use breakdown_planner::scenario::ScenarioConfig;
use breakdown_planner::solver;
use breakdown_planner::trace::{default_step, trace};

fn main() -> breakdown_planner::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    for name in ["example2", "example2_total"] {
        let config = ScenarioConfig::load(format!("{dir}/{name}.json"))?;
        let env = config.environment()?;
        let sol = solver::solve(&env)?;
        let d = &sol.diagnostics;
        let centre = env.targets.nodes()[0];
        println!(
            "{name}: {} sweeps, {} evaluations, stalls {}, u2 asymmetry about the target {:.3e} (tol {:.1e})",
            d.iterations,
            d.policy_evaluations,
            d.stall_count,
            lattice_asymmetry(&sol.u2, centre),
            env.settings.tol
        );
        let targets = env.targets.points(&env.grid);
        for start in [[0.1, 0.5], [0.1, 0.15], [0.2, 0.9]] {
            let p1 = trace(&sol.u1, &env.speed1, &targets, start, default_step(&env.grid, &env.speed1))?;
            let p2 = trace(&sol.u2, &env.speed2, &targets, start, default_step(&env.grid, &env.speed2))?;
            let straight = (targets[0][0] - start[0]).hypot(targets[0][1] - start[1]);
            println!(
                "  from {start:?}: u1 {:.3}, mode-1 path {:.3}, mode-2 path {:.3}, straight line {:.3}",
                interp_value(&sol.u1, start)?,
                p1.length(),
                p2.length(),
                straight
            );
        }
    }
    Ok(())
}
