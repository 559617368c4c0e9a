//! Simulate the breakdown process under the computed feedback and compare
//! the average realised cost with the value function at the start.

use std::time::Instant;

use breakdown_planner::pdmp::{monte_carlo, Planner, SimulationSettings};
use breakdown_planner::radial::{reference, RadialParams};
use breakdown_planner::scenario::ScenarioConfig;
use breakdown_planner::solver;

fn main() -> breakdown_planner::Result<()> {
    let config = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example1.json"))?;
    let env = config.environment()?;
    let sol = solver::solve(&env)?;
    let planner = Planner {
        env: &env,
        u1: &sol.u1,
        u2: &sol.u2,
        repair_cost: &sol.repair_cost,
    };
    let settings = SimulationSettings::for_env(&env);

    let start = [0.8, 0.5];
    let clock = Instant::now();
    let (summary, runs) = monte_carlo(&planner, &settings, start, 10_000, config.seed)?;
    let exact = reference(&RadialParams::radial_example(), &[0.3])?[0][0];
    println!("{} runs in {:.2?}", summary.runs, clock.elapsed());
    println!("mean cost     {:.4} +/- {:.4}", summary.mean, summary.std_error);
    println!("grid value    {:.4}", summary.predicted);
    println!("radial value  {exact:.4}");
    println!("events        {:?}", summary.events);

    let longest = runs.iter().max_by(|a, b| a.total_cost.total_cmp(&b.total_cost)).expect("runs");
    println!("costliest run: {:.3} over {:.3} time units", longest.total_cost, longest.duration());
    for e in &longest.events {
        println!("  s = {:.3}  {:<17} at ({:.3}, {:.3})  paid {:.3}", e.s, e.kind.as_str(), e.position[0], e.position[1], e.cost);
    }
    Ok(())
}
