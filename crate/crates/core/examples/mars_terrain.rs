//! Rover planning on an elevation raster: slope limits speed, roughness
//! drives partial breakdowns, and there are no total breakdowns because
//! nothing can be sent out to fix the rover.
//!
//! Reads the bundled synthetic crater, derives the coefficient fields, solves
//! and traces the healthy route plus the damaged route from a breakdown site
//! halfway along it.

use breakdown_planner::field::{interp_value, NodeSet};
use breakdown_planner::solver::{self, EnvironmentSpec, SolverSettings};
use breakdown_planner::terrain::{ElevationRaster, TerrainFields, TerrainParams};
use breakdown_planner::trace::{default_step, trace};

fn main() -> breakdown_planner::Result<()> {
    let dem = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example4/crater.asc");
    let elevation = ElevationRaster::read(dem)?.elevation(None)?;
    let params = TerrainParams::default();
    let fields = TerrainFields::derive(&elevation, &params)?;
    let grid = *elevation.grid();
    println!(
        "{}x{} raster, slope up to {:.1} deg, speed {:.1}..{:.1} m/sol, breakdown rate up to {:.4}/sol",
        grid.nx,
        grid.ny,
        fields.slope.max(),
        fields.speed1.min(),
        fields.speed1.max(),
        fields.partial_rate.max()
    );

    let base = NodeSet::from_points(&grid, &[[105.0, 105.0]], vec![0.0])?;
    let mut env = EnvironmentSpec::new(grid, base.clone(), base);
    env.speed1 = fields.speed1.clone();
    env.speed2 = fields.speed2.clone();
    env.partial_rate = fields.partial_rate.clone();
    env.settings = SolverSettings {
        tol: 1e-3,
        ..SolverSettings::for_grid(&grid)
    };
    let sol = solver::solve(&env)?;
    println!("solved in {} sweeps, {} stalls", sol.diagnostics.iterations, sol.diagnostics.stall_count);

    let home = env.targets.points(&grid);
    let start = [900.0, 900.0];
    let healthy = trace(&sol.u1, &env.speed1, &home, start, default_step(&grid, &env.speed1))?;
    let site = healthy.points[healthy.points.len() / 2];
    let damaged = trace(&sol.u2, &env.speed2, &home, site, default_step(&grid, &env.speed2))?;
    println!(
        "healthy: expected {:.2} sols, route {:.0} m taking {:.2} sols",
        interp_value(&sol.u1, start)?,
        healthy.length(),
        healthy.duration()
    );
    println!(
        "damaged at ({:.0}, {:.0}): route {:.0} m taking {:.2} sols",
        site[0],
        site[1],
        damaged.length(),
        damaged.duration()
    );
    Ok(())
}
