//! Refinement study on the radially symmetric scenario: the grid solution
//! is compared with a high-accuracy integration of the radial equations.
//!
//! ```text
//! cargo run --release --example radial_convergence
//! ```

use breakdown_planner::convergence::convergence_study;
use breakdown_planner::radial::{reference, RadialParams};
use breakdown_planner::scenario::ScenarioConfig;

fn main() -> breakdown_planner::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example1.json");
    let config = ScenarioConfig::load(path)?;

    let radii = [0.1, 0.25, 0.5];
    let exact = reference(&RadialParams::radial_example(), &radii)?;
    for (r, u) in radii.iter().zip(&exact) {
        println!("r = {r:<4}  u1 = {:.8}  u2 = {:.8}", u[0], u[1]);
    }

    let study = convergence_study(&config, &[51, 101, 201, 401])?;
    println!("\n    n        dx     error u1     error u2");
    for row in &study.rows {
        println!("{:>5} {:>9.5} {:>12.4e} {:>12.4e}", row.n, row.dx, row.error_u1, row.error_u2);
    }
    println!("slope u1 {:.3}  u2 {:.3}", study.slope_u1, study.slope_u2);
    println!("refinement ratios u1 {:?}", study.ratios_u1.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>());
    Ok(())
}
