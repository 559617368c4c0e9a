//! Cost of an in-place repair: the repair vehicle drives from the cheapest
//! depot to the breakdown site, then the fixed repair cost is added.

use breakdown_planner::field::{interp_value, write_field, Grid2D, NodeSet, ScalarField};
use breakdown_planner::repair::{compute_repair, RepairModel};

fn main() -> breakdown_planner::Result<()> {
    let grid = Grid2D::unit_square(101)?;
    // two depots; dispatching from the second one is dearer
    let depots = NodeSet::from_points(&grid, &[[0.2, 0.2], [0.8, 0.7]], vec![0.0, 0.5])?;
    let model = RepairModel {
        speed: ScalarField::from_fn(grid, |x, _| if x < 0.5 { 0.1 } else { 0.2 }),
        running_cost: ScalarField::constant(grid, 1.0),
        depots,
        location_cost: ScalarField::constant(grid, 1.0),
    };
    let r = compute_repair(&model)?;

    for p in [[0.2, 0.2], [0.5, 0.5], [0.8, 0.7], [0.95, 0.05]] {
        println!(
            "at ({:.2}, {:.2}): vehicle cost {:7.4}, repair cost {:7.4}",
            p[0],
            p[1],
            interp_value(&r.vehicle_cost, p)?,
            interp_value(&r.repair_cost, p)?
        );
    }

    let dir = std::env::temp_dir().join("breakdown-planner-repair");
    std::fs::create_dir_all(&dir).map_err(|e| breakdown_planner::Error::Io { path: dir.clone(), source: e })?;
    write_field(&r.repair_cost, dir.join("R.csv"))?;
    println!("wrote {}", dir.join("R.csv").display());
    Ok(())
}
