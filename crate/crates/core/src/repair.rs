//! In-place repair cost `R = u_R + R_F`, where `u_R` is the repair vehicle's
//! own optimal travel cost from the nearest depot.

use crate::eikonal::{self, EikonalProblem};
use crate::error::{Error, Result};
use crate::field::{NodeSet, ScalarField};

#[derive(Debug, Clone)]
pub struct RepairModel {
    /// Repair vehicle speed `f_R`.
    pub speed: ScalarField,
    /// Repair vehicle running cost `K_R`.
    pub running_cost: ScalarField,
    /// Depot nodes carrying their dispatch cost `R_D`.
    pub depots: NodeSet,
    /// Breakdown-location repair cost `R_F`.
    pub location_cost: ScalarField,
}

#[derive(Debug, Clone)]
pub struct RepairField {
    pub vehicle_cost: ScalarField,
    pub repair_cost: ScalarField,
}

impl RepairModel {
    pub fn validate(&self) -> Result<()> {
        if self.depots.is_empty() {
            return Err(Error::Config("repair model needs at least one depot".into()));
        }
        if self.depots.values().iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidProblem("depot costs R_D must be nonnegative".into()));
        }
        if self.location_cost.values().iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidProblem("location repair cost R_F must be nonnegative".into()));
        }
        if !self.speed.grid().matches(self.location_cost.grid()) {
            return Err(Error::InvalidProblem("R_F grid differs from f_R grid".into()));
        }
        Ok(())
    }
}

pub fn compute_repair(model: &RepairModel) -> Result<RepairField> {
    model.validate()?;
    let problem = EikonalProblem::new(model.speed.clone(), model.running_cost.clone(), model.depots.clone())?;
    let vehicle_cost = eikonal::solve(&problem)?;
    let repair_cost = vehicle_cost.zip_with(&model.location_cost, |u, r| u + r);
    Ok(RepairField {
        vehicle_cost,
        repair_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    fn model(grid: Grid2D, fr: f64, kr: f64, depots: Vec<(usize, usize)>, rd: f64, rf: f64) -> RepairModel {
        let n = depots.len();
        RepairModel {
            speed: ScalarField::constant(grid, fr),
            running_cost: ScalarField::constant(grid, kr),
            depots: NodeSet::new(&grid, depots, vec![rd; n]).unwrap(),
            location_cost: ScalarField::constant(grid, rf),
        }
    }

    // Dijkstra on the 4-neighbour graph with edge weight = spacing * K/f at the far node
    fn graph_distance(grid: &Grid2D, sources: &[(usize, usize)], cost: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; grid.len()];
        let mut heap = BinaryHeap::new();
        for &(i, j) in sources {
            let s = grid.index(i, j);
            dist[s] = 0.0;
            heap.push(Reverse((0u64, s)));
        }
        while let Some(Reverse((dbits, v))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[v] {
                continue;
            }
            for w in grid.neighbors(v) {
                let h = if w / grid.nx == v / grid.nx { grid.dx } else { grid.dy };
                let nd = d + h * cost(w);
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((nd.to_bits(), w)));
                }
            }
        }
        dist
    }

    #[test]
    fn slow_vehicle_along_axis() {
        let grid = Grid2D::unit_square(51).unwrap();
        let r = compute_repair(&model(grid, 0.1, 1.0, vec![(25, 25)], 0.0, 1.0)).unwrap();
        // r = 0.2 is ten cells away
        assert!((r.repair_cost.get(35, 25) - 3.0).abs() < 1e-12);
        assert!((r.repair_cost.get(25, 15) - 3.0).abs() < 1e-12);
        for k in 0..51 {
            let d = (k as f64 - 25.0).abs() / 50.0;
            assert!((r.repair_cost.get(k, 25) - (10.0 * d + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_at_depot_without_fixed_costs() {
        let grid = Grid2D::unit_square(11).unwrap();
        let r = compute_repair(&model(grid, 1.0, 1.0, vec![(3, 4)], 0.0, 0.0)).unwrap();
        assert_eq!(r.repair_cost.get(3, 4), 0.0);
    }

    #[test]
    fn two_depots_match_graph_distance_on_axes() {
        let grid = Grid2D::unit_square(31).unwrap();
        let depots = vec![(5, 10), (24, 10)];
        let r = compute_repair(&model(grid, 1.0, 1.0, depots.clone(), 0.0, 0.0)).unwrap();
        let dist = graph_distance(&grid, &depots, |_| 1.0);
        // nodes on the depots' row and columns are reached by axis-aligned straight paths
        for i in 0..31 {
            let idx = grid.index(i, 10);
            assert!((r.repair_cost.at(idx) - dist[idx]).abs() < 1e-12);
        }
        for j in 0..31 {
            for &i in &[5usize, 24] {
                let idx = grid.index(i, j);
                assert!((r.repair_cost.at(idx) - dist[idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depot_and_location_costs_add() {
        let grid = Grid2D::unit_square(21).unwrap();
        let r = compute_repair(&model(grid, 0.5, 2.0, vec![(7, 7)], 0.4, 1.5)).unwrap();
        assert!((r.repair_cost.get(7, 7) - 1.9).abs() < 1e-14);
        assert!(r.repair_cost.values().iter().all(|&v| v >= 1.5));
    }

    #[test]
    fn empty_depot_set_is_config_error() {
        let grid = Grid2D::unit_square(11).unwrap();
        let err = compute_repair(&model(grid, 1.0, 1.0, vec![], 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn extra_depot_never_increases_cost() {
        let grid = Grid2D::unit_square(25).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = model(grid, 1.0, 1.0, vec![(2, 3)], 0.1, 0.5);
            m.speed = ScalarField::from_fn(grid, |_, _| rng.random_range(0.2..1.5));
            let base = compute_repair(&m).unwrap();
            let extra = (rng.random_range(0..25), rng.random_range(0..25));
            if extra == (2, 3) {
                continue;
            }
            m.depots = NodeSet::new(&grid, vec![(2, 3), extra], vec![0.1, 0.1]).unwrap();
            let more = compute_repair(&m).unwrap();
            assert!(more
                .repair_cost
                .values()
                .iter()
                .zip(base.repair_cost.values())
                .all(|(a, b)| *a <= *b + 1e-12));
        }
    }

    #[test]
    fn lipschitz_against_brute_force() {
        let grid = Grid2D::unit_square(15).unwrap();
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut m = model(grid, 1.0, 1.0, vec![(7, 7)], 0.0, 0.0);
            m.speed = ScalarField::from_fn(grid, |_, _| rng.random_range(0.3..1.5));
            m.running_cost = ScalarField::from_fn(grid, |_, _| rng.random_range(0.5..1.5));
            let r = compute_repair(&m).unwrap().repair_cost;
            let ratio = m.running_cost.zip_with(&m.speed, |k, f| k / f);
            let lip = ratio.max();
            // the FMM value never exceeds the graph path cost
            let dist = graph_distance(&grid, &[(7, 7)], |w| ratio.at(w));
            for idx in 0..grid.len() {
                assert!(r.at(idx) <= dist[idx] + 1e-12);
                for nb in grid.neighbors(idx) {
                    assert!((r.at(idx) - r.at(nb)).abs() <= lip * grid.max_spacing() + 1e-12);
                }
            }
        }
    }
}
