//! Feedback controls recovered from a value function.
//!
//! Directions come from the same upwind differences the causal solvers use:
//! along each axis the robot moves toward the smaller neighbour when that
//! neighbour lies below the node. Evaluating such a policy reproduces the
//! discrete fixed point exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{smaller_neighbor, Axis, Grid2D, ScalarField, SINGULAR_GRADIENT};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    grid: Grid2D,
    directions: Vec<Option<[f64; 2]>>,
}

impl PolicyField {
    pub fn new(grid: Grid2D, directions: Vec<Option<[f64; 2]>>) -> Result<Self> {
        if directions.len() != grid.len() {
            return Err(Error::InvalidProblem(format!(
                "policy has {} entries for a grid of {} nodes",
                directions.len(),
                grid.len()
            )));
        }
        if let Some(k) = directions
            .iter()
            .position(|d| d.is_some_and(|a| (a[0].hypot(a[1]) - 1.0).abs() > 1e-9))
        {
            return Err(Error::InvalidProblem(format!("policy direction at node {k} is not a unit vector")));
        }
        Ok(Self { grid, directions })
    }

    /// The same direction at every node.
    pub fn uniform(grid: Grid2D, direction: [f64; 2]) -> Result<Self> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) {
            return Err(Error::InvalidProblem("zero direction".into()));
        }
        let a = [direction[0] / n, direction[1] / n];
        Ok(Self {
            grid,
            directions: vec![Some(a); grid.len()],
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Unit motion direction at a node, `None` where the policy is undefined.
    pub fn direction(&self, idx: usize) -> Option<[f64; 2]> {
        self.directions[idx]
    }

    pub fn defined_count(&self) -> usize {
        self.directions.iter().filter(|d| d.is_some()).count()
    }

    /// CSV with header `x,y,ax,ay,defined`; undefined nodes carry a zero vector.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "x,y,ax,ay,defined")?;
            for (idx, d) in self.directions.iter().enumerate() {
                let (i, j) = self.grid.ij(idx);
                let (a, flag) = match d {
                    Some(a) => (*a, 1),
                    None => ([0.0, 0.0], 0),
                };
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    self.grid.x(i),
                    self.grid.y(j),
                    a[0],
                    a[1],
                    flag
                )?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Normalised descent direction from upwind differences; undefined where the
/// node lies at or below all of its neighbours.
pub fn extract_policy(u: &ScalarField) -> PolicyField {
    let grid = *u.grid();
    let values = u.values();
    let directions = (0..grid.len())
        .map(|idx| {
            let component = |axis: Axis| match smaller_neighbor(values, &grid, idx, axis) {
                Some((n, side)) if values[idx] > n => f64::from(side) * (values[idx] - n) / grid.spacing(axis),
                _ => 0.0,
            };
            let a = [component(Axis::X), component(Axis::Y)];
            let norm = a[0].hypot(a[1]);
            (norm > SINGULAR_GRADIENT).then(|| [a[0] / norm, a[1] / norm])
        })
        .collect();
    PolicyField { grid, directions }
}
