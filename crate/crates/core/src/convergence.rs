//! Grid refinement study against the radial reference solution.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Grid2D;
use crate::radial::{fit_log_slope, RadialTable};
use crate::scenario::ScenarioConfig;
use crate::solver::{self, Method};

const REFERENCE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dx: f64,
    pub error_u1: f64,
    pub error_u2: f64,
    pub iterations: usize,
    pub stall_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of the max-norm error against the number of cells per side.
    pub slope_u1: f64,
    pub slope_u2: f64,
    /// Error on each grid divided by the error on the next finer one.
    pub ratios_u1: Vec<f64>,
    pub ratios_u2: Vec<f64>,
}

/// Solve the scenario on `n x n` grids over its bounds and measure the
/// max-norm error of both value functions against the radial reference.
pub fn convergence_study(config: &ScenarioConfig, sizes: &[usize]) -> Result<ConvergenceStudy> {
    if sizes.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two grid sizes".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("grid sizes must increase".into()));
    }
    let params = config.radial_params()?;
    let table = RadialTable::new(&params, REFERENCE_STEP)?;
    let center = config.targets[0];
    let [x0, x1, y0, y1] = config.grid.bounds;

    let rows = sizes
        .par_iter()
        .map(|&n| {
            let grid = Grid2D::spanning(n, n, x0, x1, y0, y1).map_err(|e| Error::Config(e.to_string()))?;
            let env = config.environment_on(grid)?;
            let sol = match config.method() {
                Method::ValuePolicy => solver::solve(&env)?,
                Method::ValueIteration => solver::solve_value_iteration(&env)?,
            };
            let (mut e1, mut e2) = (0.0f64, 0.0f64);
            for idx in 0..grid.len() {
                let (i, j) = grid.ij(idx);
                let r = (grid.x(i) - center[0]).hypot(grid.y(j) - center[1]);
                let exact = table.eval(r);
                e1 = e1.max((sol.u1.at(idx) - exact[0]).abs());
                e2 = e2.max((sol.u2.at(idx) - exact[1]).abs());
            }
            Ok(ConvergenceRow {
                n,
                dx: grid.dx,
                error_u1: e1,
                error_u2: e2,
                iterations: sol.diagnostics.iterations,
                stall_count: sol.diagnostics.stall_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<f64> = rows.iter().map(|r| (r.n - 1) as f64).collect();
    let e1: Vec<f64> = rows.iter().map(|r| r.error_u1).collect();
    let e2: Vec<f64> = rows.iter().map(|r| r.error_u2).collect();
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceStudy {
        slope_u1: fit_log_slope(&cells, &e1),
        slope_u2: fit_log_slope(&cells, &e2),
        ratios_u1: ratios(&e1),
        ratios_u2: ratios(&e2),
        rows,
    })
}

impl ConvergenceStudy {
    /// `convergence.csv` with one row per grid and `convergence.json` with
    /// the fitted slopes.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("convergence.csv");
        let mut text = Vec::new();
        writeln!(text, "n,dx,error_u1,error_u2,iterations,stall_count").unwrap();
        for r in &self.rows {
            writeln!(
                text,
                "{},{:.16e},{:.16e},{:.16e},{},{}",
                r.n, r.dx, r.error_u1, r.error_u2, r.iterations, r.stall_count
            )
            .unwrap();
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("convergence.json");
        let json = serde_json::to_string_pretty(self).expect("study serialises") + "\n";
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}
