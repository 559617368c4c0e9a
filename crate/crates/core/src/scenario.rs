//! JSON scenario files.
//!
//! A scenario names a grid, the problem coefficients, targets and depots as
//! coordinates, and solver settings. Each coefficient is a number, a path to a
//! field CSV (relative to the scenario file) or a sum of Gaussian bumps, and is
//! broadcast to a field when the environment is built.
//!
//! ```text
//! {
//!   "grid": { "nx": 101, "ny": 101, "bounds": [0, 1, 0, 1] },
//!   "coefficients": { "f2": 0.2, "phi": "phi.csv" },
//!   "targets": [[0.9, 0.5]],
//!   "depots": [[0.9, 0.5]]
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{read_field, Grid2D, NodeSet, ScalarField};
use crate::radial::RadialParams;
use crate::solver::{EnvironmentSpec, Method, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    /// `[xmin, xmax, ymin, ymax]`.
    pub bounds: [f64; 4],
}

impl GridBlock {
    pub fn grid(&self) -> Result<Grid2D> {
        let [x0, x1, y0, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Config(format!("grid bounds {:?} are empty", self.bounds)));
        }
        Grid2D::spanning(self.nx, self.ny, x0, x1, y0, y1).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    /// Standard deviation.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpField {
    #[serde(default)]
    pub base: f64,
    pub gaussian_bumps: Vec<Bump>,
}

impl BumpField {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.base
            + self
                .gaussian_bumps
                .iter()
                .map(|b| {
                    let r2 = (x - b.center[0]).powi(2) + (y - b.center[1]).powi(2);
                    b.amplitude * (-r2 / (2.0 * b.width * b.width)).exp()
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    File(PathBuf),
    Bumps(BumpField),
}

impl Coefficient {
    pub fn constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(v) => Some(*v),
            _ => None,
        }
    }

    fn field(&self, name: &str, grid: Grid2D, base_dir: &Path) -> Result<ScalarField> {
        match self {
            Coefficient::Constant(v) => Ok(ScalarField::constant(grid, *v)),
            Coefficient::Bumps(b) => {
                if b.gaussian_bumps.iter().any(|b| !(b.width > 0.0)) {
                    return Err(Error::Config(format!("{name}: bump widths must be positive")));
                }
                Ok(ScalarField::from_fn(grid, |x, y| b.value(x, y)))
            }
            Coefficient::File(p) => {
                let field = read_field(base_dir.join(p))?;
                if !field.grid().matches(&grid) {
                    let g = field.grid();
                    return Err(Error::Config(format!(
                        "{name}: {} is a {}x{} field that does not match the scenario grid {}x{}",
                        p.display(),
                        g.nx,
                        g.ny,
                        grid.nx,
                        grid.ny
                    )));
                }
                Ok(field)
            }
        }
    }
}

fn one() -> Coefficient {
    Coefficient::Constant(1.0)
}

fn zero() -> Coefficient {
    Coefficient::Constant(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default = "one")]
    pub f1: Coefficient,
    #[serde(default = "one")]
    pub f2: Coefficient,
    #[serde(default = "one")]
    pub f_r: Coefficient,
    #[serde(default = "one")]
    pub k1: Coefficient,
    #[serde(default = "one")]
    pub k2: Coefficient,
    #[serde(default = "one")]
    pub k_r: Coefficient,
    #[serde(default = "zero")]
    pub lambda1: Coefficient,
    #[serde(default = "zero")]
    pub lambda2: Coefficient,
    #[serde(default = "zero")]
    pub phi: Coefficient,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            f1: one(),
            f2: one(),
            f_r: one(),
            k1: one(),
            k2: one(),
            k_r: one(),
            lambda1: zero(),
            lambda2: zero(),
            phi: zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: Option<f64>,
    pub rho: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_sweeps: Option<usize>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub grid: GridBlock,
    #[serde(default)]
    pub coefficients: Coefficients,
    pub targets: Vec<[f64; 2]>,
    #[serde(default)]
    pub depots: Vec<[f64; 2]>,
    /// In-place repair cost.
    #[serde(default = "one")]
    pub r_f: Coefficient,
    /// Cost of a depot repair, the same at every depot.
    #[serde(default)]
    pub r_d: f64,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub seed: u64,
    /// Directory that relative field paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            Error::Format { line, message, .. } => Error::format(path, line, message),
            other => other,
        })
    }

    /// Parse JSON text; relative field paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::format("<scenario>", e.line(), e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.grid.grid()?;
        if cfg.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid2D> {
        self.grid.grid()
    }

    /// The scenario on its own grid, validated.
    pub fn environment(&self) -> Result<EnvironmentSpec> {
        self.environment_on(self.grid()?)
    }

    /// The scenario resampled onto `grid`. Field files must match `grid`.
    pub fn environment_on(&self, grid: Grid2D) -> Result<EnvironmentSpec> {
        let c = &self.coefficients;
        let field = |name: &str, coef: &Coefficient| coef.field(name, grid, &self.base_dir);
        let snap = |what: &str, points: &[[f64; 2]], value: f64| {
            NodeSet::from_points(&grid, points, vec![value; points.len()])
                .map_err(|e| Error::Config(format!("{what}: {e}")))
        };
        if !(self.r_d >= 0.0 && self.r_d.is_finite()) {
            return Err(Error::Config(format!("r_d must be nonnegative, got {}", self.r_d)));
        }
        let mut env = EnvironmentSpec::new(grid, snap("targets", &self.targets, 0.0)?, snap("depots", &self.depots, self.r_d)?);
        env.speed1 = field("f1", &c.f1)?;
        env.speed2 = field("f2", &c.f2)?;
        env.repair_speed = field("f_r", &c.f_r)?;
        env.cost1 = field("k1", &c.k1)?;
        env.cost2 = field("k2", &c.k2)?;
        env.repair_running_cost = field("k_r", &c.k_r)?;
        env.total_rate1 = field("lambda1", &c.lambda1)?;
        env.total_rate2 = field("lambda2", &c.lambda2)?;
        env.partial_rate = field("phi", &c.phi)?;
        env.location_cost = field("r_f", &self.r_f)?;

        let defaults = SolverSettings::for_grid(&grid);
        let s = &self.solver;
        env.settings = SolverSettings {
            tol: s.tol.unwrap_or(defaults.tol),
            rho: s.rho.unwrap_or(defaults.rho),
            max_outer: s.max_outer.unwrap_or(defaults.max_outer),
            max_sweeps: s.max_sweeps.unwrap_or(defaults.max_sweeps),
        };
        env.validate()?;
        Ok(env)
    }

    pub fn method(&self) -> Method {
        self.solver.method
    }

    /// Parameters of the radially symmetric reference, available when every
    /// coefficient is constant and a single target doubles as the only depot.
    pub fn radial_params(&self) -> Result<RadialParams> {
        let c = &self.coefficients;
        let get = |name: &str, coef: &Coefficient| {
            coef.constant()
                .ok_or_else(|| Error::Config(format!("{name} must be a constant for a convergence study")))
        };
        let [target] = self.targets[..] else {
            return Err(Error::Config("a convergence study needs exactly one target".into()));
        };
        if self.depots[..] != [target] {
            return Err(Error::Config("a convergence study needs a single depot at the target".into()));
        }
        let [x0, x1, y0, y1] = self.grid.bounds;
        let r_max = [[x0, y0], [x0, y1], [x1, y0], [x1, y1]]
            .iter()
            .map(|p| (p[0] - target[0]).hypot(p[1] - target[1]))
            .fold(0.0, f64::max);
        let params = RadialParams {
            f1: get("f1", &c.f1)?,
            f2: get("f2", &c.f2)?,
            f_r: get("f_r", &c.f_r)?,
            k1: get("k1", &c.k1)?,
            k2: get("k2", &c.k2)?,
            k_r: get("k_r", &c.k_r)?,
            lambda1: get("lambda1", &c.lambda1)?,
            lambda2: get("lambda2", &c.lambda2)?,
            phi: get("phi", &c.phi)?,
            r_f: get("r_f", &self.r_f)?,
            r_d: self.r_d,
            r_max,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(params)
    }
}
