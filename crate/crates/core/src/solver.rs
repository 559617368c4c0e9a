//! Value-policy iteration for the two coupled mode equations.
//!
//! Mode 1 (fully functional) and mode 2 (damaged) each satisfy a causal
//! equation once the other mode is frozen:
//!
//! ```text
//! f1 |grad u1| = K1 + lambda1 R + phi (u2 - u1),      u1 = 0          on targets
//! f2 |grad u2| = K2 + lambda2 (R + u1 - u2),          u2 = R_D + u1   on depots
//! ```
//!
//! A sweep solves mode 2 and then mode 1 with the coupled marcher. Sweeps are
//! repeated until the change in `u1` drops below `rho` times the last
//! policy-evaluation gap, then the current greedy policy is evaluated exactly
//! with a sparse linear solve and its values replace the iterates.

use serde::{Deserialize, Serialize};

use crate::coupled::{self, CoupledProblem};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_policy;
use crate::field::{Grid2D, NodeSet, ScalarField};
use crate::pessimistic::{self, WorstCaseParams};
use crate::policy::extract_policy;
use crate::repair::{compute_repair, RepairField, RepairModel};

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Stop once a sweep changes `u1` by at most this much.
    pub tol: f64,
    /// Evaluate the policy once the sweep change falls below `rho` times the last gap.
    pub rho: f64,
    /// Maximum number of policy evaluations.
    pub max_outer: usize,
    /// Maximum number of sweeps overall.
    pub max_sweeps: usize,
}

impl SolverSettings {
    pub fn for_grid(grid: &Grid2D) -> Self {
        Self {
            tol: 0.5 * (grid.dx + grid.dy),
            rho: 0.5,
            max_outer: 100,
            max_sweeps: 5000,
        }
    }
}

/// Every coefficient of the two-mode problem, already broadcast to fields.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    pub grid: Grid2D,
    pub speed1: ScalarField,
    pub speed2: ScalarField,
    pub cost1: ScalarField,
    pub cost2: ScalarField,
    /// Total breakdown rate in mode 1.
    pub total_rate1: ScalarField,
    /// Total breakdown rate in mode 2.
    pub total_rate2: ScalarField,
    /// Partial breakdown rate (mode 1 to mode 2).
    pub partial_rate: ScalarField,
    pub targets: NodeSet,
    /// Depot nodes carrying their repair cost `R_D`.
    pub depots: NodeSet,
    pub repair_speed: ScalarField,
    pub repair_running_cost: ScalarField,
    /// In-place repair cost `R_F`.
    pub location_cost: ScalarField,
    pub settings: SolverSettings,
}

impl EnvironmentSpec {
    /// Unit speeds and costs, no breakdowns, `R_F = 1`, default settings.
    pub fn new(grid: Grid2D, targets: NodeSet, depots: NodeSet) -> Self {
        let one = ScalarField::constant(grid, 1.0);
        let zero = ScalarField::constant(grid, 0.0);
        Self {
            grid,
            speed1: one.clone(),
            speed2: one.clone(),
            cost1: one.clone(),
            cost2: one.clone(),
            total_rate1: zero.clone(),
            total_rate2: zero.clone(),
            partial_rate: zero,
            targets,
            depots,
            repair_speed: one.clone(),
            repair_running_cost: one.clone(),
            location_cost: one,
            settings: SolverSettings::for_grid(&grid),
        }
    }

    fn fields(&self) -> [(&'static str, &ScalarField); 10] {
        [
            ("f1", &self.speed1),
            ("f2", &self.speed2),
            ("K1", &self.cost1),
            ("K2", &self.cost2),
            ("lambda1", &self.total_rate1),
            ("lambda2", &self.total_rate2),
            ("phi", &self.partial_rate),
            ("f_R", &self.repair_speed),
            ("K_R", &self.repair_running_cost),
            ("R_F", &self.location_cost),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in self.fields() {
            if !f.grid().matches(&self.grid) {
                return Err(Error::Config(format!("field {name} is defined on a different grid")));
            }
            if !f.all_finite() {
                return Err(Error::Config(format!("field {name} has non-finite values")));
            }
        }
        for (name, f) in [
            ("f1", &self.speed1),
            ("f2", &self.speed2),
            ("K1", &self.cost1),
            ("K2", &self.cost2),
            ("f_R", &self.repair_speed),
            ("K_R", &self.repair_running_cost),
        ] {
            if f.min() <= 0.0 {
                return Err(Error::Config(format!("{name} must be strictly positive (minimum {})", f.min())));
            }
        }
        for (name, f) in [
            ("lambda1", &self.total_rate1),
            ("lambda2", &self.total_rate2),
            ("phi", &self.partial_rate),
            ("R_F", &self.location_cost),
        ] {
            if f.min() < 0.0 {
                return Err(Error::Config(format!("{name} must be nonnegative (minimum {})", f.min())));
            }
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        if self.depots.values().iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("depot repair costs R_D must be nonnegative".into()));
        }
        let rates = [&self.total_rate1, &self.total_rate2, &self.partial_rate];
        if self.depots.is_empty() && rates.iter().any(|f| f.max() > 0.0) {
            return Err(Error::Config(
                "breakdown rates are nonzero but no repair depot is given".into(),
            ));
        }
        let s = &self.settings;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", s.tol)));
        }
        if !(s.rho > 0.0 && s.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", s.rho)));
        }
        if s.max_outer == 0 || s.max_sweeps == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn has_depots(&self) -> bool {
        !self.depots.is_empty()
    }

    /// Repair vehicle cost `u_R` and total repair cost `R`. Without depots there
    /// is no vehicle, `u_R = 0` and `R = R_F`.
    pub fn repair_fields(&self) -> Result<RepairField> {
        if !self.has_depots() {
            return Ok(RepairField {
                vehicle_cost: ScalarField::constant(self.grid, 0.0),
                repair_cost: self.location_cost.clone(),
            });
        }
        compute_repair(&RepairModel {
            speed: self.repair_speed.clone(),
            running_cost: self.repair_running_cost.clone(),
            depots: self.depots.clone(),
            location_cost: self.location_cost.clone(),
        })
    }
}

/// Per-node coefficients of the two mode equations in marcher form.
#[derive(Debug, Clone)]
struct Coefficients {
    base1: ScalarField,
    beta1: ScalarField,
    base2: ScalarField,
    beta2: ScalarField,
    repair: ScalarField,
    target_boundary: NodeSet,
}

impl Coefficients {
    fn new(env: &EnvironmentSpec, repair: &ScalarField) -> Result<Self> {
        let n = env.grid.len();
        let mut base1 = Vec::with_capacity(n);
        let mut beta1 = Vec::with_capacity(n);
        let mut base2 = Vec::with_capacity(n);
        let mut beta2 = Vec::with_capacity(n);
        for k in 0..n {
            let (f1, f2) = (env.speed1.at(k), env.speed2.at(k));
            base1.push((env.cost1.at(k) + env.total_rate1.at(k) * repair.at(k)) / f1);
            beta1.push(env.partial_rate.at(k) / f1);
            base2.push(env.cost2.at(k) / f2);
            beta2.push(env.total_rate2.at(k) / f2);
        }
        let g = env.grid;
        Ok(Self {
            base1: ScalarField::new(g, base1)?,
            beta1: ScalarField::new(g, beta1)?,
            base2: ScalarField::new(g, base2)?,
            beta2: ScalarField::new(g, beta2)?,
            repair: repair.clone(),
            target_boundary: NodeSet::zeros(&g, env.targets.nodes().to_vec())?,
        })
    }

    fn mode1(&self, u2: &ScalarField) -> Result<CoupledProblem> {
        CoupledProblem::new(
            self.base1.clone(),
            self.beta1.clone(),
            u2.clone(),
            self.target_boundary.clone(),
        )
    }

    fn mode2(&self, env: &EnvironmentSpec, u1: &ScalarField) -> Result<CoupledProblem> {
        let boundary = depot_boundary(env, u1);
        let v = u1.zip_with(&self.repair, |a, r| a + r);
        CoupledProblem::new(self.base2.clone(), self.beta2.clone(), v, boundary)
    }
}

fn depot_boundary(env: &EnvironmentSpec, u1: &ScalarField) -> NodeSet {
    env.depots.with_values(
        env.depots
            .iter()
            .map(|((i, j), rd)| rd + u1.get(i, j))
            .collect(),
    )
}

/// Outcome of one causal sweep over both modes.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub u1: ScalarField,
    pub u2: ScalarField,
    /// Max-norm change in `u1`.
    pub change: f64,
    pub stalls: usize,
}

fn sweep_with(env: &EnvironmentSpec, c: &Coefficients, u1: &ScalarField, u2: &ScalarField) -> Result<Sweep> {
    let mut stalls = 0;
    let u2_new = if env.has_depots() {
        let s = coupled::solve_mode(&c.mode2(env, u1)?)?;
        stalls += s.stall_count();
        s.values
    } else {
        u2.clone()
    };
    let s1 = coupled::solve_mode(&c.mode1(&u2_new)?)?;
    stalls += s1.stall_count();
    let u1_new = s1.values;
    let u2_new = if env.has_depots() { u2_new } else { u1_new.clone() };
    Ok(Sweep {
        change: u1_new.max_abs_diff(u1),
        u1: u1_new,
        u2: u2_new,
        stalls,
    })
}

/// Solve mode 2 with `u1` frozen, then mode 1 with the new `u2`.
pub fn value_sweep(
    env: &EnvironmentSpec,
    repair_cost: &ScalarField,
    u1: &ScalarField,
    u2: &ScalarField,
) -> Result<Sweep> {
    sweep_with(env, &Coefficients::new(env, repair_cost)?, u1, u2)
}

/// Worst-case 1D parameters for every depot. The depot-to-target distance is
/// measured in the L1 norm, which bounds the grid solution's travel distance.
pub fn worst_case_params(env: &EnvironmentSpec, repair_cost: &ScalarField) -> Vec<WorstCaseParams> {
    let n = env.grid.len();
    let max_over = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(f64::NEG_INFINITY, f64::max);
    let cost1 = max_over(&|k| env.cost1.at(k) + env.total_rate1.at(k) * repair_cost.at(k));
    let cost2 = max_over(&|k| env.cost2.at(k) + env.total_rate2.at(k) * repair_cost.at(k));
    let rd_max = env.depots.values().iter().copied().fold(0.0, f64::max);
    let targets = env.targets.points(&env.grid);
    env.depots
        .points(&env.grid)
        .into_iter()
        .map(|p| WorstCaseParams {
            speed1: env.speed1.min(),
            speed2: env.speed2.min(),
            cost1,
            cost2,
            partial_rate: env.partial_rate.max(),
            depot_cost: rd_max,
            distance: targets
                .iter()
                .map(|t| (t[0] - p[0]).abs() + (t[1] - p[1]).abs())
                .fold(f64::INFINITY, f64::min),
        })
        .collect()
}

/// Pessimistic starting point: `u2` from the worst-case depot values, then
/// `u1` from one mode-1 solve against that `u2`.
pub fn initial_values(env: &EnvironmentSpec, repair_cost: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let c = Coefficients::new(env, repair_cost)?;
    initial_with(env, &c)
}

fn initial_with(env: &EnvironmentSpec, c: &Coefficients) -> Result<(ScalarField, ScalarField)> {
    if !env.has_depots() {
        let u1 = coupled::solve_mode(&c.mode1(&ScalarField::constant(env.grid, 0.0))?)?.values;
        return Ok((u1.clone(), u1));
    }
    let overestimates = worst_case_params(env, &c.repair)
        .iter()
        .map(pessimistic::depot_overestimate)
        .collect::<Result<Vec<_>>>()?;
    let u2 = pessimistic::initial_u2(
        &env.speed2,
        &env.cost2,
        &env.total_rate2,
        &c.repair,
        &env.depots,
        &overestimates,
    )?;
    let u1 = coupled::solve_mode(&c.mode1(&u2)?)?.values;
    Ok((u1, u2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    ValuePolicy,
    ValueIteration,
}

/// Iteration record written next to the solved fields.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: Method,
    pub converged: bool,
    /// Number of causal sweeps (each solves both modes).
    pub iterations: usize,
    pub policy_evaluations: usize,
    pub final_change: f64,
    pub change_history: Vec<f64>,
    /// Max-norm gap between `u1` and the evaluated policy value, per evaluation.
    pub policy_gap_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    /// Clamped updates summed over all sweeps.
    pub stall_count: usize,
    pub residual_mode1: f64,
    pub residual_mode2: f64,
    pub settings: SolverSettings,
}

#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub vehicle_cost: ScalarField,
    pub repair_cost: ScalarField,
    pub diagnostics: Diagnostics,
}

/// Value-policy iteration.
pub fn solve(env: &EnvironmentSpec) -> Result<ValueSolution> {
    run(env, Method::ValuePolicy)
}

/// Plain value iteration from the same start, for comparison.
pub fn solve_value_iteration(env: &EnvironmentSpec) -> Result<ValueSolution> {
    run(env, Method::ValueIteration)
}

fn run(env: &EnvironmentSpec, method: Method) -> Result<ValueSolution> {
    env.validate()?;
    let repair = env.repair_fields()?;
    let c = Coefficients::new(env, &repair.repair_cost)?;
    let s = env.settings;
    let hybrid = method == Method::ValuePolicy && env.has_depots();

    let (mut u1, mut u2) = initial_with(env, &c)?;
    let mut d = s.tol + 1.0;
    let mut delta = d;
    let mut changes = Vec::new();
    let mut gaps = Vec::new();
    let mut linear = Vec::new();
    let mut stalls = 0;

    let give_up = |changes: &Vec<f64>, evaluations: usize, d: f64| Error::NonConvergence {
        outer: evaluations,
        last_change: d,
        change_history: changes.clone(),
    };

    loop {
        while d > s.tol && (!hybrid || d > s.rho * delta) {
            if changes.len() >= s.max_sweeps {
                return Err(give_up(&changes, gaps.len(), d));
            }
            let sweep = sweep_with(env, &c, &u1, &u2)?;
            d = sweep.change;
            stalls += sweep.stalls;
            changes.push(d);
            u1 = sweep.u1;
            u2 = sweep.u2;
        }
        if d <= s.tol {
            break;
        }
        if gaps.len() >= s.max_outer {
            return Err(give_up(&changes, gaps.len(), d));
        }
        let p1 = extract_policy(&u1);
        let p2 = extract_policy(&u2);
        let r = evaluate_policy(&p1, &p2, env, &repair.repair_cost, [&u1, &u2])?;
        delta = r.r1.max_abs_diff(&u1);
        gaps.push(delta);
        linear.push(r.iterations);
        u1 = r.r1;
        u2 = r.r2;
    }

    // the last sweep used the previous u1 on the depots
    for ((i, j), rd) in env.depots.iter() {
        let k = env.grid.index(i, j);
        u2.values_mut()[k] = rd + u1.at(k);
    }

    let (res1, res2) = residuals_with(env, &c, &u1, &u2)?;
    Ok(ValueSolution {
        diagnostics: Diagnostics {
            method,
            converged: true,
            iterations: changes.len(),
            policy_evaluations: gaps.len(),
            final_change: d,
            change_history: changes,
            policy_gap_history: gaps,
            linear_iterations: linear,
            stall_count: stalls,
            residual_mode1: res1.max(),
            residual_mode2: res2.max(),
            settings: s,
        },
        u1,
        u2,
        vehicle_cost: repair.vehicle_cost,
        repair_cost: repair.repair_cost,
    })
}

fn residuals_with(
    env: &EnvironmentSpec,
    c: &Coefficients,
    u1: &ScalarField,
    u2: &ScalarField,
) -> Result<(ScalarField, ScalarField)> {
    let r1 = ScalarField::new(env.grid, coupled::node_residuals(&c.mode1(u2)?, u1))?;
    let r2 = if env.has_depots() {
        ScalarField::new(env.grid, coupled::node_residuals(&c.mode2(env, u1)?, u2))?
    } else {
        u2.zip_with(u1, |a, b| (a - b).abs())
    };
    Ok((r1, r2))
}

/// Per-node residuals of the two discretised mode equations, in value units.
/// Boundary nodes report zero; their identities are checked separately.
pub fn equation_residuals(
    env: &EnvironmentSpec,
    repair_cost: &ScalarField,
    u1: &ScalarField,
    u2: &ScalarField,
) -> Result<(ScalarField, ScalarField)> {
    residuals_with(env, &Coefficients::new(env, repair_cost)?, u1, u2)
}
