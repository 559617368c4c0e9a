//! The `breakdown-planner` command line.
//!
//! Exit status is 0 on success, 2 for invalid input or configuration, 3 when
//! an iteration fails to converge and 4 for I/O failures.
//! `BREAKDOWN_PLANNER_THREADS` caps the worker threads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::convergence::convergence_study;
use crate::error::{Error, Result};
use crate::field::{interp_value, read_field, write_field, ScalarField};
use crate::pdmp::{self, Event, EventKind, PdmpTrajectory, Planner, Sample, SimulationSettings};
use crate::policy::extract_policy;
use crate::scenario::ScenarioConfig;
use crate::solver::{self, EnvironmentSpec, Method, ValueSolution};
use crate::terrain::{ElevationRaster, TerrainFields, TerrainParams};
use crate::trace::{default_step, trace};

pub const THREADS_VAR: &str = "BREAKDOWN_PLANNER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "breakdown-planner", version, about = "Optimal planning for robots that can break down")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario and write value functions, policies and diagnostics.
    Solve(SolveArgs),
    /// Trace the optimal deterministic path from a start point.
    Trace(TraceArgs),
    /// Monte Carlo simulation of the breakdown process under the optimal policy.
    Simulate(SimulateArgs),
    /// Grid refinement study against the radial reference solution.
    Converge(ConvergeArgs),
    /// Derive speed and breakdown-rate fields from an elevation raster.
    Terrain(TerrainArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the solver method of the scenario.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct SolvedScenario {
    #[arg(long)]
    pub config: PathBuf,
    /// Reuse `u1.csv`, `u2.csv` and `R.csv` written by `solve` instead of solving again.
    #[arg(long)]
    pub values: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub scenario: SolvedScenario,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: [f64; 2],
    /// 1 heads for a target on the mode-1 value, 2 for a depot on the mode-2 value.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub mode: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: SolvedScenario,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: [f64; 2],
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Defaults to the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "51,101,201,401")]
    pub grids: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TerrainArgs {
    /// ESRI ASCII elevation grid.
    #[arg(long)]
    pub dem: PathBuf,
    /// JSON terrain parameters; omitted entries take their defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Planning region `xmin,xmax,ymin,ymax`; the whole raster by default.
    #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
    pub region: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [x, y] => {
            let x = x.parse::<f64>().map_err(|e| format!("bad x '{x}': {e}"))?;
            let y = y.parse::<f64>().map_err(|e| format!("bad y '{y}': {e}"))?;
            Ok([x, y])
        }
        _ => Err(format!("expected X,Y, got '{s}'")),
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "value-policy" => Ok(Method::ValuePolicy),
        "value-iteration" => Ok(Method::ValueIteration),
        _ => Err(format!("unknown method '{s}', expected value-policy or value-iteration")),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 4,
        Error::NonConvergence { .. } | Error::LinearSolve(_) | Error::TraceAborted { .. } => 3,
        Error::InvalidGrid(_)
        | Error::OutOfDomain { .. }
        | Error::Format { .. }
        | Error::InvalidProblem(_)
        | Error::Config(_) => 2,
    }
}

/// Size the global thread pool from `BREAKDOWN_PLANNER_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Terrain(a) => cmd_terrain(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serialises") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn solve_with(env: &EnvironmentSpec, method: Method) -> Result<ValueSolution> {
    match method {
        Method::ValuePolicy => solver::solve(env),
        Method::ValueIteration => solver::solve_value_iteration(env),
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let cfg = ScenarioConfig::load(&a.config)?;
    let env = cfg.environment()?;
    let sol = solve_with(&env, a.method.unwrap_or(cfg.method()))?;
    create_dir(&a.out)?;
    for (name, field) in [
        ("u1.csv", &sol.u1),
        ("u2.csv", &sol.u2),
        ("uR.csv", &sol.vehicle_cost),
        ("R.csv", &sol.repair_cost),
    ] {
        write_field(field, a.out.join(name))?;
    }
    extract_policy(&sol.u1).write_csv(a.out.join("policy1.csv"))?;
    extract_policy(&sol.u2).write_csv(a.out.join("policy2.csv"))?;
    write_json(&a.out.join("diagnostics.json"), &sol.diagnostics)?;
    let d = &sol.diagnostics;
    println!(
        "solved {}x{} grid: {} sweeps, {} policy evaluations, final change {:.3e}, {} stalls",
        env.grid.nx, env.grid.ny, d.iterations, d.policy_evaluations, d.final_change, d.stall_count
    );
    Ok(())
}

struct Values {
    env: EnvironmentSpec,
    u1: ScalarField,
    u2: ScalarField,
    repair_cost: ScalarField,
}

fn load_values(s: &SolvedScenario) -> Result<Values> {
    let cfg = ScenarioConfig::load(&s.config)?;
    let env = cfg.environment()?;
    let (u1, u2, repair_cost) = match &s.values {
        Some(dir) => {
            let fields = ["u1.csv", "u2.csv", "R.csv"]
                .iter()
                .map(|name| read_field(dir.join(name)))
                .collect::<Result<Vec<_>>>()?;
            if fields.iter().any(|f| !f.grid().matches(&env.grid)) {
                return Err(Error::Config(format!(
                    "fields in {} were computed on a different grid",
                    dir.display()
                )));
            }
            let [u1, u2, r]: [ScalarField; 3] = fields.try_into().expect("three fields");
            (u1, u2, r)
        }
        None => {
            let sol = solve_with(&env, cfg.method())?;
            (sol.u1, sol.u2, sol.repair_cost)
        }
    };
    Ok(Values {
        env,
        u1,
        u2,
        repair_cost,
    })
}

#[derive(Serialize)]
struct TraceStats {
    start: [f64; 2],
    mode: u8,
    /// Value function at the start.
    predicted: f64,
    travel_cost: f64,
    length: f64,
    duration: f64,
}

fn cmd_trace(a: &TraceArgs) -> Result<()> {
    let v = load_values(&a.scenario)?;
    let env = &v.env;
    let (u, speed, cost, sites) = match a.mode {
        1 => (&v.u1, &env.speed1, &env.cost1, env.targets.points(&env.grid)),
        _ => (&v.u2, &env.speed2, &env.cost2, env.depots.points(&env.grid)),
    };
    if sites.is_empty() {
        return Err(Error::Config("the scenario has no depots to trace toward".into()));
    }
    let path = trace(u, speed, &sites, a.start, default_step(&env.grid, speed))?;
    let travel_cost = path.travel_cost(cost, speed)?;
    let end = *path.points.last().expect("paths are never empty");
    let (kind, paid) = if a.mode == 1 {
        (EventKind::Arrival, 0.0)
    } else {
        let node = env.grid.nearest_node(end)?;
        let rd = env.depots.iter().find(|(n, _)| *n == node).map_or(0.0, |(_, rd)| rd);
        (EventKind::DepotRepair, rd)
    };
    let record = PdmpTrajectory {
        samples: path
            .points
            .iter()
            .zip(&path.times)
            .map(|(&position, &s)| Sample {
                s,
                position,
                mode: a.mode,
            })
            .collect(),
        events: vec![Event {
            s: path.duration(),
            kind,
            position: end,
            cost: paid,
        }],
        running_cost: travel_cost,
        total_cost: travel_cost + paid,
    };
    create_dir(&a.out)?;
    record.write_samples(a.out.join("trajectory.csv"))?;
    record.write_events(a.out.join("events.csv"))?;
    let stats = TraceStats {
        start: a.start,
        mode: a.mode,
        predicted: interp_value(u, a.start)?,
        travel_cost,
        length: path.length(),
        duration: path.duration(),
    };
    write_json(&a.out.join("stats.json"), &stats)?;
    println!(
        "traced {} points, length {:.6}, cost {:.6} (value at start {:.6})",
        path.points.len(),
        stats.length,
        stats.travel_cost,
        stats.predicted
    );
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg_seed = ScenarioConfig::load(&a.scenario.config)?.seed;
    let v = load_values(&a.scenario)?;
    let planner = Planner {
        env: &v.env,
        u1: &v.u1,
        u2: &v.u2,
        repair_cost: &v.repair_cost,
    };
    let settings = SimulationSettings::for_env(&v.env);
    let seed = a.seed.unwrap_or(cfg_seed);
    let (summary, runs) = pdmp::monte_carlo(&planner, &settings, a.start, a.runs, seed)?;
    create_dir(&a.out)?;
    runs[0].write_samples(a.out.join("trajectory.csv"))?;
    runs[0].write_events(a.out.join("events.csv"))?;
    let path = a.out.join("costs.csv");
    let mut text = Vec::new();
    writeln!(text, "run,total_cost,running_cost,duration").unwrap();
    for (k, r) in runs.iter().enumerate() {
        writeln!(text, "{k},{:.16e},{:.16e},{:.16e}", r.total_cost, r.running_cost, r.duration()).unwrap();
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_json(&a.out.join("stats.json"), &summary)?;
    println!(
        "{} runs: mean cost {:.6} +/- {:.6} (value at start {:.6})",
        summary.runs, summary.mean, summary.std_error, summary.predicted
    );
    Ok(())
}

fn cmd_converge(a: &ConvergeArgs) -> Result<()> {
    let cfg = ScenarioConfig::load(&a.config)?;
    let study = convergence_study(&cfg, &a.grids)?;
    study.write(&a.out)?;
    for r in &study.rows {
        println!("n {:>5}  error u1 {:.4e}  error u2 {:.4e}", r.n, r.error_u1, r.error_u2);
    }
    println!("slope u1 {:.3}, u2 {:.3}", study.slope_u1, study.slope_u2);
    Ok(())
}

fn cmd_terrain(a: &TerrainArgs) -> Result<()> {
    let params = match &a.params {
        Some(p) => TerrainParams::from_json_file(p)?,
        None => TerrainParams::default(),
    };
    let region = a.region.as_ref().map(|r| [r[0], r[1], r[2], r[3]]);
    let elevation = ElevationRaster::read(&a.dem)?.elevation(region)?;
    let fields = TerrainFields::derive(&elevation, &params)?;
    fields.write(&a.out, &params, Some(&a.dem))?;
    let g = elevation.grid();
    println!(
        "{}x{} terrain: mode-1 speed {:.3}..{:.3}, partial rate up to {:.4}",
        g.nx,
        g.ny,
        fields.speed1.min(),
        fields.speed1.max(),
        fields.partial_rate.max()
    );
    Ok(())
}
