//! Monte Carlo simulation of the breakdown process under the optimal feedback.
//!
//! Motion follows the descent direction of the value function of the current
//! mode. Breakdown clocks are sampled by comparing the hazard accumulated over
//! each step with an exponential threshold. `s` counts time spent moving only.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{interp_value, ScalarField};
use crate::solver::EnvironmentSpec;
use crate::trace::{captured, default_step, midpoint_step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PartialBreakdown,
    TotalBreakdown,
    DepotRepair,
    Arrival,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PartialBreakdown => "partial_breakdown",
            EventKind::TotalBreakdown => "total_breakdown",
            EventKind::DepotRepair => "depot_repair",
            EventKind::Arrival => "arrival",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub position: [f64; 2],
    pub mode: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub s: f64,
    pub kind: EventKind,
    pub position: [f64; 2],
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdmpTrajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Accumulated running cost.
    pub running_cost: f64,
    pub total_cost: f64,
}

impl PdmpTrajectory {
    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }

    /// Header `s,x,y,mode`.
    pub fn write_samples(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), "s,x,y,mode", self.samples.iter().map(|p| {
            format!("{:.16e},{:.16e},{:.16e},{}", p.s, p.position[0], p.position[1], p.mode)
        }))
    }

    /// Header `s,kind,x,y,cost`.
    pub fn write_events(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), "s,kind,x,y,cost", self.events.iter().map(|e| {
            format!(
                "{:.16e},{},{:.16e},{:.16e},{:.16e}",
                e.s,
                e.kind.as_str(),
                e.position[0],
                e.position[1],
                e.cost
            )
        }))
    }
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(out, "{header}")?;
        for r in rows {
            writeln!(out, "{r}")?;
        }
        out.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

/// Value functions and environment needed to drive the simulation.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'a> {
    pub env: &'a EnvironmentSpec,
    pub u1: &'a ScalarField,
    pub u2: &'a ScalarField,
    pub repair_cost: &'a ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    /// Time step in mode 1 and mode 2.
    pub steps: [f64; 2],
    pub capture_radius: f64,
    pub max_steps: usize,
}

impl SimulationSettings {
    pub fn for_env(env: &EnvironmentSpec) -> Self {
        let grid = &env.grid;
        let steps = [default_step(grid, &env.speed1), default_step(grid, &env.speed2)];
        let slowest = env.speed1.min().min(env.speed2.min());
        let per_leg = 10.0 * grid.diameter() / slowest / steps[0].min(steps[1]);
        Self {
            steps,
            capture_radius: grid.max_spacing(),
            max_steps: (50.0 * per_leg) as usize,
        }
    }
}

fn rng_for(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// One realisation from `start` in mode 1. Runs with the same `(seed, run)`
/// are bit-identical.
pub fn simulate(
    planner: &Planner,
    settings: &SimulationSettings,
    start: [f64; 2],
    seed: u64,
    run: u64,
) -> Result<PdmpTrajectory> {
    let env = planner.env;
    let grid = env.grid;
    if !grid.contains(start) {
        return Err(Error::OutOfDomain {
            x: start[0],
            y: start[1],
        });
    }
    let targets = env.targets.points(&grid);
    let depots = env.depots.points(&grid);
    let mut rng = rng_for(seed, run);
    let draw = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(Exp1) };

    let mut p = grid.clamp(start);
    let mut mode: u8 = 1;
    let mut s = 0.0;
    let mut running = 0.0;
    let mut event_cost = 0.0;
    let mut samples = vec![Sample {
        s,
        position: p,
        mode,
    }];
    let mut events = Vec::new();
    let mut hazard = [0.0; 3];
    let mut threshold = [draw(&mut rng), draw(&mut rng), draw(&mut rng)];
    const TOTAL1: usize = 0;
    const PARTIAL: usize = 1;
    const TOTAL2: usize = 2;

    for _ in 0..settings.max_steps {
        let (u, speed, cost, sites) = if mode == 1 {
            (planner.u1, &env.speed1, &env.cost1, &targets)
        } else {
            (planner.u2, &env.speed2, &env.cost2, &depots)
        };

        // inside the capture disc the last leg runs straight onto the node
        let snap = captured(sites, p, settings.capture_radius);
        let (q, dt) = match snap {
            Some(site) => {
                let gap = (site[0] - p[0]).hypot(site[1] - p[1]);
                (site, gap / interp_value(speed, p)?)
            }
            None => {
                let h = settings.steps[usize::from(mode - 1)];
                let Some(q) = midpoint_step(u, speed, p, h)? else {
                    return Err(Error::TraceAborted {
                        reason: format!("mode-{mode} value function is flat at ({:.6}, {:.6})", p[0], p[1]),
                        steps: samples.len(),
                        partial: samples.iter().map(|x| x.position).collect(),
                    });
                };
                (q, h)
            }
        };

        let moving_mode = mode;
        let mut reached = true;
        if dt > 0.0 {
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let clocks: &[usize] = if mode == 1 { &[TOTAL1, PARTIAL] } else { &[TOTAL2] };
            let mut increment = [0.0; 3];
            for &c in clocks {
                let rate = match c {
                    TOTAL1 => &env.total_rate1,
                    PARTIAL => &env.partial_rate,
                    _ => &env.total_rate2,
                };
                increment[c] = dt * interp_value(rate, mid)?;
            }
            // the first clock to ring cuts the step short
            let fired = clocks
                .iter()
                .filter(|&&c| hazard[c] + increment[c] >= threshold[c])
                .map(|&c| (c, (threshold[c] - hazard[c]) / increment[c]))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let theta = fired.map_or(1.0, |(_, t)| t.clamp(0.0, 1.0));
            reached = fired.is_none();
            for &c in clocks {
                hazard[c] += theta * increment[c];
            }
            running += theta * dt * interp_value(cost, mid)?;
            p = if reached {
                q
            } else {
                [p[0] + theta * (q[0] - p[0]), p[1] + theta * (q[1] - p[1])]
            };
            if theta > 0.0 {
                s += theta * dt;
                samples.push(Sample { s, position: p, mode });
            }

            match fired {
                Some((TOTAL1, _)) => {
                    let r = interp_value(planner.repair_cost, p)?;
                    event_cost += r;
                    events.push(Event {
                        s,
                        kind: EventKind::TotalBreakdown,
                        position: p,
                        cost: r,
                    });
                    hazard[TOTAL1] = 0.0;
                    threshold[TOTAL1] = draw(&mut rng);
                }
                Some((PARTIAL, _)) => {
                    events.push(Event {
                        s,
                        kind: EventKind::PartialBreakdown,
                        position: p,
                        cost: 0.0,
                    });
                    mode = 2;
                    hazard[TOTAL2] = 0.0;
                    threshold[TOTAL2] = draw(&mut rng);
                }
                Some(_) => {
                    let r = interp_value(planner.repair_cost, p)?;
                    event_cost += r;
                    events.push(Event {
                        s,
                        kind: EventKind::TotalBreakdown,
                        position: p,
                        cost: r,
                    });
                    mode = 1;
                    hazard = [0.0; 3];
                    threshold = [draw(&mut rng), draw(&mut rng), draw(&mut rng)];
                }
                None => {}
            }
        } else {
            p = q;
        }

        if snap.is_none() || !reached || mode != moving_mode {
            continue;
        }
        if mode == 1 {
            events.push(Event {
                s,
                kind: EventKind::Arrival,
                position: p,
                cost: 0.0,
            });
            return Ok(PdmpTrajectory {
                samples,
                events,
                running_cost: running,
                total_cost: running + event_cost,
            });
        }
        let node = grid.nearest_node(p)?;
        let rd = env.depots.iter().find(|(n, _)| *n == node).map_or(0.0, |(_, rd)| rd);
        event_cost += rd;
        events.push(Event {
            s,
            kind: EventKind::DepotRepair,
            position: p,
            cost: rd,
        });
        mode = 1;
        hazard = [0.0; 3];
        threshold = [draw(&mut rng), draw(&mut rng), draw(&mut rng)];
    }
    Err(Error::TraceAborted {
        reason: format!("simulation exceeded {} steps", settings.max_steps),
        steps: settings.max_steps,
        partial: samples.iter().map(|x| x.position).collect(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventCounts {
    pub partial_breakdown: usize,
    pub total_breakdown: usize,
    pub depot_repair: usize,
    pub arrival: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub mean_duration: f64,
    pub events: EventCounts,
    /// Mode-1 value at the start, for comparison.
    pub predicted: f64,
}

/// Aggregate `n_runs` independent realisations; run `k` uses stream `k` of `seed`.
pub fn monte_carlo(
    planner: &Planner,
    settings: &SimulationSettings,
    start: [f64; 2],
    n_runs: usize,
    seed: u64,
) -> Result<(MonteCarloSummary, Vec<PdmpTrajectory>)> {
    if n_runs == 0 {
        return Err(Error::InvalidProblem("at least one run is required".into()));
    }
    let runs: Vec<PdmpTrajectory> = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| simulate(planner, settings, start, seed, k))
        .collect::<Result<_>>()?;
    let n = n_runs as f64;
    let mean = runs.iter().map(|r| r.total_cost).sum::<f64>() / n;
    let var = if n_runs > 1 {
        runs.iter().map(|r| (r.total_cost - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut events = EventCounts::default();
    for r in &runs {
        events.partial_breakdown += r.count(EventKind::PartialBreakdown);
        events.total_breakdown += r.count(EventKind::TotalBreakdown);
        events.depot_repair += r.count(EventKind::DepotRepair);
        events.arrival += r.count(EventKind::Arrival);
    }
    let summary = MonteCarloSummary {
        runs: n_runs,
        seed,
        mean,
        std_dev: var.sqrt(),
        std_error: (var / n).sqrt(),
        mean_duration: runs.iter().map(|r| r.duration()).sum::<f64>() / n,
        events,
        predicted: interp_value(planner.u1, start)?,
    };
    Ok((summary, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid2D, NodeSet};
    use crate::solver;
    use crate::trace::trace;

    fn line_env(lambda1: f64) -> EnvironmentSpec {
        let grid = Grid2D::unit_square(41).unwrap();
        let mut env = EnvironmentSpec::new(
            grid,
            NodeSet::zeros(&grid, vec![(40, 20)]).unwrap(),
            NodeSet::zeros(&grid, vec![(40, 20)]).unwrap(),
        );
        env.total_rate1 = ScalarField::constant(grid, lambda1);
        env
    }

    #[test]
    fn no_breakdowns_reproduces_trace() {
        let env = line_env(0.0);
        let sol = solver::solve(&env).unwrap();
        let planner = Planner {
            env: &env,
            u1: &sol.u1,
            u2: &sol.u2,
            repair_cost: &sol.repair_cost,
        };
        let settings = SimulationSettings::for_env(&env);
        let start = [0.2, 0.5];
        let run = simulate(&planner, &settings, start, 1, 0).unwrap();
        let path = trace(&sol.u1, &env.speed1, &env.targets.points(&env.grid), start, settings.steps[0]).unwrap();
        let pts: Vec<[f64; 2]> = run.samples.iter().map(|s| s.position).collect();
        assert_eq!(pts, path.points);
        assert!((run.total_cost - path.duration()).abs() < 1e-12);
        assert!((run.total_cost - 0.8).abs() <= 2.0 * env.grid.max_spacing());
        assert_eq!(run.events.len(), 1);
    }

    #[test]
    fn costs_are_self_consistent() {
        let mut env = line_env(2.0);
        env.partial_rate = ScalarField::constant(env.grid, 1.5);
        env.total_rate2 = ScalarField::constant(env.grid, 0.7);
        env.speed2 = ScalarField::constant(env.grid, 0.4);
        let sol = solver::solve(&env).unwrap();
        let planner = Planner {
            env: &env,
            u1: &sol.u1,
            u2: &sol.u2,
            repair_cost: &sol.repair_cost,
        };
        let settings = SimulationSettings::for_env(&env);
        for k in 0..20 {
            let r = simulate(&planner, &settings, [0.1, 0.3], 9, k).unwrap();
            let paid: f64 = r.events.iter().map(|e| e.cost).sum();
            assert!((r.total_cost - r.running_cost - paid).abs() <= 1e-9);
            assert!(r.samples.windows(2).all(|w| w[1].s > w[0].s));
            assert!(r.samples.iter().all(|x| x.mode == 1 || x.mode == 2));
            assert_eq!(r.events.last().unwrap().kind, EventKind::Arrival);
        }
    }

    #[test]
    fn poisson_count_of_total_breakdowns() {
        let env = line_env(2.0);
        let sol = solver::solve(&env).unwrap();
        let planner = Planner {
            env: &env,
            u1: &sol.u1,
            u2: &sol.u2,
            repair_cost: &sol.repair_cost,
        };
        let settings = SimulationSettings::for_env(&env);
        let (summary, runs) = monte_carlo(&planner, &settings, [0.0, 0.5], 10_000, 42).unwrap();
        let duration = runs[0].duration();
        let counts: Vec<f64> = runs.iter().map(|r| r.count(EventKind::TotalBreakdown) as f64).collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let se = (var / counts.len() as f64).sqrt();
        assert!((mean - 2.0 * duration).abs() <= 3.0 * se, "mean {mean} expected {}", 2.0 * duration);
        assert_eq!(summary.events.total_breakdown as f64, counts.iter().sum::<f64>());
    }

    #[test]
    fn seeding_contract() {
        let env = line_env(1.0);
        let sol = solver::solve(&env).unwrap();
        let planner = Planner {
            env: &env,
            u1: &sol.u1,
            u2: &sol.u2,
            repair_cost: &sol.repair_cost,
        };
        let settings = SimulationSettings::for_env(&env);
        let (one, runs1) = monte_carlo(&planner, &settings, [0.3, 0.4], 1, 5).unwrap();
        assert_eq!(one.mean, runs1[0].total_cost);
        let (_, a) = monte_carlo(&planner, &settings, [0.3, 0.4], 50, 5).unwrap();
        let (_, b) = monte_carlo(&planner, &settings, [0.3, 0.4], 100, 5).unwrap();
        assert_eq!(a[..], b[..50]);
        let (_, c) = monte_carlo(&planner, &settings, [0.3, 0.4], 50, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn standard_error_shrinks_like_root_n() {
        let env = line_env(3.0);
        let sol = solver::solve(&env).unwrap();
        let planner = Planner {
            env: &env,
            u1: &sol.u1,
            u2: &sol.u2,
            repair_cost: &sol.repair_cost,
        };
        let settings = SimulationSettings::for_env(&env);
        let (small, _) = monte_carlo(&planner, &settings, [0.2, 0.5], 1000, 11).unwrap();
        let (large, _) = monte_carlo(&planner, &settings, [0.2, 0.5], 4000, 11).unwrap();
        let ratio = small.std_error / large.std_error;
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }
}
