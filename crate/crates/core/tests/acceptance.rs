//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! binary exits nonzero if any check fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use breakdown_planner::convergence::convergence_study;
use breakdown_planner::coupled::{self, CoupledProblem};
use breakdown_planner::eikonal::{self, EikonalProblem};
use breakdown_planner::evaluation::evaluate_policy;
use breakdown_planner::field::{interp_value, Grid2D, NodeSet, ScalarField};
use breakdown_planner::pdmp::{monte_carlo, Planner, SimulationSettings};
use breakdown_planner::policy::extract_policy;
use breakdown_planner::scenario::ScenarioConfig;
use breakdown_planner::solver::{self, equation_residuals, initial_values, value_sweep, EnvironmentSpec, ValueSolution};
use breakdown_planner::terrain::{breakdown_rate, speed_from_slope, TerrainParams};
use breakdown_planner::trace::{default_step, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCENARIOS: [&str; 7] = [
    "example1",
    "example2",
    "example2_total",
    "example3_phi0",
    "example3_phi3",
    "example3_phi5",
    "example4/example4",
];

struct Solved {
    config: ScenarioConfig,
    env: EnvironmentSpec,
    sol: ValueSolution,
}

struct Bundle(BTreeMap<&'static str, Solved>);

impl Bundle {
    fn load() -> Self {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
        let map = SCENARIOS
            .iter()
            .map(|&name| {
                let config = ScenarioConfig::load(format!("{dir}/{name}.json")).expect(name);
                let env = config.environment().expect(name);
                let sol = solver::solve(&env).expect(name);
                (name, Solved { config, env, sol })
            })
            .collect();
        Bundle(map)
    }

    fn get(&self, name: &str) -> &Solved {
        &self.0[name]
    }
}

type Check = fn(&Bundle) -> (bool, String);

fn main() {
    let clock = Instant::now();
    let bundle = Bundle::load();
    println!("solved {} bundled scenarios in {:.1?}", SCENARIOS.len(), clock.elapsed());

    let checks: [(&str, Check); 9] = [
        ("first-order convergence to the radial solution", convergence_order),
        ("zero breakdown rates reduce to the eikonal solver", reduction_to_eikonal),
        ("known depot boundary allows a sequential solve", sequential_solve),
        ("fixed-point residual on every bundled scenario", fixed_point_residual),
        ("iterates from the pessimistic start only decrease", monotone_iterates),
        ("policy evaluation consistency and hybrid speed-up", policy_consistency),
        ("Monte Carlo mean agrees with the value function", monte_carlo_agreement),
        ("terrain speed and rate formulas", terrain_formulas),
        ("depot trade-off changes paths and raises values", depot_tradeoff),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check(&bundle);
        failed += usize::from(!pass);
        println!(
            "[{}/9] {:<52} {}  {} ({:.1?})",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            detail,
            start.elapsed()
        );
    }
    println!("{} of 9 acceptance checks passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v > lo && v < hi
}

fn convergence_order(b: &Bundle) -> (bool, String) {
    let start = Instant::now();
    let study = convergence_study(&b.get("example1").config, &[51, 101, 201, 401]).unwrap();
    let took = start.elapsed();
    let slopes = [study.slope_u1, study.slope_u2];
    let ratios: Vec<f64> = study.ratios_u1.iter().chain(&study.ratios_u2).copied().collect();
    let pass = slopes.iter().all(|s| within(*s, -1.3, -0.7))
        && ratios.iter().all(|r| within(*r, 1.5, 2.8))
        && took < Duration::from_secs(300);
    let errors: Vec<String> = study.rows.iter().map(|r| format!("{:.3e}", r.error_u1)).collect();
    (
        pass,
        format!(
            "slopes u1 {:.3} u2 {:.3}, ratios {:.2}..{:.2}, u1 errors [{}]",
            slopes[0],
            slopes[1],
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
            errors.join(", ")
        ),
    )
}

fn random_speed(grid: Grid2D, rng: &mut ChaCha8Rng) -> ScalarField {
    let modes: Vec<[f64; 4]> = (0..6)
        .map(|_| [rng.random_range(1.0..9.0), rng.random_range(1.0..9.0), rng.random_range(0.0..6.3), rng.random_range(0.05..0.25)])
        .collect();
    ScalarField::from_fn(grid, |x, y| {
        0.6 + modes.iter().map(|m| m[3] * (1.0 + (m[0] * x + m[1] * y + m[2]).sin())).sum::<f64>()
    })
}

fn reduction_to_eikonal(_: &Bundle) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = Grid2D::unit_square(201).unwrap();
    let speed = random_speed(grid, &mut rng);
    let cost = ScalarField::from_fn(grid, |x, y| 1.0 + 0.5 * (3.0 * x * y).cos());
    let target = (rng.random_range(0..201), rng.random_range(0..201));
    let mut env = EnvironmentSpec::new(grid, NodeSet::zeros(&grid, vec![target]).unwrap(), NodeSet::default());
    env.speed1 = speed.clone();
    env.cost1 = cost.clone();
    let sol = solver::solve(&env).unwrap();
    let plain = eikonal::solve(&EikonalProblem::new(speed, cost, NodeSet::zeros(&grid, vec![target]).unwrap()).unwrap()).unwrap();
    let diff = sol.u1.max_abs_diff(&plain);
    (diff <= 1e-10, format!("max |u1 - eikonal| = {diff:.2e}"))
}

fn sequential_solve(_: &Bundle) -> (bool, String) {
    let grid = Grid2D::unit_square(201).unwrap();
    let site = (150, 120);
    let nodes = NodeSet::zeros(&grid, vec![site]).unwrap();
    let mut env = EnvironmentSpec::new(grid, nodes.clone(), nodes.clone());
    env.speed1 = ScalarField::from_fn(grid, |x, y| 1.0 + 0.3 * (4.0 * x).sin() * (3.0 * y).cos());
    env.speed2 = ScalarField::from_fn(grid, |x, _| 0.25 + 0.05 * x);
    env.total_rate1 = ScalarField::constant(grid, 0.7);
    env.partial_rate = ScalarField::from_fn(grid, |x, y| 3.0 * (-((x - 0.4).powi(2) + (y - 0.5).powi(2)) / 0.02).exp());
    env.repair_speed = ScalarField::constant(grid, 0.1);
    let sol = solver::solve(&env).unwrap();

    // mode 2 is a plain travel-time problem to the depot, then mode 1 is one causal solve against it
    let repair = env.repair_fields().unwrap().repair_cost;
    let u2 = eikonal::solve(&EikonalProblem::new(env.speed2.clone(), env.cost2.clone(), nodes.clone()).unwrap()).unwrap();
    let base = ScalarField::new(
        grid,
        (0..grid.len())
            .map(|k| (env.cost1.at(k) + env.total_rate1.at(k) * repair.at(k)) / env.speed1.at(k))
            .collect(),
    )
    .unwrap();
    let beta = env.partial_rate.zip_with(&env.speed1, |p, f| p / f);
    let mode1 = coupled::solve_mode(&CoupledProblem::new(base, beta, u2.clone(), nodes).unwrap()).unwrap();
    let d1 = sol.u1.max_abs_diff(&mode1.values);
    let d2 = sol.u2.max_abs_diff(&u2);
    let tol = env.settings.tol;
    (
        d1 <= tol && d2 <= tol && mode1.stall_count() == 0,
        format!("max diff u1 {d1:.2e}, u2 {d2:.2e} (tol {tol:.1e})"),
    )
}

fn fixed_point_residual(b: &Bundle) -> (bool, String) {
    let mut pass = true;
    let mut worst = Vec::new();
    for name in SCENARIOS {
        let s = b.get(name);
        let (r1, r2) = equation_residuals(&s.env, &s.sol.repair_cost, &s.sol.u1, &s.sol.u2).unwrap();
        let r = r1.max().max(r2.max());
        let stalls = s.sol.diagnostics.stall_count;
        pass &= r <= s.env.settings.tol && stalls == 0;
        worst.push(format!("{}: {:.1e}/{} stalls", name.rsplit('/').next().unwrap(), r / s.env.settings.tol, stalls));
    }
    (pass, format!("residual/tol {}", worst.join(", ")))
}

fn monotone_iterates(b: &Bundle) -> (bool, String) {
    const SLACK: f64 = 1e-10;
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["example1", "example2", "example2_total"] {
        let s = b.get(name);
        let env = &s.env;
        let repair = &s.sol.repair_cost;
        let (mut u1, mut u2) = initial_values(env, repair).unwrap();
        let dominates = u2.values().iter().zip(s.sol.u2.values()).all(|(a, b)| *a >= b - SLACK);
        let mut rises = 0.0f64;
        let mut sweeps = 0;
        loop {
            let next = value_sweep(env, repair, &u1, &u2).unwrap();
            sweeps += 1;
            for (new, old) in [(&next.u1, &u1), (&next.u2, &u2)] {
                rises = new.values().iter().zip(old.values()).map(|(a, b)| a - b).fold(rises, f64::max);
            }
            u1 = next.u1;
            u2 = next.u2;
            if next.change <= env.settings.tol || sweeps >= env.settings.max_sweeps {
                break;
            }
        }
        pass &= dominates && rises <= SLACK;
        notes.push(format!("{name}: {sweeps} sweeps, largest rise {:.1e}, start dominates {dominates}", rises.max(0.0)));
    }
    (pass, notes.join("; "))
}

fn policy_consistency(b: &Bundle) -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["example1", "example2_total"] {
        let s = b.get(name);
        let r = evaluate_policy(
            &extract_policy(&s.sol.u1),
            &extract_policy(&s.sol.u2),
            &s.env,
            &s.sol.repair_cost,
            [&s.sol.u1, &s.sol.u2],
        )
        .unwrap();
        let gap = r.r1.max_abs_diff(&s.sol.u1).max(r.r2.max_abs_diff(&s.sol.u2));
        pass &= gap <= 10.0 * s.env.settings.tol;
        notes.push(format!("{name} gap/tol {:.2}", gap / s.env.settings.tol));
    }
    let s = b.get("example2_total");
    let vi = solver::solve_value_iteration(&s.env).unwrap();
    let (hybrid, plain) = (s.sol.diagnostics.iterations, vi.diagnostics.iterations);
    pass &= hybrid <= plain;
    notes.push(format!("example2_total sweeps hybrid {hybrid} vs value iteration {plain}"));
    (pass, notes.join("; "))
}

fn monte_carlo_agreement(b: &Bundle) -> (bool, String) {
    let s = b.get("example1");
    let planner = Planner {
        env: &s.env,
        u1: &s.sol.u1,
        u2: &s.sol.u2,
        repair_cost: &s.sol.repair_cost,
    };
    let settings = SimulationSettings::for_env(&s.env);
    let start = [0.8, 0.5];
    let clock = Instant::now();
    let (summary, _) = monte_carlo(&planner, &settings, start, 10_000, s.config.seed).unwrap();
    let took = clock.elapsed();
    let predicted = interp_value(&s.sol.u1, start).unwrap();
    let allowed = 3.0 * summary.std_error + 2.0 * s.env.grid.dx;
    let diff = (summary.mean - predicted).abs();
    (
        diff <= allowed && took < Duration::from_secs(60),
        format!(
            "mean {:.4} +/- {:.4} vs u1 {:.4}: |diff| {:.4} <= {:.4}",
            summary.mean, summary.std_error, predicted, diff, allowed
        ),
    )
}

fn terrain_formulas(_: &Bundle) -> (bool, String) {
    let params = TerrainParams::default();
    let g = Grid2D::new(4, 2, 1.0, 1.0, 0.0, 0.0).unwrap();
    let slope = ScalarField::new(g, vec![0.0, 10.0, 20.0, 25.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let speed = speed_from_slope(&slope, &params, 1).unwrap();
    let rho = ScalarField::constant(g, 50.0);
    let rate = breakdown_rate(&rho, params.roughness_scale).unwrap();
    let got = &speed.values()[..4];
    let pass = got == [200.0, 100.5, 1.0, 1.0] && rate.at(0) == 0.5;
    (pass, format!("speeds {got:?}, rate at roughness 50 {}", rate.at(0)))
}

fn depot_tradeoff(b: &Bundle) -> (bool, String) {
    let start = [0.1, 0.1];
    let lengths: Vec<f64> = ["example3_phi0", "example3_phi3"]
        .iter()
        .map(|name| {
            let s = b.get(name);
            let env = &s.env;
            trace(&s.sol.u1, &env.speed1, &env.targets.points(&env.grid), start, default_step(&env.grid, &env.speed1))
                .unwrap()
                .length()
        })
        .collect();
    let change = (lengths[1] - lengths[0]).abs() / lengths[0];
    let u = |name: &str| &b.get(name).sol.u1;
    let monotone = [("example3_phi0", "example3_phi3"), ("example3_phi3", "example3_phi5")]
        .iter()
        .all(|(lo, hi)| u(hi).values().iter().zip(u(lo).values()).all(|(a, b)| a >= b));
    (
        change > 0.05 && monotone,
        format!(
            "path lengths {:.4} and {:.4} differ by {:.1}%, u1 nondecreasing in phi: {monotone}",
            lengths[0],
            lengths[1],
            100.0 * change
        ),
    )
}
