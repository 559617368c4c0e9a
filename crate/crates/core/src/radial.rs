//! Reference solution for a single coincident target/depot with constant
//! coefficients. Both modes then move straight toward the point, and the value
//! functions solve two linear ODEs in the radius:
//!
//! ```text
//! u1' = (K1 + lambda1 R(r) + phi (u2 - u1)) / f1,         u1(0) = 0
//! u2' = (K2 + lambda2 (R(r) + u1 - u2)) / f2,             u2(0) = R_D
//! R(r) = (K_R / f_R) r + R_F
//! ```
//!
//! Integrated with classical RK4; nothing here is shared with the grid solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialParams {
    pub f1: f64,
    pub f2: f64,
    pub f_r: f64,
    pub k1: f64,
    pub k2: f64,
    pub k_r: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub r_max: f64,
}

impl RadialParams {
    /// Coefficients of the radially symmetric example: `phi = 5`,
    /// `lambda1 = 0.5`, `lambda2 = 1.5`, `f1 = 1`, `f2 = 0.2`, `f_R = 0.1`,
    /// unit running costs, `R_F = 1`, `R_D = 0`.
    pub fn radial_example() -> Self {
        Self {
            f1: 1.0,
            f2: 0.2,
            f_r: 0.1,
            k1: 1.0,
            k2: 1.0,
            k_r: 1.0,
            lambda1: 0.5,
            lambda2: 1.5,
            phi: 5.0,
            r_f: 1.0,
            r_d: 0.0,
            r_max: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.f1, self.f2, self.f_r, self.k1, self.k2, self.k_r, self.r_max];
        let nonneg = [self.lambda1, self.lambda2, self.phi, self.r_f, self.r_d];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && nonneg.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!("invalid radial parameters {self:?}")))
        }
    }

    fn repair(&self, r: f64) -> f64 {
        self.k_r / self.f_r * r + self.r_f
    }

    fn rhs(&self, r: f64, u: [f64; 2]) -> [f64; 2] {
        let rep = self.repair(r);
        [
            (self.k1 + self.lambda1 * rep + self.phi * (u[1] - u[0])) / self.f1,
            (self.k2 + self.lambda2 * (rep + u[0] - u[1])) / self.f2,
        ]
    }

    fn rk4_step(&self, r: f64, u: [f64; 2], h: f64) -> [f64; 2] {
        let add = |u: [f64; 2], k: [f64; 2], s: f64| [u[0] + s * k[0], u[1] + s * k[1]];
        let k1 = self.rhs(r, u);
        let k2 = self.rhs(r + 0.5 * h, add(u, k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, add(u, k2, 0.5 * h));
        let k4 = self.rhs(r + h, add(u, k3, h));
        [
            u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

pub const DEFAULT_STEP: f64 = 1e-5;

/// `(u1, u2)` at each requested radius, integrating with step at most `max_step`.
pub fn reference(params: &RadialParams, radii: &[f64]) -> Result<Vec<[f64; 2]>> {
    reference_with_step(params, radii, DEFAULT_STEP)
}

pub fn reference_with_step(params: &RadialParams, radii: &[f64], max_step: f64) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0 && **r <= params.r_max)) {
        return Err(Error::InvalidProblem(format!(
            "radius {r} outside [0, {}]",
            params.r_max
        )));
    }
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));

    let mut out = vec![[0.0; 2]; radii.len()];
    let mut r = 0.0;
    let mut u = [0.0, params.r_d];
    for k in order {
        let target = radii[k];
        let span = target - r;
        if span > 0.0 {
            let n = (span / max_step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for s in 0..n {
                u = params.rk4_step(r + s as f64 * h, u, h);
            }
            r = target;
        }
        out[k] = u;
    }
    Ok(out)
}

/// Dense tabulation on `[0, r_max]` with cubic Hermite lookup, for evaluating
/// the reference at every node of a fine grid.
#[derive(Debug, Clone)]
pub struct RadialTable {
    params: RadialParams,
    step: f64,
    values: Vec<[f64; 2]>,
}

impl RadialTable {
    pub fn new(params: &RadialParams, step: f64) -> Result<Self> {
        params.validate()?;
        let n = (params.r_max / step).ceil() as usize;
        let h = params.r_max / n as f64;
        let mut values = Vec::with_capacity(n + 1);
        let mut u = [0.0, params.r_d];
        values.push(u);
        for s in 0..n {
            u = params.rk4_step(s as f64 * h, u, h);
            values.push(u);
        }
        Ok(Self {
            params: *params,
            step: h,
            values,
        })
    }

    pub fn eval(&self, r: f64) -> [f64; 2] {
        let r = r.clamp(0.0, self.params.r_max);
        let last = self.values.len() - 1;
        let pos = r / self.step;
        let k = (pos.floor() as usize).min(last - 1);
        let t = pos - k as f64;
        let (r0, r1) = (k as f64 * self.step, (k + 1) as f64 * self.step);
        let (u0, u1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.params.rhs(r0, u0), self.params.rhs(r1, u1));
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let mix = |c: usize| h00 * u0[c] + h10 * self.step * d0[c] + h01 * u1[c] + h11 * self.step * d1[c];
        [mix(0), mix(1)]
    }
}

/// Least-squares slope of `ln(error)` against `ln(resolution)`.
pub fn fit_log_slope(resolution: &[f64], errors: &[f64]) -> f64 {
    let n = resolution.len() as f64;
    let xs: Vec<f64> = resolution.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
