//! Guaranteed overestimates used to start the value iterations.
//!
//! The pessimistic robot never leaves mode 2 after a total breakdown (it pays
//! `R` and keeps going damaged), travels along the straight segment from a
//! depot to its closest target, and after a partial breakdown walks back to
//! the depot along the same segment. With worst-case coefficients this is a
//! 1D linear problem solved in closed form.

use crate::eikonal::{self, EikonalProblem};
use crate::error::{Error, Result};
use crate::field::{NodeSet, ScalarField};

/// Worst-case coefficients over the whole grid for one depot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseParams {
    /// `min f1`
    pub speed1: f64,
    /// `min f2`
    pub speed2: f64,
    /// `max (K1 + lambda1 R)`
    pub cost1: f64,
    /// `max (K2 + lambda2 R)`
    pub cost2: f64,
    /// `max phi`
    pub partial_rate: f64,
    /// `max R_D`
    pub depot_cost: f64,
    /// Straight-line distance from the depot to its closest target.
    pub distance: f64,
}

impl WorstCaseParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.speed1 > 0.0
            && self.speed2 > 0.0
            && self.cost1 > 0.0
            && self.cost2 > 0.0
            && self.partial_rate >= 0.0
            && self.depot_cost >= 0.0
            && self.distance >= 0.0
            && [
                self.speed1,
                self.speed2,
                self.cost1,
                self.cost2,
                self.partial_rate,
                self.depot_cost,
                self.distance,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!("invalid worst-case parameters {self:?}")))
        }
    }
}

/// Pessimistic mode-1 value at the depot, `g1(0)`.
///
/// With `xi` the distance travelled from the depot toward the target,
/// `g2(xi) = R_D + g1(0) + (k2/F2) xi` and `F1 g1' = -k1 - phi (g2 - g1)`,
/// `g1(d) = 0`. Writing `alpha = phi/F1` the consistent value is
///
/// ```text
/// g1(0) = A0 (exp(alpha d) - 1) - (k2/F2) d,   A0 = k1/phi + R_D + F1 k2 / (phi F2)
/// ```
pub fn depot_overestimate(p: &WorstCaseParams) -> Result<f64> {
    p.validate()?;
    let d = p.distance;
    if d == 0.0 {
        return Ok(0.0);
    }
    if p.partial_rate == 0.0 {
        return Ok(p.cost1 / p.speed1 * d);
    }
    let phi = p.partial_rate;
    let alpha = phi / p.speed1;
    let a0 = p.cost1 / phi + p.depot_cost + p.speed1 * p.cost2 / (phi * p.speed2);
    Ok(a0 * (alpha * d).exp_m1() - p.cost2 / p.speed2 * d)
}

/// Initial mode-2 field: `f2 |grad u2| = K2 + lambda2 R` with
/// `u2 = R_D + u1_hat` on the depots.
pub fn initial_u2(
    speed2: &ScalarField,
    cost2: &ScalarField,
    rate2: &ScalarField,
    repair_cost: &ScalarField,
    depots: &NodeSet,
    depot_values: &[f64],
) -> Result<ScalarField> {
    if depot_values.len() != depots.len() {
        return Err(Error::InvalidProblem("one overestimate per depot required".into()));
    }
    if let Some(v) = depot_values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidProblem(format!("non-finite depot overestimate {v}")));
    }
    let running = ScalarField::new(
        *cost2.grid(),
        cost2
            .values()
            .iter()
            .zip(rate2.values())
            .zip(repair_cost.values())
            .map(|((k, l), r)| k + l * r)
            .collect(),
    )?;
    let boundary = depots.with_values(
        depots
            .values()
            .iter()
            .zip(depot_values)
            .map(|(rd, u1)| rd + u1)
            .collect(),
    );
    eikonal::solve(&EikonalProblem::new(speed2.clone(), running, boundary)?)
}
