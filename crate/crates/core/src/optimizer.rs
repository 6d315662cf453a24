//! Joint choice of the selection weight δ and the statistics-based transmit
//! power.
//!
//! For each δ the power is fixed by [`statistical_power`], so the problem is a
//! scalar search over δ ∈ [0, 1]. The composite objective is not known to be
//! unimodal, so the search is seeded by a 101-point grid and refined by
//! golden-section search inside the bracket around the best grid point.

use std::fmt;

use crate::analytic::{mutual_information, outage_probability, MetricValue};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Constraints, SelectionWeight, SystemParams};
use crate::power::{statistical_power, PowerDecision};

/// Number of points in the seeding grid.
pub const COARSE_GRID_POINTS: usize = 101;

/// Objective values closer than this are ties; ties resolve to the larger δ,
/// which keeps the most diversity.
pub const TIE_TOLERANCE: f64 = 1e-12;

const GOLDEN_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    MaxMutualInformation,
    MinOutage { r0: f64 },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::MaxMutualInformation => "max-mi",
            Objective::MinOutage { .. } => "min-outage",
        }
    }

    /// Larger is better.
    fn score(&self, value: f64) -> f64 {
        match self {
            Objective::MaxMutualInformation => value,
            Objective::MinOutage { .. } => -value,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Objective::MinOutage { r0 } if !(r0.is_finite() && r0 > 0.0) => {
                Err(Error::domain("r0", r0, "must be finite and > 0"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub delta_star: f64,
    pub p_s_star: f64,
    pub power: PowerDecision,
    pub objective_value: MetricValue,
    pub objective: Objective,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub delta: f64,
    pub p_s: f64,
    pub value: f64,
}

/// Objective at δ with the statistics-based power for that δ.
pub fn evaluate(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
    delta: f64,
) -> Result<(PowerDecision, MetricValue)> {
    let weight = SelectionWeight::new(delta)?;
    let power = statistical_power(params, constraints, weight);
    let value = match objective {
        Objective::MaxMutualInformation => mutual_information(power.p_s, params, weight)?,
        Objective::MinOutage { r0 } => outage_probability(power.p_s, r0, params, weight)?,
    };
    Ok((power, value))
}

fn grid_delta(i: usize, n: usize) -> f64 {
    if i + 1 == n {
        1.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Objective evaluated on `grid_size` uniformly spaced weights including both
/// endpoints.
pub fn objective_curve(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
    grid_size: usize,
) -> Result<Vec<CurvePoint>> {
    objective_curve_with(
        params,
        constraints,
        objective,
        grid_size,
        Execution::default(),
    )
}

pub fn objective_curve_with(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
    grid_size: usize,
    exec: Execution,
) -> Result<Vec<CurvePoint>> {
    if grid_size < 2 {
        return Err(Error::Config(format!(
            "grid_size must be >= 2, got {grid_size}"
        )));
    }
    objective.validate()?;
    exec.map(grid_size, |i| {
        let delta = grid_delta(i, grid_size);
        evaluate(params, constraints, objective, delta).map(|(p, v)| CurvePoint {
            delta,
            p_s: p.p_s,
            value: v.value,
        })
    })
    .into_iter()
    .collect()
}

/// Index of the best point; among near-ties the one with the largest δ.
fn best_index(points: &[CurvePoint], objective: Objective) -> usize {
    let best = points
        .iter()
        .map(|p| objective.score(p.value))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pick = 0;
    for (i, p) in points.iter().enumerate() {
        if objective.score(p.value) >= best - TIE_TOLERANCE
            && (objective.score(points[pick].value) < best - TIE_TOLERANCE
                || p.delta > points[pick].delta)
        {
            pick = i;
        }
    }
    pick
}

pub fn optimize_delta(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
) -> Result<OptimizationResult> {
    optimize_delta_with(params, constraints, objective, Execution::default())
}

pub fn optimize_delta_with(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
    exec: Execution,
) -> Result<OptimizationResult> {
    let mut points =
        objective_curve_with(params, constraints, objective, COARSE_GRID_POINTS, exec)?;
    let i = best_index(&points, objective);
    let lo = points[i.saturating_sub(1)].delta;
    let hi = points[(i + 1).min(points.len() - 1)].delta;
    golden_section(params, constraints, objective, lo, hi, &mut points)?;

    let pick = best_index(&points, objective);
    let delta_star = points[pick].delta;
    let (power, objective_value) = evaluate(params, constraints, objective, delta_star)?;
    Ok(OptimizationResult {
        delta_star,
        p_s_star: power.p_s,
        power,
        objective_value,
        objective,
        evaluations: points.len(),
    })
}

/// Golden-section maximization of the score on `[lo, hi]`; every evaluated
/// point is appended to `seen`.
fn golden_section(
    params: &SystemParams,
    constraints: &Constraints,
    objective: Objective,
    mut lo: f64,
    mut hi: f64,
    seen: &mut Vec<CurvePoint>,
) -> Result<()> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |delta: f64| -> Result<f64> {
        let (p, v) = evaluate(params, constraints, objective, delta)?;
        seen.push(CurvePoint {
            delta,
            p_s: p.p_s,
            value: v.value,
        });
        Ok(objective.score(v.value))
    };
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > GOLDEN_WIDTH {
        // on equal scores move toward larger δ
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    Ok(())
}
