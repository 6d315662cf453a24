//! Transmit-power policies under a peak-power and an interference constraint.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{derive_weights, Constraints, SelectionWeight, SystemParams};

/// Relative band in which the interference bound and `Pmax` count as equal;
/// such ties are reported as interference-bound.
pub const BINDING_TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    PeakPower,
    Interference,
    None,
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binding::PeakPower => "peak-power",
            Binding::Interference => "interference",
            Binding::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecision {
    pub p_s: f64,
    pub binding: Binding,
}

/// `[M(α+1)^{M−1}α + 1] / [M(α+1)^M]`, the average interference per watt
/// relative to `γ̄ₚ`. Evaluated as `α/(α+1) + (α+1)^{−M}/M` so that neither
/// endpoint overflows: `α = 0` gives `1/M` and `α = ∞` gives 1.
pub fn interference_fraction(alpha: f64, num_antennas: usize) -> f64 {
    let m = num_antennas as f64;
    if alpha.is_infinite() {
        return 1.0;
    }
    let inv = 1.0 / (alpha + 1.0);
    alpha * inv + inv.powf(m) / m
}

/// Average interference `I(Pₛ, δ) = Pₛ·E(γ_{p,î})` seen by the primary
/// receiver.
pub fn average_interference(p_s: f64, params: &SystemParams, weight: SelectionWeight) -> f64 {
    let w = derive_weights(params, weight);
    p_s * interference_fraction(w.alpha, params.num_antennas()) * params.mean_gain_p()
}

/// Largest constant power meeting both constraints for difference selection
/// with weight δ.
pub fn statistical_power(
    params: &SystemParams,
    constraints: &Constraints,
    weight: SelectionWeight,
) -> PowerDecision {
    let p_max = constraints.p_max();
    let limit = constraints.interference_limit();
    let gp = params.mean_gain_p();
    if gp < limit / p_max {
        return PowerDecision {
            p_s: p_max,
            binding: Binding::PeakPower,
        };
    }
    let w = derive_weights(params, weight);
    let p_int = limit / (interference_fraction(w.alpha, params.num_antennas()) * gp);
    if p_int <= p_max * (1.0 + BINDING_TIE_BAND) {
        PowerDecision {
            p_s: p_int.min(p_max),
            binding: Binding::Interference,
        }
    } else {
        PowerDecision {
            p_s: p_max,
            binding: Binding::PeakPower,
        }
    }
}

/// Per-realization power `min{Pmax, ℘/γ_{p,î}}` under a peak-interference
/// constraint.
pub fn instantaneous_power_pic(
    gain_p_selected: f64,
    constraints: &Constraints,
) -> Result<PowerDecision> {
    if gain_p_selected.is_nan() || gain_p_selected < 0.0 {
        return Err(Error::domain(
            "gain_p_selected",
            gain_p_selected,
            "must be >= 0",
        ));
    }
    let p_max = constraints.p_max();
    if gain_p_selected == 0.0 {
        if p_max.is_infinite() {
            return Err(Error::DegenerateInput(
                "zero interference gain with no peak-power cap gives unbounded power".into(),
            ));
        }
        return Ok(PowerDecision {
            p_s: p_max,
            binding: Binding::PeakPower,
        });
    }
    Ok(pic_power(
        gain_p_selected,
        constraints.interference_limit(),
        p_max,
    ))
}

#[inline]
pub(crate) fn pic_power(gain_p: f64, limit: f64, p_max: f64) -> PowerDecision {
    let p_int = limit / gain_p;
    if p_int <= p_max {
        PowerDecision {
            p_s: p_int,
            binding: Binding::Interference,
        }
    } else {
        PowerDecision {
            p_s: p_max,
            binding: Binding::PeakPower,
        }
    }
}
