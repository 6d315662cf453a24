//! Transmit-antenna selection rules.
//!
//! Indices are zero-based. Ties go to the lowest index; they have probability
//! zero under continuous fading but the rule keeps runs reproducible.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{GainSample, SelectionWeight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOutcome {
    /// Zero-based antenna index.
    pub index: usize,
    pub gain_s: f64,
    pub gain_p: f64,
    /// Winning `Z_î` for difference selection, winning ratio for ratio
    /// selection.
    pub metric: f64,
}

/// Picks the antenna maximizing `Z_i = δ·γ_{s,i} − (1−δ)·γ_{p,i}`.
pub fn difference_select(sample: &GainSample, weight: SelectionWeight) -> SelectionOutcome {
    let delta = weight.delta();
    let index = difference_index(&sample.gains_s, &sample.gains_p, delta);
    let (gs, gp) = (sample.gains_s[index], sample.gains_p[index]);
    SelectionOutcome {
        index,
        gain_s: gs,
        gain_p: gp,
        metric: delta * gs - (1.0 - delta) * gp,
    }
}

/// Picks the antenna maximizing `γ_{s,i}/γ_{p,i}`.
pub fn ratio_select(sample: &GainSample) -> Result<SelectionOutcome> {
    if let Some(i) = sample.gains_p.iter().position(|&g| g == 0.0) {
        return Err(Error::DegenerateInput(format!(
            "interference gain of antenna {i} is zero; ratio undefined"
        )));
    }
    let index = ratio_index(&sample.gains_s, &sample.gains_p);
    let (gs, gp) = (sample.gains_s[index], sample.gains_p[index]);
    Ok(SelectionOutcome {
        index,
        gain_s: gs,
        gain_p: gp,
        metric: gs / gp,
    })
}

pub(crate) fn difference_index(gains_s: &[f64], gains_p: &[f64], delta: f64) -> usize {
    let beta = 1.0 - delta;
    let mut best = 0;
    let mut best_z = delta * gains_s[0] - beta * gains_p[0];
    for i in 1..gains_s.len() {
        let z = delta * gains_s[i] - beta * gains_p[i];
        if z > best_z {
            best = i;
            best_z = z;
        }
    }
    best
}

/// Ratio argmax by cross-multiplication; a zero interference gain paired with
/// a positive data gain wins outright instead of dividing by zero.
pub(crate) fn ratio_index(gains_s: &[f64], gains_p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..gains_s.len() {
        if gains_s[i] * gains_p[best] > gains_s[best] * gains_p[i] {
            best = i;
        }
    }
    best
}

/// Selection strategy as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Difference(SelectionWeight),
    Ratio,
}

impl Strategy {
    pub fn max_gain() -> Self {
        Strategy::Difference(SelectionWeight::MAX_GAIN)
    }

    pub fn min_interference() -> Self {
        Strategy::Difference(SelectionWeight::MIN_INTERFERENCE)
    }

    /// Parses `difference | ratio | max-gain | min-interference`; `delta` is
    /// required for `difference` and ignored otherwise.
    pub fn from_name(name: &str, delta: Option<f64>) -> Result<Self> {
        match name.parse::<StrategyName>()? {
            StrategyName::Difference => {
                let d = delta.ok_or_else(|| {
                    Error::Config("strategy 'difference' requires a delta".into())
                })?;
                Ok(Strategy::Difference(SelectionWeight::new(d)?))
            }
            StrategyName::Ratio => Ok(Strategy::Ratio),
            StrategyName::MaxGain => Ok(Strategy::max_gain()),
            StrategyName::MinInterference => Ok(Strategy::min_interference()),
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            Strategy::Difference(w) => Some(w.delta()),
            Strategy::Ratio => None,
        }
    }

    /// Zero-based index of the selected antenna.
    pub(crate) fn select_index(&self, gains_s: &[f64], gains_p: &[f64]) -> usize {
        match self {
            Strategy::Difference(w) => difference_index(gains_s, gains_p, w.delta()),
            Strategy::Ratio => ratio_index(gains_s, gains_p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Difference,
    Ratio,
    MaxGain,
    MinInterference,
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" => Ok(Self::Difference),
            "ratio" => Ok(Self::Ratio),
            "max-gain" => Ok(Self::MaxGain),
            "min-interference" => Ok(Self::MinInterference),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Difference(w) => write!(f, "difference({})", w.delta()),
            Strategy::Ratio => f.write_str("ratio"),
        }
    }
}
