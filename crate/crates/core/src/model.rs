//! Scenario types and the δ-dependent weights the closed forms are built on.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Upper bound on the antenna count; the alternating binomial sums are only
/// evaluated for `M ≤ 64`.
pub const MAX_ANTENNAS: usize = 64;

/// Above this antenna count the alternating sums lose enough digits that
/// closed-form results should be cross-checked by simulation.
pub const ACCURACY_ADVISORY_ANTENNAS: usize = 16;

/// Relative band (in units of `γ̄ = ϖₛ + ϖₚ`) inside which `ϖₛ = g·ϖₚ` is
/// treated as an exact coincidence.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Static scenario: antenna count, mean link gains and noise power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    num_antennas: usize,
    mean_gain_s: f64,
    mean_gain_p: f64,
    noise_power: f64,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(name, v, "must be finite and > 0"))
    }
}

impl SystemParams {
    pub fn new(
        num_antennas: usize,
        mean_gain_s: f64,
        mean_gain_p: f64,
        noise_power: f64,
    ) -> Result<Self> {
        if num_antennas == 0 || num_antennas > MAX_ANTENNAS {
            return Err(Error::domain(
                "num_antennas",
                num_antennas as f64,
                "must be in 1..=64",
            ));
        }
        Ok(Self {
            num_antennas,
            mean_gain_s: positive("mean_gain_s", mean_gain_s)?,
            mean_gain_p: positive("mean_gain_p", mean_gain_p)?,
            noise_power: positive("noise_power", noise_power)?,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn mean_gain_s(&self) -> f64 {
        self.mean_gain_s
    }

    pub fn mean_gain_p(&self) -> f64 {
        self.mean_gain_p
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// `ξ = γ̄ₛ/γ̄ₚ`.
    pub fn xi(&self) -> f64 {
        self.mean_gain_s / self.mean_gain_p
    }
}

/// Peak transmit power and average-interference limit, both linear.
///
/// `p_max` may be `+∞` to model a transmitter without a peak-power cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    p_max: f64,
    interference_limit: f64,
}

impl Constraints {
    pub fn new(p_max: f64, interference_limit: f64) -> Result<Self> {
        if p_max.is_nan() || p_max <= 0.0 {
            return Err(Error::domain("p_max", p_max, "must be > 0"));
        }
        Ok(Self {
            p_max,
            interference_limit: positive("interference_limit", interference_limit)?,
        })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn interference_limit(&self) -> f64 {
        self.interference_limit
    }
}

/// Difference-selection weight δ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SelectionWeight(f64);

impl SelectionWeight {
    pub const MAX_GAIN: Self = Self(1.0);
    pub const MIN_INTERFERENCE: Self = Self(0.0);

    pub fn new(delta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&delta) {
            Ok(Self(delta))
        } else {
            Err(Error::domain("delta", delta, "must lie in [0, 1]"))
        }
    }

    pub fn delta(self) -> f64 {
        self.0
    }
}

/// Quantities derived from `(params, δ)`:
/// `ϖₛ = δ·γ̄ₛ`, `ϖₚ = (1−δ)·γ̄ₚ`, `γ̄ = ϖₛ + ϖₚ`, `α = ϖₛ/ϖₚ`.
///
/// `ϖₛ` and `ϖₚ` are the means of the two components of the selection metric
/// `Z_i`, so `Z_i` is a two-sided exponential with scales `ϖₛ` (right) and
/// `ϖₚ` (left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedWeights {
    pub w_s: f64,
    pub w_p: f64,
    pub gamma_bar: f64,
    /// `+∞` when `ϖₚ = 0` (δ = 1).
    pub alpha: f64,
    /// `Some(g)` when `ϖₛ = g·ϖₚ` for an integer `g ∈ [0, M−1]` within the
    /// relative tolerance.
    pub degenerate_g: Option<usize>,
}

impl DerivedWeights {
    /// `ϖₛ/γ̄`, the probability that a single `Z_i` is positive.
    pub fn c(&self) -> f64 {
        self.w_s / self.gamma_bar
    }

    /// `ϖₚ/γ̄`.
    pub fn d(&self) -> f64 {
        self.w_p / self.gamma_bar
    }
}

pub fn derive_weights(params: &SystemParams, weight: SelectionWeight) -> DerivedWeights {
    let delta = weight.delta();
    let w_s = delta * params.mean_gain_s;
    let w_p = (1.0 - delta) * params.mean_gain_p;
    let gamma_bar = w_s + w_p;
    let alpha = if w_p == 0.0 { f64::INFINITY } else { w_s / w_p };
    let tol = DEGENERACY_TOLERANCE * gamma_bar;
    let degenerate_g = if w_p == 0.0 {
        None
    } else {
        let g = (w_s / w_p).round();
        if g <= (params.num_antennas - 1) as f64 && (w_s - g * w_p).abs() <= tol {
            Some(g as usize)
        } else {
            None
        }
    };
    DerivedWeights {
        w_s,
        w_p,
        gamma_bar,
        alpha,
        degenerate_g,
    }
}

/// One realization of per-antenna data-link and interference-link gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSample {
    pub gains_s: Vec<f64>,
    pub gains_p: Vec<f64>,
}

impl GainSample {
    pub fn new(gains_s: Vec<f64>, gains_p: Vec<f64>) -> Result<Self> {
        if gains_s.len() != gains_p.len() || gains_s.is_empty() {
            return Err(Error::Config(format!(
                "gain lists must be non-empty and equal length (got {} and {})",
                gains_s.len(),
                gains_p.len()
            )));
        }
        for &g in gains_s.iter().chain(&gains_p) {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::domain("gain", g, "must be finite and >= 0"));
            }
        }
        Ok(Self { gains_s, gains_p })
    }

    pub(crate) fn zeroed(num_antennas: usize) -> Self {
        Self {
            gains_s: vec![0.0; num_antennas],
            gains_p: vec![0.0; num_antennas],
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.gains_s.len()
    }

    /// Overwrites this sample with fresh draws. Data gains are drawn first,
    /// antenna by antenna, then interference gains.
    pub fn resample<R: Rng + ?Sized>(&mut self, params: &SystemParams, rng: &mut R) {
        let (ms, mp) = (params.mean_gain_s, params.mean_gain_p);
        for g in &mut self.gains_s {
            let e: f64 = Exp1.sample(rng);
            *g = ms * e;
        }
        for g in &mut self.gains_p {
            let e: f64 = Exp1.sample(rng);
            *g = mp * e;
        }
    }
}

/// Draws `M` i.i.d. data gains with mean `γ̄ₛ` and `M` i.i.d. interference
/// gains with mean `γ̄ₚ`.
pub fn sample_gains<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> GainSample {
    let mut s = GainSample::zeroed(params.num_antennas);
    s.resample(params, rng);
    s
}

/// Number of consecutive trials served by one random stream.
pub const TRIALS_PER_BLOCK: u64 = 4096;

/// Independent stream families, so auxiliary estimation runs never reuse the
/// draws of the main run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFamily {
    Main,
    Calibration,
}

/// Counter-addressed random source: the draws for trial `t` depend only on
/// `(seed, family, t)`, never on how trials are scheduled across workers.
///
/// Trial `t` lives in block `t / TRIALS_PER_BLOCK`; every block is its own
/// ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    base: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn block(&self, family: StreamFamily, block: u64) -> ChaCha8Rng {
        let tag = match family {
            StreamFamily::Main => 0,
            StreamFamily::Calibration => 1u64 << 63,
        };
        let mut rng = self.base.clone();
        rng.set_stream(tag | block);
        rng.set_word_pos(0);
        rng
    }
}
