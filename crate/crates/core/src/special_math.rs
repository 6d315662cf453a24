//! Exponential integral and combinatorial helpers used by every closed form.
//!
//! `E₁(x) = ∫ₓ^∞ e^{−u}/u du` is evaluated with its power series for `x ≤ 1`
//! and with a continued fraction for `x > 1`. The continued fraction yields
//! `e^x·E₁(x)` directly, which is the shape every rate term needs; computing
//! it as `exp(x) * e1(x)` would overflow long before the product does.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_CUTOFF: f64 = 1.0;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// A finite, strictly positive real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain("x", value, "must be finite and > 0"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

/// `E₁(x)`. Underflows gracefully toward zero for large `x`.
pub fn exp_integral_e1(x: PositiveReal) -> f64 {
    let x = x.get();
    if x <= SERIES_CUTOFF {
        e1_series(x)
    } else {
        scaled_continued_fraction(x) * (-x).exp()
    }
}

/// `e^x·E₁(x)`, evaluated without forming either factor when `x > 1`.
pub fn exp_scaled_e1(x: PositiveReal) -> f64 {
    scaled_e1(x.get())
}

/// Unchecked `e^x·E₁(x)` for internal callers that already hold `x > 0`.
pub(crate) fn scaled_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= SERIES_CUTOFF {
        x.exp() * e1_series(x)
    } else {
        scaled_continued_fraction(x)
    }
}

fn e1_series(x: f64) -> f64 {
    // E₁(x) = −γ − ln x + Σ_{k≥1} (−1)^{k+1} x^k / (k·k!)
    let mut sum = 0.0;
    let mut fact_term = 1.0; // (−1)^{k+1} x^k / k!
    for k in 1..MAX_ITER {
        let kf = k as f64;
        fact_term *= if k == 1 { x } else { -x / kf };
        let term = fact_term / kf;
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// Modified Lentz evaluation of
/// `e^x E₁(x) = 1/(x+1− 1²/(x+3− 2²/(x+5− …)))`.
fn scaled_continued_fraction(x: f64) -> f64 {
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Largest `n` accepted by [`binomial`].
pub const MAX_BINOMIAL_N: u32 = 64;

/// `n choose k` as a correctly rounded `f64` (exact integer arithmetic
/// underneath).
pub fn binomial(n: u32, k: u32) -> Result<f64> {
    if n > MAX_BINOMIAL_N {
        return Err(Error::domain("n", n as f64, "must be <= 64"));
    }
    if k > n {
        return Err(Error::domain("k", k as f64, "must be <= n"));
    }
    Ok(binomial_u128(n, k) as f64)
}

pub(crate) fn binomial_u128(n: u32, k: u32) -> u128 {
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n − i) is divisible by (i + 1) at every step
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Neumaier (improved Kahan) summation. Alternating binomial sums in the rate
/// and CDF expressions lose digits quickly with plain accumulation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
