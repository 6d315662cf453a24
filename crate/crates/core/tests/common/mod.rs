//! Reference computations shared by the integration and acceptance tests.
//!
//! Everything here works from the defining integrals (adaptive Gauss-Kronrod
//! quadrature over the fading densities), never from the closed forms under
//! test.

#![allow(dead_code)]

use std::f64::consts::LN_2;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-300 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 48)
}

/// `∫_a^∞ f` through `x = a + t/(1 − t)`.
pub fn integrate_to_inf(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let v = f(a + t / u) / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adapt(&g, 0.0, 1.0, tol, 48)
}

/// `∫_{a}^∞ f` with extra breakpoints (ascending, all > a).
pub fn integrate_split(f: impl Fn(f64) -> f64, a: f64, breaks: &[f64], tol: f64) -> f64 {
    let n = breaks.len() as f64 + 1.0;
    let mut lo = a;
    let mut total = 0.0;
    for &b in breaks {
        if b > lo {
            total += integrate(&f, lo, b, tol / n);
            lo = b;
        }
    }
    total + integrate_to_inf(&f, lo, tol / n)
}

pub fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// `e^x E₁(x) = ∫₀^∞ e^{−t}/(x + t) dt`.
pub fn scaled_e1(x: f64) -> f64 {
    integrate_split(
        |t| (-t).exp() / (x + t),
        0.0,
        &[x.min(1.0), 1.0, 10.0],
        1e-16,
    )
}

pub fn e1(x: f64) -> f64 {
    (-x).exp() * scaled_e1(x)
}

/// CDF of one metric `Z = A − B`, `A ~ Exp(mean a)`, `B ~ Exp(mean b)`.
fn metric_cdf(z: f64, a: f64, b: f64) -> f64 {
    let g = a + b;
    if z <= 0.0 {
        b / g * (z / b).exp()
    } else {
        1.0 - a / g * (-z / a).exp()
    }
}

/// Scenario for the reference integrals.
#[derive(Debug, Clone, Copy)]
pub struct Scene {
    pub m: usize,
    pub delta: f64,
    pub gs: f64,
    pub gp: f64,
}

impl Scene {
    pub fn new(m: usize, delta: f64, gs: f64, gp: f64) -> Self {
        Self { m, delta, gs, gp }
    }

    fn scales(&self) -> (f64, f64) {
        (self.delta * self.gs, (1.0 - self.delta) * self.gp)
    }

    /// `P(γ_{s,î} ≤ x)` for `0 < δ < 1`:
    /// `M ∫₀ˣ f_s(t) ∫₀^∞ f_p(u) F_Z(δt − (1−δ)u)^{M−1} du dt`.
    pub fn data_cdf(&self, x: f64, tol: f64) -> f64 {
        let Scene { m, delta, gs, gp } = *self;
        let (a, b) = self.scales();
        let inner = |t: f64| {
            let kink = delta * t / (1.0 - delta);
            integrate_split(
                |u| {
                    (-u / gp).exp() / gp
                        * metric_cdf(delta * t - (1.0 - delta) * u, a, b).powi(m as i32 - 1)
                },
                0.0,
                &[kink],
                tol * 1e-2,
            )
        };
        m as f64 * integrate(|t| (-t / gs).exp() / gs * inner(t), 0.0, x, tol)
    }

    /// `P(γ_{p,î} ≤ y)` for `0 < δ < 1`.
    pub fn interference_cdf(&self, y: f64, tol: f64) -> f64 {
        let Scene { m, delta, gs, gp } = *self;
        let (a, b) = self.scales();
        let inner = |u: f64| {
            let kink = (1.0 - delta) * u / delta;
            integrate_split(
                |t| {
                    (-t / gs).exp() / gs
                        * metric_cdf(delta * t - (1.0 - delta) * u, a, b).powi(m as i32 - 1)
                },
                0.0,
                &[kink],
                tol * 1e-2,
            )
        };
        m as f64 * integrate(|u| (-u / gp).exp() / gp * inner(u), 0.0, y, tol)
    }

    /// `E(γ_{p,î}) = M ∫ u f_p(u) H(u) du`.
    pub fn mean_interference_gain(&self, tol: f64) -> f64 {
        let Scene { m, delta, gs, gp } = *self;
        let (a, b) = self.scales();
        let inner = |u: f64| {
            let kink = (1.0 - delta) * u / delta;
            integrate_split(
                |t| {
                    (-t / gs).exp() / gs
                        * metric_cdf(delta * t - (1.0 - delta) * u, a, b).powi(m as i32 - 1)
                },
                0.0,
                &[kink],
                tol * 1e-2,
            )
        };
        m as f64 * integrate_split(|u| u * (-u / gp).exp() / gp * inner(u), 0.0, &[gp], tol)
    }
}

/// Ergodic rate in bits/s/Hz from a data-gain CDF:
/// `E log₂(1 + s·X) = (1/ln 2) ∫₀^∞ s(1 − F(x))/(1 + s·x) dx`, `s = Pₛ/N₀`.
pub fn rate_from_cdf(snr_scale: f64, mean_gain: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let s = snr_scale;
    let f = |x: f64| s * (1.0 - cdf(x)).max(0.0) / (1.0 + s * x);
    let breaks = [
        mean_gain * 0.1,
        mean_gain,
        mean_gain * 5.0,
        mean_gain * 20.0,
    ];
    integrate_split(f, 0.0, &breaks, 1e-13) / LN_2
}

/// Max-gain selection rate `Σ_k C(M,k)(−1)^{k+1} e^{k/ρ}E₁(k/ρ)/ln 2`,
/// `ρ = Pₛγ̄ₛ/N₀`, with quadrature `E₁`.
pub fn rate_max_gain(m: usize, rho: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..=m {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * binom(m, k) * scaled_e1(k as f64 / rho);
    }
    acc / LN_2
}

/// Single Rayleigh link rate `e^{1/ρ}E₁(1/ρ)/ln 2`.
pub fn rate_single(rho: f64) -> f64 {
    scaled_e1(1.0 / rho) / LN_2
}

/// Kolmogorov-Smirnov distance between sorted samples and a CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `(M, δ, ξ)` grid used across the desk-scale checks.
pub fn standard_grid() -> Vec<(usize, f64, f64)> {
    let mut g = Vec::new();
    for m in [1usize, 2, 4, 8] {
        for delta in [0.0, 0.25, 0.5, 0.75, 0.9, 1.0] {
            for xi in [0.1, 1.0, 10.0] {
                g.push((m, delta, xi));
            }
        }
    }
    g
}
