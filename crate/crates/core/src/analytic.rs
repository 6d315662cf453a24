//! Closed-form statistics of the selected links under difference selection,
//! and the secondary-link metrics built on them.
//!
//! Write `a = ϖₛ`, `b = ϖₚ`, `c = a/γ̄`, `d = b/γ̄`. The distribution of the
//! selected data gain `γ_{s,î}` is a finite mixture of exponential CDFs
//!
//! ```text
//! F(x) = Σ_j w_j·(1 − e^{−q_j·x})  [ − K·x·e^{−q·x} when ϖₛ = g·ϖₚ ]
//! ```
//!
//! with rates `q ∈ {k/γ̄ₛ : k = 1..M} ∪ {β = δγ̄/(ab)}`. The CDF is evaluated
//! from that mixture with `expm1`, so small-argument values (the diversity
//! regime) keep full relative precision. The mutual information is evaluated
//! separately from the grouped `Ψ_k`, `Φ_k`, `Υ`, `Θ_g` terms, so the two
//! expressions cross-check each other.
//!
//! Weights within `1e-6` of 0 or 1 are routed to the endpoint forms; the
//! interior expressions carry `1/(ϖₛϖₚ)` factors that blow up there.

use std::f64::consts::{LN_2, LOG2_E};

use crate::error::{Error, Result};
use crate::model::{
    derive_weights, DerivedWeights, SelectionWeight, SystemParams, DEGENERACY_TOLERANCE,
};
use crate::special_math::{binomial_u128, scaled_e1, CompensatedSum};

/// Width of the band around δ = 0 and δ = 1 that uses the endpoint forms.
pub const ENDPOINT_BAND: f64 = 1e-6;

/// Default outage rate threshold, bits/s/Hz.
pub const DEFAULT_R0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    BitsPerSecPerHz,
    Probability,
    Dimensionless,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub units: Units,
}

impl MetricValue {
    fn probability(v: f64) -> Self {
        Self {
            value: v.clamp(0.0, 1.0),
            units: Units::Probability,
        }
    }

    fn bits(v: f64) -> Self {
        Self {
            value: v.max(0.0),
            units: Units::BitsPerSecPerHz,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Regime {
    /// δ ≈ 0: minimum-interference selection.
    MinInterference,
    /// δ ≈ 1: maximum-data-gain selection.
    MaxGain,
    Interior(DerivedWeights),
}

fn regime(params: &SystemParams, weight: SelectionWeight) -> Regime {
    let delta = weight.delta();
    if delta <= ENDPOINT_BAND {
        Regime::MinInterference
    } else if delta >= 1.0 - ENDPOINT_BAND {
        Regime::MaxGain
    } else {
        Regime::Interior(derive_weights(params, weight))
    }
}

fn binom(n: usize, k: usize) -> f64 {
    binomial_u128(n as u32, k as u32) as f64
}

fn check_nonneg(name: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::domain(name, x, "must be >= 0"))
    } else {
        Ok(())
    }
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, x, "must be finite and > 0"))
    }
}

/// `Σ w_j (1 − e^{−q_j x}) − K·x·e^{−q x}`, with `Σ w_j = 1`.
#[derive(Debug, Clone)]
struct ExpMixture {
    terms: Vec<(f64, f64)>,
    ramp: Option<(f64, f64)>,
}

impl ExpMixture {
    fn single(rate: f64) -> Self {
        Self {
            terms: vec![(1.0, rate)],
            ramp: None,
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        let mut lower: CompensatedSum = self
            .terms
            .iter()
            .map(|&(w, q)| -w * (-q * x).exp_m1())
            .collect();
        if let Some((k, q)) = self.ramp {
            lower.add(-k * x * (-q * x).exp());
        }
        let lower = lower.value();
        if lower <= 0.5 {
            return lower.clamp(0.0, 1.0);
        }
        // upper tail: 1 − survival stays monotone once F is close to 1
        let mut surv: CompensatedSum = self
            .terms
            .iter()
            .map(|&(w, q)| w * (-q * x).exp())
            .collect();
        if let Some((k, q)) = self.ramp {
            surv.add(k * x * (-q * x).exp());
        }
        (1.0 - surv.value()).clamp(0.0, 1.0)
    }
}

fn data_gain_mixture(params: &SystemParams, w: &DerivedWeights, delta: f64) -> ExpMixture {
    let m = params.num_antennas();
    let gs = params.mean_gain_s();
    let (a, b) = (w.w_s, w.w_p);
    let (c, d) = (w.c(), w.d());
    let beta = delta * w.gamma_bar / (a * b);

    let mut w_beta = CompensatedSum::new();
    w_beta.add(d.powi(m as i32));
    let mut terms = Vec::with_capacity(m + 1);
    let mut ramp = None;
    for k in 0..m {
        let base = m as f64 * binom(m - 1, k) * (-c).powi(k as i32);
        let rate = (k + 1) as f64 / gs;
        if Some(k) == w.degenerate_g {
            let g = k as f64;
            terms.push((base * g / ((g + 1.0) * (g + 1.0)), rate));
            ramp = Some((base * g / ((g + 1.0) * gs), rate));
        } else {
            let coef = base * a / (k as f64 * b - a);
            w_beta.add(coef * d);
            terms.push((-coef / (k + 1) as f64, rate));
        }
    }
    terms.push((w_beta.value(), beta));
    ExpMixture { terms, ramp }
}

fn interference_gain_mixture(params: &SystemParams, w: &DerivedWeights, delta: f64) -> ExpMixture {
    let m = params.num_antennas() as f64;
    let gp = params.mean_gain_p();
    let (a, b, d) = (w.w_s, w.w_p, w.d());
    let eta = (1.0 - delta) * w.gamma_bar / (a * b);
    let nu = m / gp;
    let gap = (m - 1.0) * a - b;
    if gap.abs() <= DEGENERACY_TOLERANCE * w.gamma_bar {
        ExpMixture {
            terms: vec![(1.0, eta)],
            ramp: Some((m * d.powf(m) / gp, eta)),
        }
    } else {
        let k = d.powf(m - 1.0) * b / gap;
        ExpMixture {
            terms: vec![(1.0 + k, eta), (-k, nu)],
            ramp: None,
        }
    }
}

/// CDF of the data-link gain `γ_{s,î}` of the selected antenna.
pub fn cdf_selected_data_gain(
    x: f64,
    params: &SystemParams,
    weight: SelectionWeight,
) -> Result<MetricValue> {
    check_nonneg("x", x)?;
    let gs = params.mean_gain_s();
    let v = match regime(params, weight) {
        Regime::MinInterference => -(-x / gs).exp_m1(),
        Regime::MaxGain => (-(-x / gs).exp_m1()).powi(params.num_antennas() as i32),
        Regime::Interior(w) => data_gain_mixture(params, &w, weight.delta()).cdf(x),
    };
    Ok(MetricValue::probability(v))
}

/// CDF of the interference-link gain `γ_{p,î}` of the selected antenna.
pub fn cdf_selected_interference_gain(
    y: f64,
    params: &SystemParams,
    weight: SelectionWeight,
) -> Result<MetricValue> {
    check_nonneg("y", y)?;
    let gp = params.mean_gain_p();
    let m = params.num_antennas() as f64;
    let mix = match regime(params, weight) {
        Regime::MinInterference => ExpMixture::single(m / gp),
        // the selected antenna is independent of its interference gain
        Regime::MaxGain => ExpMixture::single(1.0 / gp),
        Regime::Interior(w) => interference_gain_mixture(params, &w, weight.delta()),
    };
    Ok(MetricValue::probability(mix.cdf(y)))
}

/// `E(γ_{p,î}) = [M·γ̄^{M−1}·ϖₛ + ϖₚ^M] / (M·γ̄^M) · γ̄ₚ`, evaluated as
/// `(c + d^M/M)·γ̄ₚ`. Always within `[γ̄ₚ/M, γ̄ₚ]`.
pub fn mean_selected_interference_gain(params: &SystemParams, weight: SelectionWeight) -> f64 {
    let w = derive_weights(params, weight);
    let m = params.num_antennas() as f64;
    (w.c() + w.d().powf(m) / m) * params.mean_gain_p()
}

/// Ergodic mutual information of the secondary link at transmit power `p_s`,
/// bits/s/Hz.
pub fn mutual_information(
    p_s: f64,
    params: &SystemParams,
    weight: SelectionWeight,
) -> Result<MetricValue> {
    check_positive("p_s", p_s)?;
    let nats = match regime(params, weight) {
        Regime::MinInterference => rate_single_antenna(p_s, params),
        Regime::MaxGain => rate_max_gain(p_s, params),
        Regime::Interior(w) => rate_interior(p_s, params, &w, weight.delta()),
    };
    Ok(MetricValue::bits(LOG2_E * nats))
}

fn rate_interior(p_s: f64, params: &SystemParams, w: &DerivedWeights, delta: f64) -> f64 {
    let m = params.num_antennas();
    let gs = params.mean_gain_s();
    let snr_inv = params.noise_power() / p_s;
    let (a, b) = (w.w_s, w.w_p);
    let (c, d) = (w.c(), w.d());

    let data_arg = |k: usize| (k + 1) as f64 * snr_inv / gs;
    let cross_arg = delta * w.gamma_bar * snr_inv / (a * b);
    let s_cross = scaled_e1(cross_arg);

    let mut r = CompensatedSum::new();
    // Υ
    r.add(d.powi(m as i32) * s_cross);
    for k in 0..m {
        let lead = m as f64 * binom(m - 1, k) * (-c).powi(k as i32 + 1);
        let s_data = scaled_e1(data_arg(k));
        // −Φ_k
        r.add(-lead / (k + 1) as f64 * s_data);
        if Some(k) == w.degenerate_g {
            // Θ_g
            r.add(-binom(m, k + 1) * (-c).powi(k as i32 + 1));
            r.add(lead * snr_inv / gs * s_data);
        } else {
            // Ψ_k
            let psi = lead * b / (a - k as f64 * b);
            r.add(psi * s_cross);
            r.add(-psi * s_data);
        }
    }
    r.value()
}

/// Max-gain limit (δ → 1): `Σ_{k=0}^{M−1} C(M,k+1)(−1)^k e^{a_k}E₁(a_k)`,
/// `a_k = (k+1)N₀/(γ̄ₛPₛ)`, in nats.
fn rate_max_gain(p_s: f64, params: &SystemParams) -> f64 {
    let m = params.num_antennas();
    let base = params.noise_power() / (params.mean_gain_s() * p_s);
    (0..m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom(m, k + 1) * scaled_e1((k + 1) as f64 * base)
        })
        .collect::<CompensatedSum>()
        .value()
}

/// Single-antenna Rayleigh limit (δ → 0): `e^{a}E₁(a)`, `a = N₀/(γ̄ₛPₛ)`, nats.
fn rate_single_antenna(p_s: f64, params: &SystemParams) -> f64 {
    scaled_e1(params.noise_power() / (params.mean_gain_s() * p_s))
}

/// Mutual information of maximum-data-gain selection, bits/s/Hz.
pub fn mutual_information_limit_delta1(p_s: f64, params: &SystemParams) -> Result<MetricValue> {
    check_positive("p_s", p_s)?;
    Ok(MetricValue::bits(LOG2_E * rate_max_gain(p_s, params)))
}

/// Mutual information of a single Rayleigh link (minimum-interference
/// selection), bits/s/Hz. Independent of `M`.
pub fn mutual_information_limit_delta0(p_s: f64, params: &SystemParams) -> Result<MetricValue> {
    check_positive("p_s", p_s)?;
    Ok(MetricValue::bits(LOG2_E * rate_single_antenna(p_s, params)))
}

/// SNR threshold `2^{r0} − 1` below which a rate of `r0` bits/s/Hz is not
/// supported.
pub fn outage_snr_threshold(r0: f64) -> f64 {
    (r0 * LN_2).exp_m1()
}

/// `P(log₂(1 + Pₛγ_{s,î}/N₀) ≤ r0) = F((2^{r0} − 1)·N₀/Pₛ)`.
pub fn outage_probability(
    p_s: f64,
    r0: f64,
    params: &SystemParams,
    weight: SelectionWeight,
) -> Result<MetricValue> {
    check_positive("p_s", p_s)?;
    check_positive("r0", r0)?;
    let x = outage_snr_threshold(r0) * params.noise_power() / p_s;
    cdf_selected_data_gain(x, params, weight)
}

/// Leading term of the data-gain CDF as `x → 0`.
///
/// `(x/γ̄ₛ)^M` for max-gain selection; `d^{M−1}·x/γ̄ₛ` otherwise, which is
/// `x/((g+1)^{M−1}γ̄ₛ)` on a coincidence `ϖₛ = g·ϖₚ`.
pub fn asymptotic_cdf_small_x(x: f64, params: &SystemParams, weight: SelectionWeight) -> f64 {
    let m = params.num_antennas();
    let gs = params.mean_gain_s();
    if weight.delta() >= 1.0 - ENDPOINT_BAND {
        return (x / gs).powi(m as i32);
    }
    let w = derive_weights(params, weight);
    match w.degenerate_g {
        Some(g) => x / ((g + 1) as f64).powi(m as i32 - 1) / gs,
        None => w.d().powi(m as i32 - 1) * x / gs,
    }
}

/// Density of a single selection metric `Z_i`, a two-sided exponential.
/// Only defined for `0 < δ < 1`.
pub fn pdf_difference_metric(
    z: f64,
    params: &SystemParams,
    weight: SelectionWeight,
) -> Result<f64> {
    let delta = weight.delta();
    if delta <= 0.0 || delta >= 1.0 {
        return Err(Error::domain(
            "delta",
            delta,
            "Z_i is one-sided at the endpoints; use the exponential gain density",
        ));
    }
    if z.is_nan() {
        return Err(Error::domain("z", z, "must not be NaN"));
    }
    let w = derive_weights(params, weight);
    Ok(if z <= 0.0 {
        (z / w.w_p).exp() / w.gamma_bar
    } else {
        (-z / w.w_s).exp() / w.gamma_bar
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize, gs: f64, gp: f64) -> SystemParams {
        SystemParams::new(m, gs, gp, 1.0).unwrap()
    }

    fn w(d: f64) -> SelectionWeight {
        SelectionWeight::new(d).unwrap()
    }

    fn cdf(x: f64, p: &SystemParams, d: f64) -> f64 {
        cdf_selected_data_gain(x, p, w(d)).unwrap().value
    }

    fn cdf_y(y: f64, p: &SystemParams, d: f64) -> f64 {
        cdf_selected_interference_gain(y, p, w(d)).unwrap().value
    }

    fn mi(ps: f64, p: &SystemParams, d: f64) -> f64 {
        mutual_information(ps, p, w(d)).unwrap().value
    }

    #[test]
    fn data_cdf_endpoints() {
        let p = params(2, 1.0, 1.0);
        let want = (1.0 - (-1.0f64).exp()).powi(2);
        assert!((cdf(1.0, &p, 1.0) - want).abs() < 1e-15);
        assert!((want - 0.399_576_400_893_728).abs() < 1e-12);
        let p4 = params(4, 2.0, 1.0);
        assert!((cdf(1.3, &p4, 0.0) - (1.0 - (-0.65f64).exp())).abs() < 1e-15);
    }

    // Values below come from adaptive quadrature of the defining double
    // integral F(x) = M ∫₀ˣ f_X(t) E[F_Z(δt − B)^{M−1}] dt, not from the
    // closed form.
    #[test]
    fn data_cdf_degenerate_branch_matches_integral() {
        let p = params(2, 1.0, 1.0);
        assert!((cdf(1.0, &p, 0.5) - 0.467_244_042_512_034_1).abs() < 1e-12);
    }

    #[test]
    fn interference_cdf_matches_integral() {
        let p = params(2, 2.0, 1.0);
        assert!((cdf_y(0.5, &p, 0.3) - 0.550_666_360_495_542_0).abs() < 1e-12);
    }

    #[test]
    fn interference_cdf_endpoints() {
        let p = params(4, 3.0, 2.0);
        assert!((cdf_y(0.7, &p, 0.0) - (1.0 - (-4.0 * 0.7 / 2.0f64).exp())).abs() < 1e-15);
        assert!((cdf_y(0.7, &p, 1.0) - (1.0 - (-0.7 / 2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn mean_interference_examples() {
        assert!(
            (mean_selected_interference_gain(&params(4, 1.0, 1.0), w(0.0)) - 0.25).abs() < 1e-15
        );
        assert_eq!(
            mean_selected_interference_gain(&params(4, 3.0, 1.0), w(1.0)),
            1.0
        );
        assert!(
            (mean_selected_interference_gain(&params(2, 1.0, 1.0), w(0.5)) - 0.625).abs() < 1e-15
        );
    }

    #[test]
    fn mi_single_antenna_reference() {
        // e·E₁(1)·log₂e
        let v = mutual_information_limit_delta0(1.0, &params(1, 1.0, 1.0)).unwrap();
        assert!((v.value - 0.860_347_382_270_885_9).abs() < 1e-13);
        assert_eq!(v.units, Units::BitsPerSecPerHz);
        // independent of M
        let v8 = mutual_information_limit_delta0(1.0, &params(8, 1.0, 1.0)).unwrap();
        assert_eq!(v.value, v8.value);
    }

    #[test]
    fn mi_max_gain_reference() {
        // (2eE₁(1) − e²E₁(2))·log₂e
        let v = mutual_information_limit_delta1(1.0, &params(2, 1.0, 1.0))
            .unwrap()
            .value;
        assert!((v - 1.199_407_760_825_865).abs() < 1e-12);
        let v1 = mutual_information_limit_delta1(1.0, &params(1, 1.0, 1.0))
            .unwrap()
            .value;
        assert!((v1 - 0.860_347_382_270_885_9).abs() < 1e-13);
        let v4 = mutual_information_limit_delta1(1.0, &params(4, 1.0, 1.0))
            .unwrap()
            .value;
        assert!(v4 > v);
    }

    // Quadrature of E[log₂(1 + Pₛ·γ_{s,î})] over the defining density.
    #[test]
    fn mi_interior_matches_integral() {
        let cases = [
            (2.0, 2, 1.0, 0.5, 1.657_022_888_411_513_2), // degenerate g = 1
            (5.0, 3, 2.0, 0.3, 3.705_831_178_963_546),
            (10.0, 4, 1.0, 0.8, 4.208_750_326_665_370_5),
            (10.0, 4, 1.0, 0.75, 4.188_586_507_618_652), // degenerate g = 3
        ];
        for (ps, m, gs, d, want) in cases {
            let got = mi(ps, &params(m, gs, 1.0), d);
            assert!((got - want).abs() < 1e-9, "M={m} δ={d}: {got} vs {want}");
        }
    }

    #[test]
    fn mi_routes_endpoints() {
        let p = params(3, 2.0, 1.0);
        let d1 = mutual_information_limit_delta1(4.0, &p).unwrap().value;
        let d0 = mutual_information_limit_delta0(4.0, &p).unwrap().value;
        assert_eq!(mi(4.0, &p, 1.0), d1);
        assert_eq!(mi(4.0, &p, 0.0), d0);
        // interior formula approaches the limits
        assert!((mi(4.0, &p, 1.0 - 1e-5) - d1).abs() < 1e-3);
        assert!((mi(4.0, &p, 1e-5) - d0).abs() < 1e-3);
    }

    #[test]
    fn outage_examples() {
        let p = params(2, 1.0, 1.0);
        let v = outage_probability(1.0, 1.0, &p, w(1.0)).unwrap().value;
        assert!((v - 0.399_576_400_893_728).abs() < 1e-12);
        assert!(outage_probability(1e12, 1.0, &p, w(1.0)).unwrap().value < 1e-20);
        assert!(outage_probability(0.0, 1.0, &p, w(1.0)).is_err());
    }

    #[test]
    fn asymptotic_examples() {
        assert!((asymptotic_cdf_small_x(0.01, &params(2, 1.0, 1.0), w(1.0)) - 1e-4).abs() < 1e-18);
        assert!((asymptotic_cdf_small_x(0.01, &params(2, 1.0, 1.0), w(0.5)) - 5e-3).abs() < 1e-18);
    }

    #[test]
    fn asymptotic_ratio_converges() {
        for (m, gs, d) in [
            (2, 1.0, 1.0),
            (4, 1.0, 0.9),
            (2, 1.0, 0.5),
            (4, 2.0, 0.3),
            (3, 1.0, 0.0),
        ] {
            let p = params(m, gs, 1.0);
            let ratio = |x: f64| cdf(x, &p, d) / asymptotic_cdf_small_x(x, &p, w(d));
            let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&x| (ratio(x) - 1.0).abs())
                .collect();
            assert!(errs[2] < errs[0] && errs[2] < 1e-3, "M={m} δ={d}: {errs:?}");
        }
    }

    #[test]
    fn pdf_examples() {
        let p = params(2, 1.0, 1.0);
        assert_eq!(pdf_difference_metric(0.0, &p, w(0.5)).unwrap(), 1.0);
        assert!(pdf_difference_metric(0.3, &p, w(0.0)).is_err());
        assert!(pdf_difference_metric(0.3, &p, w(1.0)).is_err());
    }

    #[test]
    fn domain_errors() {
        let p = params(2, 1.0, 1.0);
        assert!(cdf_selected_data_gain(-1.0, &p, w(0.5)).is_err());
        assert!(cdf_selected_interference_gain(-1e-9, &p, w(0.5)).is_err());
        assert!(mutual_information(-1.0, &p, w(0.5)).is_err());
        assert!(mutual_information(f64::INFINITY, &p, w(0.5)).is_err());
    }

    #[test]
    fn single_antenna_is_independent_of_delta() {
        let p = params(1, 2.0, 0.5);
        for d in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!((cdf(1.0, &p, d) - (1.0 - (-0.5f64).exp())).abs() < 1e-14);
            assert!((mi(3.0, &p, d) - mi(3.0, &p, 1.0)).abs() < 1e-12);
        }
    }
}
