//! Monte Carlo engine for the secondary link.
//!
//! Trials are grouped into blocks of [`TRIALS_PER_BLOCK`]; block `b` draws from
//! its own counter-addressed stream, so a block's partial statistics depend
//! only on `(seed, b)`. Partials are merged in block order with Chan's
//! update, which makes every report bit-identical across worker counts.

use std::f64::consts::LOG2_E;

use rand_chacha::ChaCha8Rng;

use crate::analytic::outage_snr_threshold;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{
    Constraints, GainSample, StreamFamily, SystemParams, TrialStreams, TRIALS_PER_BLOCK,
};
use crate::power::{pic_power, statistical_power, Binding};
use crate::selection::Strategy;

pub const MAX_TRIALS: u64 = 1_000_000_000;
pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Lower bound on the number of phase-1 draws used to estimate the mean
/// selected interference gain under ratio selection.
pub const MIN_CALIBRATION_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerPolicy {
    /// Constant power from the average-interference rule. Difference selection
    /// uses the closed form; ratio selection estimates the mean selected
    /// interference gain in a separate calibration run.
    StatisticalAic,
    /// Per-trial power `min{Pmax, ℘/γ_{p,î}}`.
    InstantaneousPic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub constraints: Constraints,
    pub strategy: Strategy,
    pub power_policy: PowerPolicy,
    pub trials: u64,
    pub seed: u64,
    /// Outage rate threshold, bits/s/Hz.
    pub r0: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return Err(Error::Config(format!(
                "trials must be in 1..={MAX_TRIALS}, got {}",
                self.trials
            )));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(Error::domain("r0", self.r0, "must be finite and > 0"));
        }
        if let PowerPolicy::Fixed(p) = self.power_policy {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::domain("p_s", p, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Sample mean with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub trials: u64,
    pub mean_gain_p: Estimate,
    pub p_s: f64,
    pub binding: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    pub mean_mi: Estimate,
    pub outage: Estimate,
    pub mean_interference: Estimate,
    pub mean_selected_gain_s: Estimate,
    pub mean_selected_gain_p: Estimate,
    pub mean_p_s: Estimate,
    pub trials_used: u64,
    /// Phase-1 result of a ratio-selection run under the average constraint.
    pub calibration: Option<Calibration>,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.n += other.n;
    }

    fn estimate(&self) -> Estimate {
        let stderr = if self.n > 1 {
            let n = self.n as f64;
            (self.m2.max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            stderr,
        }
    }
}

/// Runs `f(rng, trials_in_block)` for every block of `trials`, returning
/// results in block order.
fn for_each_block<A, F>(
    seed: u64,
    family: StreamFamily,
    trials: u64,
    exec: Execution,
    f: F,
) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> A + Sync + Send,
{
    let streams = TrialStreams::new(seed);
    let blocks = trials.div_ceil(TRIALS_PER_BLOCK);
    exec.map(blocks as usize, |b| {
        let b = b as u64;
        let n = (trials - b * TRIALS_PER_BLOCK).min(TRIALS_PER_BLOCK);
        let mut rng = streams.block(family, b);
        f(&mut rng, n)
    })
}

#[derive(Debug, Clone, Copy)]
enum TrialPower {
    Constant(f64),
    Peak,
}

fn calibrate_ratio_aic(config: &SimConfig, exec: Execution) -> Calibration {
    let trials = MIN_CALIBRATION_TRIALS.max(config.trials / 10);
    let params = &config.params;
    let parts = for_each_block(
        config.seed,
        StreamFamily::Calibration,
        trials,
        exec,
        |rng, n| {
            let mut acc = Moments::default();
            let mut g = GainSample::zeroed(params.num_antennas());
            for _ in 0..n {
                g.resample(params, rng);
                let i = Strategy::Ratio.select_index(&g.gains_s, &g.gains_p);
                acc.push(g.gains_p[i]);
            }
            acc
        },
    );
    let mut total = Moments::default();
    parts.iter().for_each(|m| total.merge(m));
    let mean_gain_p = total.estimate();
    let limit = config.constraints.interference_limit();
    let p_int = limit / mean_gain_p.mean;
    let (p_s, binding) = if p_int <= config.constraints.p_max() {
        (p_int, Binding::Interference)
    } else {
        (config.constraints.p_max(), Binding::PeakPower)
    };
    Calibration {
        trials,
        mean_gain_p,
        p_s,
        binding,
    }
}

pub fn run_sim(config: &SimConfig) -> Result<SimReport> {
    run_sim_with(config, Execution::default())
}

pub fn run_sim_with(config: &SimConfig, exec: Execution) -> Result<SimReport> {
    config.validate()?;
    let mut calibration = None;
    let power = match (config.power_policy, config.strategy) {
        (PowerPolicy::Fixed(p), _) => TrialPower::Constant(p),
        (PowerPolicy::InstantaneousPic, _) => TrialPower::Peak,
        (PowerPolicy::StatisticalAic, Strategy::Difference(w)) => {
            TrialPower::Constant(statistical_power(&config.params, &config.constraints, w).p_s)
        }
        (PowerPolicy::StatisticalAic, Strategy::Ratio) => {
            let cal = calibrate_ratio_aic(config, exec);
            calibration = Some(cal);
            TrialPower::Constant(cal.p_s)
        }
    };

    const MI: usize = 0;
    const OUT: usize = 1;
    const INTF: usize = 2;
    const GS: usize = 3;
    const GP: usize = 4;
    const PS: usize = 5;

    let params = &config.params;
    let strategy = config.strategy;
    let n0 = params.noise_power();
    let threshold = outage_snr_threshold(config.r0);
    let limit = config.constraints.interference_limit();
    let p_max = config.constraints.p_max();

    let parts = for_each_block(
        config.seed,
        StreamFamily::Main,
        config.trials,
        exec,
        |rng, n| {
            let mut acc = [Moments::default(); 6];
            let mut g = GainSample::zeroed(params.num_antennas());
            for _ in 0..n {
                g.resample(params, rng);
                let i = strategy.select_index(&g.gains_s, &g.gains_p);
                let (gs, gp) = (g.gains_s[i], g.gains_p[i]);
                let (p_s, interference) = match power {
                    TrialPower::Constant(p) => (p, p * gp),
                    TrialPower::Peak => {
                        let d = pic_power(gp, limit, p_max);
                        match d.binding {
                            Binding::Interference => (d.p_s, limit),
                            _ => (d.p_s, d.p_s * gp),
                        }
                    }
                };
                let snr = p_s * gs / n0;
                acc[MI].push(snr.ln_1p() * LOG2_E);
                acc[OUT].push(if snr <= threshold { 1.0 } else { 0.0 });
                acc[INTF].push(interference);
                acc[GS].push(gs);
                acc[GP].push(gp);
                acc[PS].push(p_s);
            }
            acc
        },
    );

    let mut total = [Moments::default(); 6];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(SimReport {
        mean_mi: total[MI].estimate(),
        outage: total[OUT].estimate(),
        mean_interference: total[INTF].estimate(),
        mean_selected_gain_s: total[GS].estimate(),
        mean_selected_gain_p: total[GP].estimate(),
        mean_p_s: total[PS].estimate(),
        trials_used: config.trials,
        calibration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Data,
    Interference,
}

/// Empirical CDFs of both selected-link gains plus their sample means, from a
/// single pass over the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedGainStats {
    pub cdf_s: Vec<f64>,
    pub cdf_p: Vec<f64>,
    pub mean_s: Estimate,
    pub mean_p: Estimate,
    pub trials: u64,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| x.is_nan()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(
            "x_grid must be sorted ascending without NaN".into(),
        ));
    }
    Ok(())
}

/// Fraction of trials whose selected-link gain is `≤ x` for each `x` in the
/// sorted `x_grid`. Power settings in `config` are irrelevant here.
pub fn empirical_cdf(config: &SimConfig, link: Link, x_grid: &[f64]) -> Result<Vec<f64>> {
    let (gs, gp): (&[f64], &[f64]) = match link {
        Link::Data => (x_grid, &[]),
        Link::Interference => (&[], x_grid),
    };
    let stats = selected_gain_stats(config, gs, gp, Execution::default())?;
    Ok(match link {
        Link::Data => stats.cdf_s,
        Link::Interference => stats.cdf_p,
    })
}

pub fn selected_gain_stats(
    config: &SimConfig,
    grid_s: &[f64],
    grid_p: &[f64],
    exec: Execution,
) -> Result<SelectedGainStats> {
    config.validate()?;
    check_grid(grid_s)?;
    check_grid(grid_p)?;
    let params = &config.params;
    let strategy = config.strategy;

    // counts[j] = number of gains in (grid[j-1], grid[j]]; the extra last
    // slot collects gains above the grid
    let parts = for_each_block(
        config.seed,
        StreamFamily::Main,
        config.trials,
        exec,
        |rng, n| {
            let mut count_s = vec![0u64; grid_s.len() + 1];
            let mut count_p = vec![0u64; grid_p.len() + 1];
            let mut mom = [Moments::default(); 2];
            let mut g = GainSample::zeroed(params.num_antennas());
            for _ in 0..n {
                g.resample(params, rng);
                let i = strategy.select_index(&g.gains_s, &g.gains_p);
                let (xs, xp) = (g.gains_s[i], g.gains_p[i]);
                count_s[grid_s.partition_point(|&x| x < xs)] += 1;
                count_p[grid_p.partition_point(|&x| x < xp)] += 1;
                mom[0].push(xs);
                mom[1].push(xp);
            }
            (count_s, count_p, mom)
        },
    );

    let mut count_s = vec![0u64; grid_s.len() + 1];
    let mut count_p = vec![0u64; grid_p.len() + 1];
    let mut mom = [Moments::default(); 2];
    for (cs, cp, m) in &parts {
        count_s.iter_mut().zip(cs).for_each(|(a, b)| *a += b);
        count_p.iter_mut().zip(cp).for_each(|(a, b)| *a += b);
        mom[0].merge(&m[0]);
        mom[1].merge(&m[1]);
    }
    let n = config.trials as f64;
    let cumulate = |counts: &[u64]| -> Vec<f64> {
        let mut run = 0u64;
        counts[..counts.len() - 1]
            .iter()
            .map(|&c| {
                run += c;
                run as f64 / n
            })
            .collect()
    };
    Ok(SelectedGainStats {
        cdf_s: cumulate(&count_s),
        cdf_p: cumulate(&count_p),
        mean_s: mom[0].estimate(),
        mean_p: mom[1].estimate(),
        trials: config.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{mutual_information, outage_probability};
    use crate::model::SelectionWeight;

    fn config(m: usize, strategy: Strategy, policy: PowerPolicy, trials: u64) -> SimConfig {
        SimConfig {
            params: SystemParams::new(m, 1.0, 1.0, 1.0).unwrap(),
            constraints: Constraints::new(10.0, 1.0).unwrap(),
            strategy,
            power_policy: policy,
            trials,
            seed: 7,
            r0: 1.0,
        }
    }

    fn diff(d: f64) -> Strategy {
        Strategy::Difference(SelectionWeight::new(d).unwrap())
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.n, whole.n);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn max_gain_outage_matches_closed_form() {
        let c = config(2, Strategy::max_gain(), PowerPolicy::Fixed(1.0), 200_000);
        let r = run_sim(&c).unwrap();
        let want = (1.0 - (-1.0f64).exp()).powi(2);
        assert!((r.outage.mean - want).abs() <= 3.0 * r.outage.stderr);
        assert_eq!(r.trials_used, 200_000);
    }

    #[test]
    fn fixed_power_matches_analytic() {
        for d in [0.0, 0.3, 0.5, 1.0] {
            let c = config(3, diff(d), PowerPolicy::Fixed(4.0), 200_000);
            let r = run_sim(&c).unwrap();
            let w = SelectionWeight::new(d).unwrap();
            let mi = mutual_information(4.0, &c.params, w).unwrap().value;
            let out = outage_probability(4.0, 1.0, &c.params, w).unwrap().value;
            assert!(
                (r.mean_mi.mean - mi).abs() <= 4.0 * r.mean_mi.stderr,
                "δ={d}"
            );
            assert!(
                (r.outage.mean - out).abs() <= 4.0 * r.outage.stderr,
                "δ={d}"
            );
        }
    }

    #[test]
    fn ratio_pic_without_cap_hits_limit_exactly() {
        let mut c = config(3, Strategy::Ratio, PowerPolicy::InstantaneousPic, 50_000);
        c.constraints = Constraints::new(f64::INFINITY, 1.0).unwrap();
        let r = run_sim(&c).unwrap();
        assert_eq!(r.mean_interference.mean, 1.0);
        assert_eq!(r.mean_interference.stderr, 0.0);
    }

    #[test]
    fn ratio_aic_runs_calibration() {
        let c = config(2, Strategy::Ratio, PowerPolicy::StatisticalAic, 10_000);
        let r = run_sim(&c).unwrap();
        let cal = r.calibration.unwrap();
        assert_eq!(cal.trials, MIN_CALIBRATION_TRIALS);
        assert_eq!(r.mean_p_s.mean, cal.p_s);
        assert!(cal.mean_gain_p.stderr > 0.0);
        let d = run_sim(&config(2, diff(0.5), PowerPolicy::StatisticalAic, 10)).unwrap();
        assert!(d.calibration.is_none());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = config(
            4,
            Strategy::Ratio,
            PowerPolicy::StatisticalAic,
            3 * TRIALS_PER_BLOCK + 17,
        );
        let a = run_sim_with(&c, Execution::Sequential).unwrap();
        let b = run_sim_with(&c, Execution::Parallel).unwrap();
        let e =
            crate::exec::with_workers(Some(3), || run_sim_with(&c, Execution::Parallel).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, e);
        let mut c2 = c;
        c2.seed = 8;
        assert_ne!(run_sim(&c2).unwrap().mean_mi, a.mean_mi);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(run_sim(&config(2, Strategy::Ratio, PowerPolicy::Fixed(1.0), 0)).is_err());
        assert!(run_sim(&config(
            2,
            Strategy::Ratio,
            PowerPolicy::Fixed(1.0),
            MAX_TRIALS + 1
        ))
        .is_err());
        assert!(run_sim(&config(2, Strategy::Ratio, PowerPolicy::Fixed(-1.0), 10)).is_err());
        let mut c = config(2, Strategy::Ratio, PowerPolicy::Fixed(1.0), 10);
        c.r0 = 0.0;
        assert!(run_sim(&c).is_err());
    }

    #[test]
    fn empirical_cdf_shape() {
        let c = config(2, diff(1.0), PowerPolicy::Fixed(1.0), 100_000);
        assert!(empirical_cdf(&c, Link::Data, &[]).unwrap().is_empty());
        assert!(empirical_cdf(&c, Link::Data, &[1.0, 0.5]).is_err());
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let f = empirical_cdf(&c, Link::Data, &grid).unwrap();
        assert_eq!(f[0], 0.0);
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
        let sup = grid
            .iter()
            .zip(&f)
            .map(|(&x, &e)| (e - (1.0 - (-x).exp()).powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.01, "{sup}");
    }
}
