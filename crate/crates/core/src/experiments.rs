//! Scenario configuration, figure-reproduction sweeps and CSV output for the
//! command-line tool.
//!
//! Settings are `key = value` lines with `#` comments. Powers (`p_max_db`,
//! `limit_db`, `noise_db`, `p_s_db`) are given in dB and converted here; the
//! library below this layer is linear throughout.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytic::{mutual_information, outage_probability, MetricValue};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Constraints, SelectionWeight, SystemParams};
use crate::montecarlo::{
    run_sim_with, PowerPolicy, SimConfig, SimReport, DEFAULT_TRIALS, MIN_CALIBRATION_TRIALS,
};
use crate::optimizer::{optimize_delta_with, Objective};
use crate::power::{statistical_power, Binding};
use crate::selection::Strategy;

pub const SWEEP_HEADER: [&str; 10] = [
    "sweep_variable",
    "value",
    "system",
    "delta",
    "p_s",
    "metric_name",
    "metric_value",
    "stderr",
    "trials",
    "seed",
];

pub const PRESETS: [&str; 8] = [
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9",
];

pub const DEFAULT_SEED: u64 = 1;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Flat `key → value` settings. Later insertions override earlier ones, which
/// is how command-line flags take precedence over a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key = value, got '{}'",
                    n + 1,
                    raw.trim()
                ))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            map.insert(normalize_key(k), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(normalize_key(key), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// `self` overlaid with `other`.
    pub fn merged(&self, other: &Settings) -> Settings {
        let mut out = self.clone();
        out.0
            .extend(other.0.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_real(key, v)).transpose()
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    pub fn count_or(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key).map_or(Ok(default), |v| parse_count(key, v))
    }

    pub fn text_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

fn invalid(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("invalid value for '{key}': '{value}' ({why})"))
}

pub fn parse_real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| invalid(key, value, "not a number"))?;
    if v.is_nan() {
        return Err(invalid(key, value, "not a number"));
    }
    Ok(v)
}

/// Non-negative integer; scientific notation such as `1e6` is accepted.
pub fn parse_count(key: &str, value: &str) -> Result<u64> {
    if let Ok(n) = value.trim().parse::<u64>() {
        return Ok(n);
    }
    let v = parse_real(key, value)?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53)) {
        return Err(invalid(key, value, "expected a non-negative integer"));
    }
    Ok(v as u64)
}

/// Static scenario in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub antennas: usize,
    pub mean_gain_s: f64,
    pub mean_gain_p: f64,
    pub noise_power: f64,
    pub p_max: f64,
    pub interference_limit: f64,
    pub r0: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            antennas: 4,
            mean_gain_s: 1.0,
            mean_gain_p: 1.0,
            noise_power: 1.0,
            p_max: 10.0,
            interference_limit: 1.0,
            r0: 1.0,
        }
    }
}

impl Scenario {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let d = Scenario::default();
        let mean_gain_p = s.real_or("mean_gain_p", d.mean_gain_p)?;
        let mean_gain_s = match (s.real("xi")?, s.real("mean_gain_s")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set either 'xi' or 'mean_gain_s', not both".into(),
                ))
            }
            (Some(xi), None) => xi * mean_gain_p,
            (None, Some(g)) => g,
            (None, None) => d.mean_gain_s,
        };
        let antennas = s.count_or("antennas", d.antennas as u64)?;
        let sc = Self {
            antennas: usize::try_from(antennas).unwrap_or(usize::MAX),
            mean_gain_s,
            mean_gain_p,
            noise_power: db_to_linear(s.real_or("noise_db", 0.0)?),
            p_max: db_to_linear(s.real_or("p_max_db", linear_to_db(d.p_max))?),
            interference_limit: db_to_linear(s.real_or("limit_db", 0.0)?),
            r0: s.real_or("r0", d.r0)?,
        };
        sc.params()?;
        sc.constraints()?;
        if !(sc.r0.is_finite() && sc.r0 > 0.0) {
            return Err(Error::domain("r0", sc.r0, "must be finite and > 0"));
        }
        Ok(sc)
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(
            self.antennas,
            self.mean_gain_s,
            self.mean_gain_p,
            self.noise_power,
        )
    }

    pub fn constraints(&self) -> Result<Constraints> {
        Constraints::new(self.p_max, self.interference_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MutualInformation,
    Outage,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MutualInformation => "mi",
            Metric::Outage => "outage",
        }
    }

    pub fn objective(self, r0: f64) -> Objective {
        match self {
            Metric::MutualInformation => Objective::MaxMutualInformation,
            Metric::Outage => Objective::MinOutage { r0 },
        }
    }

    fn from_report(self, r: &SimReport) -> (f64, f64) {
        match self {
            Metric::MutualInformation => (r.mean_mi.mean, r.mean_mi.stderr),
            Metric::Outage => (r.outage.mean, r.outage.stderr),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mi" | "mutual-information" => Ok(Metric::MutualInformation),
            "outage" => Ok(Metric::Outage),
            _ => Err(invalid("metric", s, "expected mi or outage")),
        }
    }
}

/// Analytic metric at a given weight and power.
pub fn analytic_metric(
    metric: Metric,
    p_s: f64,
    sc: &Scenario,
    weight: SelectionWeight,
) -> Result<MetricValue> {
    let params = sc.params()?;
    match metric {
        Metric::MutualInformation => mutual_information(p_s, &params, weight),
        Metric::Outage => outage_probability(p_s, sc.r0, &params, weight),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaChoice {
    Fixed(f64),
    Optimal,
}

impl FromStr for DeltaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("optimal") {
            return Ok(DeltaChoice::Optimal);
        }
        let d = parse_real("delta", s)?;
        SelectionWeight::new(d)?;
        Ok(DeltaChoice::Fixed(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    pub delta: f64,
    pub p_s: f64,
    pub binding: Binding,
    pub metric: Metric,
    pub value: f64,
}

/// Analytic metric of difference selection with the statistics-based power.
pub fn analyze(
    sc: &Scenario,
    choice: DeltaChoice,
    metric: Metric,
    exec: Execution,
) -> Result<Analysis> {
    let params = sc.params()?;
    let constraints = sc.constraints()?;
    let delta = match choice {
        DeltaChoice::Fixed(d) => d,
        DeltaChoice::Optimal => {
            optimize_delta_with(&params, &constraints, metric.objective(sc.r0), exec)?.delta_star
        }
    };
    let weight = SelectionWeight::new(delta)?;
    let power = statistical_power(&params, &constraints, weight);
    let value = analytic_metric(metric, power.p_s, sc, weight)?.value;
    Ok(Analysis {
        delta,
        p_s: power.p_s,
        binding: power.binding,
        metric,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Xi,
    PMaxDb,
    InterferenceLimit,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Xi => "xi",
            SweepVariable::PMaxDb => "p_max_db",
            SweepVariable::InterferenceLimit => "interference_limit",
        }
    }

    /// Scenario at sweep value `v`. A ξ sweep holds `γ̄ₚ = 1`.
    pub fn scenario_at(self, base: &Scenario, v: f64) -> Scenario {
        let mut sc = *base;
        match self {
            SweepVariable::Xi => {
                sc.mean_gain_p = 1.0;
                sc.mean_gain_s = v;
            }
            SweepVariable::PMaxDb => sc.p_max = db_to_linear(v),
            SweepVariable::InterferenceLimit => sc.interference_limit = v,
        }
        sc
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize_key(s).as_str() {
            "xi" => Ok(SweepVariable::Xi),
            "p_max_db" => Ok(SweepVariable::PMaxDb),
            "interference_limit" => Ok(SweepVariable::InterferenceLimit),
            _ => Err(invalid(
                "variable",
                s,
                "expected xi, p_max_db or interference_limit",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            _ => Err(invalid("spacing", s, "expected linear or log")),
        }
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    DsAic,
    RsAic,
    RsPic,
    RsPicInfinite,
    DsDelta0,
    DsDelta1,
    DsOptimal,
}

impl System {
    pub const ALL: [System; 7] = [
        System::DsAic,
        System::RsAic,
        System::RsPic,
        System::RsPicInfinite,
        System::DsDelta0,
        System::DsDelta1,
        System::DsOptimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::DsAic => "DS-AIC",
            System::RsAic => "RS-AIC",
            System::RsPic => "RS-PIC",
            System::RsPicInfinite => "RS-PIC-infinite",
            System::DsDelta0 => "DS-delta0",
            System::DsDelta1 => "DS-delta1",
            System::DsOptimal => "DS-optimal",
        }
    }

    pub fn is_simulated(self) -> bool {
        matches!(self, System::RsAic | System::RsPic | System::RsPicInfinite)
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid("systems", s, "unknown system"))
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub preset: Option<String>,
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub num_points: usize,
    pub spacing: Spacing,
    pub base: Scenario,
    pub systems: Vec<System>,
    pub metric: Metric,
    pub trials: u64,
    pub seed: u64,
}

/// Settings a preset starts from; user settings are overlaid on top.
pub fn preset_settings(name: &str) -> Result<Settings> {
    const XI: &str = "variable = xi\nstart = 0.1\nstop = 100\npoints = 13\nspacing = log\nmean_gain_p = 1\nlimit_db = 0\n";
    const RS: &str = "systems = DS-AIC,RS-AIC,RS-PIC,RS-PIC-infinite\n";
    let body = match name {
        "fig2" | "fig3" => format!(
            "{XI}antennas = 4\np_max_db = 10\nsystems = DS-delta0,DS-delta1,DS-optimal\n"
        ),
        "fig4" | "fig5" => format!("{XI}{RS}antennas = 2\np_max_db = 0\n"),
        "fig6" | "fig7" => format!(
            "{RS}variable = p_max_db\nstart = -20\nstop = 20\npoints = 21\nspacing = linear\nantennas = 2\nmean_gain_s = 1\nmean_gain_p = 1\nlimit_db = 0\n"
        ),
        "fig8" | "fig9" => format!(
            "{RS}variable = interference_limit\nstart = 0.01\nstop = 100\npoints = 21\nspacing = log\nantennas = 2\nmean_gain_s = 1\nmean_gain_p = 1\np_max_db = 5\n"
        ),
        _ => {
            return Err(invalid("preset", name, "expected one of fig2..fig9"));
        }
    };
    let metric = if matches!(name, "fig2" | "fig4" | "fig6" | "fig8") {
        "mi"
    } else {
        "outage"
    };
    let mut s = Settings::parse(&body)?;
    s.set("metric", metric);
    s.set("preset", name);
    Ok(s)
}

impl SweepSpec {
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_settings(&preset_settings(name)?)
    }

    /// Builds a spec from settings; a `preset` key pulls in the preset's
    /// defaults underneath the given settings.
    pub fn from_settings(user: &Settings) -> Result<Self> {
        let s = match user.get("preset") {
            Some(p) => preset_settings(p)?.merged(user),
            None => user.clone(),
        };
        let variable: SweepVariable = s
            .get("variable")
            .ok_or_else(|| Error::Config("sweep needs a preset or a 'variable'".into()))?
            .parse()?;
        let start = s
            .real("start")?
            .ok_or_else(|| Error::Config("sweep needs 'start'".into()))?;
        let stop = s
            .real("stop")?
            .ok_or_else(|| Error::Config("sweep needs 'stop'".into()))?;
        let num_points = s.count_or("points", 11)? as usize;
        let default_spacing = if variable == SweepVariable::PMaxDb {
            "linear"
        } else {
            "log"
        };
        let spacing: Spacing = s.text_or("spacing", default_spacing).parse()?;
        let systems = s
            .text_or("systems", "DS-AIC,RS-AIC,RS-PIC,RS-PIC-infinite")
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<System>>>()?;
        let mut base_settings = s.clone();
        // the swept quantity is set per point
        if variable == SweepVariable::Xi {
            base_settings.0.remove("xi");
            base_settings.0.remove("mean_gain_s");
        }
        let spec = Self {
            preset: s.get("preset").map(str::to_string),
            variable,
            start,
            stop,
            num_points,
            spacing,
            base: Scenario::from_settings(&base_settings)?,
            systems,
            metric: s.text_or("metric", "mi").parse()?,
            trials: s.count_or("trials", DEFAULT_TRIALS)?,
            seed: s.count_or("seed", DEFAULT_SEED)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_points < 2 {
            return Err(invalid(
                "points",
                &self.num_points.to_string(),
                "need at least 2",
            ));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::Config(format!(
                "sweep range must satisfy start < stop (got {} .. {})",
                self.start, self.stop
            )));
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return Err(invalid(
                "start",
                &self.start.to_string(),
                "log spacing needs start > 0",
            ));
        }
        if self.variable != SweepVariable::PMaxDb && self.start <= 0.0 {
            return Err(invalid("start", &self.start.to_string(), "must be > 0"));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("no systems selected".into()));
        }
        if self.systems.iter().any(|s| s.is_simulated())
            && (self.trials == 0 || self.trials > crate::montecarlo::MAX_TRIALS)
        {
            return Err(invalid(
                "trials",
                &self.trials.to_string(),
                "must be in 1..=1e9",
            ));
        }
        Ok(())
    }

    /// Sweep values; both endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.num_points;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i + 1 == n {
                    return self.stop;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => {
                        let (a, b) = (self.start.log10(), self.stop.log10());
                        10f64.powf(a + t * (b - a))
                    }
                }
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        self.preset.as_deref().unwrap_or("sweep")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep_variable: SweepVariable,
    pub value: f64,
    pub system: System,
    pub delta: Option<f64>,
    pub p_s: f64,
    pub metric: Metric,
    pub metric_value: f64,
    pub stderr: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// One sweep cell: `system` evaluated on scenario `sc`.
pub fn evaluate_system(
    system: System,
    sc: &Scenario,
    metric: Metric,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<(Option<f64>, f64, f64, Option<f64>)> {
    let params = sc.params()?;
    let constraints = sc.constraints()?;
    let fixed = |delta: f64| -> Result<(Option<f64>, f64, f64, Option<f64>)> {
        let w = SelectionWeight::new(delta)?;
        let p = statistical_power(&params, &constraints, w);
        let v = analytic_metric(metric, p.p_s, sc, w)?.value;
        Ok((Some(delta), p.p_s, v, None))
    };
    let simulate = |strategy: Strategy, policy: PowerPolicy, constraints: Constraints| {
        let cfg = SimConfig {
            params,
            constraints,
            strategy,
            power_policy: policy,
            trials,
            seed,
            r0: sc.r0,
        };
        run_sim_with(&cfg, exec).map(|r| {
            let (v, se) = metric.from_report(&r);
            (None, r.mean_p_s.mean, v, Some(se))
        })
    };
    match system {
        System::DsDelta0 => fixed(0.0),
        System::DsDelta1 => fixed(1.0),
        System::DsAic | System::DsOptimal => {
            let r = optimize_delta_with(&params, &constraints, metric.objective(sc.r0), exec)?;
            Ok((
                Some(r.delta_star),
                r.p_s_star,
                r.objective_value.value,
                None,
            ))
        }
        System::RsAic => simulate(Strategy::Ratio, PowerPolicy::StatisticalAic, constraints),
        System::RsPic => simulate(Strategy::Ratio, PowerPolicy::InstantaneousPic, constraints),
        System::RsPicInfinite => simulate(
            Strategy::Ratio,
            PowerPolicy::InstantaneousPic,
            Constraints::new(f64::INFINITY, constraints.interference_limit())?,
        ),
    }
}

/// Every (value × system) cell, in value-major order.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let values = spec.values();
    let cells: Vec<(f64, System)> = values
        .iter()
        .flat_map(|&v| spec.systems.iter().map(move |&s| (v, s)))
        .collect();
    exec.map_slice(&cells, |&(value, system)| {
        let sc = spec.variable.scenario_at(&spec.base, value);
        let (delta, p_s, metric_value, stderr) =
            evaluate_system(system, &sc, spec.metric, spec.trials, spec.seed, exec)?;
        let sim = system.is_simulated();
        Ok(SweepRecord {
            sweep_variable: spec.variable,
            value,
            system,
            delta,
            p_s,
            metric: spec.metric,
            metric_value,
            stderr,
            trials: sim.then_some(spec.trials),
            seed: sim.then_some(spec.seed),
        })
    })
    .into_iter()
    .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            r.sweep_variable.name().to_string(),
            r.value.to_string(),
            r.system.name().to_string(),
            opt(r.delta),
            r.p_s.to_string(),
            r.metric.name().to_string(),
            r.metric_value.to_string(),
            opt(r.stderr),
            opt(r.trials),
            opt(r.seed),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar `key=value` text recording everything needed to rerun a sweep.
pub fn sweep_metadata(spec: &SweepSpec) -> String {
    let b = &spec.base;
    let systems: Vec<&str> = spec.systems.iter().map(|s| s.name()).collect();
    let mut m = vec![
        (
            "generator",
            format!("diffsel {}", env!("CARGO_PKG_VERSION")),
        ),
        ("preset", spec.name().to_string()),
        ("sweep_variable", spec.variable.name().to_string()),
        ("start", spec.start.to_string()),
        ("stop", spec.stop.to_string()),
        ("num_points", spec.num_points.to_string()),
        ("spacing", spec.spacing.to_string()),
        ("metric", spec.metric.name().to_string()),
        ("systems", systems.join(",")),
        ("antennas", b.antennas.to_string()),
    ];
    if spec.variable != SweepVariable::Xi {
        m.push(("mean_gain_s", b.mean_gain_s.to_string()));
    }
    m.push(("mean_gain_p", b.mean_gain_p.to_string()));
    m.push(("noise_power", b.noise_power.to_string()));
    if spec.variable != SweepVariable::PMaxDb {
        m.push(("p_max_db", linear_to_db(b.p_max).to_string()));
    }
    if spec.variable != SweepVariable::InterferenceLimit {
        m.push(("interference_limit", b.interference_limit.to_string()));
    }
    m.push(("r0", b.r0.to_string()));
    m.push(("trials", spec.trials.to_string()));
    m.push((
        "calibration_trials",
        MIN_CALIBRATION_TRIALS.max(spec.trials / 10).to_string(),
    ));
    m.push(("seed", spec.seed.to_string()));
    let mut s = String::from("# sweep metadata\n");
    for (k, v) in m {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

/// gnuplot script plotting one curve per system from the sweep CSV. The data
/// file defaults to `data_file` and can be overridden with
/// `gnuplot -e "datafile='other.csv'"`.
pub fn gnuplot_script(spec: &SweepSpec, data_file: &str) -> String {
    let name = spec.name();
    let systems: Vec<&str> = spec.systems.iter().map(|s| s.name()).collect();
    let xlabel = match spec.variable {
        SweepVariable::Xi => "xi = mean_gain_s / mean_gain_p",
        SweepVariable::PMaxDb => "P_max (dB)",
        SweepVariable::InterferenceLimit => "interference limit",
    };
    let ylabel = match spec.metric {
        Metric::MutualInformation => "mutual information (bits/s/Hz)",
        Metric::Outage => "outage probability",
    };
    let mut s = format!(
        "if (!exists(\"datafile\")) datafile = '{data_file}'\n\
         set datafile separator ','\n\
         set terminal pngcairo size 800,600\n\
         set output '{name}.png'\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         set key outside right\n\
         set grid\n"
    );
    if spec.spacing == Spacing::Log {
        s.push_str("set logscale x\n");
    }
    if spec.metric == Metric::Outage {
        s.push_str("set logscale y\n");
    }
    s.push_str(&format!(
        "systems = \"{}\"\n\
         plot for [sys in systems] datafile skip 1 using 2:(strcol(3) eq sys ? $7 : NaN) \
         with linespoints title sys\n",
        systems.join(" ")
    ));
    s
}

/// Paths for the sidecar files next to a sweep CSV.
pub fn sidecar_paths(csv_path: &Path) -> (PathBuf, PathBuf) {
    let mut meta = csv_path.as_os_str().to_owned();
    meta.push(".meta");
    (PathBuf::from(meta), csv_path.with_extension("gp"))
}

pub const SIM_HEADER: [&str; 22] = [
    "strategy",
    "delta",
    "policy",
    "trials",
    "seed",
    "mean_mi",
    "mean_mi_stderr",
    "outage",
    "outage_stderr",
    "mean_interference",
    "mean_interference_stderr",
    "mean_selected_gain_s",
    "mean_selected_gain_s_stderr",
    "mean_selected_gain_p",
    "mean_selected_gain_p_stderr",
    "mean_p_s",
    "mean_p_s_stderr",
    "calibration_trials",
    "calibration_mean_gain_p",
    "calibration_stderr",
    "calibration_p_s",
    "r0",
];

pub fn policy_name(p: PowerPolicy) -> String {
    match p {
        PowerPolicy::StatisticalAic => "statistical-aic".into(),
        PowerPolicy::InstantaneousPic => "instantaneous-pic".into(),
        PowerPolicy::Fixed(_) => "fixed".into(),
    }
}

pub fn write_sim_csv<W: Write>(cfg: &SimConfig, r: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIM_HEADER)?;
    let strategy = match cfg.strategy {
        Strategy::Ratio => "ratio",
        Strategy::Difference(_) => "difference",
    };
    let cal = r.calibration;
    w.write_record([
        strategy.to_string(),
        opt(cfg.strategy.delta()),
        policy_name(cfg.power_policy),
        r.trials_used.to_string(),
        cfg.seed.to_string(),
        r.mean_mi.mean.to_string(),
        r.mean_mi.stderr.to_string(),
        r.outage.mean.to_string(),
        r.outage.stderr.to_string(),
        r.mean_interference.mean.to_string(),
        r.mean_interference.stderr.to_string(),
        r.mean_selected_gain_s.mean.to_string(),
        r.mean_selected_gain_s.stderr.to_string(),
        r.mean_selected_gain_p.mean.to_string(),
        r.mean_selected_gain_p.stderr.to_string(),
        r.mean_p_s.mean.to_string(),
        r.mean_p_s.stderr.to_string(),
        opt(cal.map(|c| c.trials)),
        opt(cal.map(|c| c.mean_gain_p.mean)),
        opt(cal.map(|c| c.mean_gain_p.stderr)),
        opt(cal.map(|c| c.p_s)),
        cfg.r0.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        for db in [-20.0, -3.0, 0.0, 5.0, 10.0, 37.5] {
            let back = linear_to_db(db_to_linear(db));
            assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }
        assert_eq!(db_to_linear(f64::INFINITY), f64::INFINITY);
        assert_eq!(db_to_linear(10.0), 10.0);
    }

    #[test]
    fn settings_parsing() {
        let s = Settings::parse("# scenario\nantennas = 2 # two\n\nP-MAX-DB= inf\n").unwrap();
        assert_eq!(s.get("antennas"), Some("2"));
        assert_eq!(s.real("p_max_db").unwrap(), Some(f64::INFINITY));
        assert!(Settings::parse("antennas 2").is_err());
        assert!(Settings::parse("= 2").is_err());
        let mut flags = Settings::default();
        flags.set("antennas", "8");
        assert_eq!(s.merged(&flags).get("antennas"), Some("8"));
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("trials", "1e6").unwrap(), 1_000_000);
        assert_eq!(
            parse_count("seed", "18446744073709551615").unwrap(),
            u64::MAX
        );
        assert!(parse_count("trials", "1.5").is_err());
        assert!(parse_count("trials", "-3").is_err());
        assert!(parse_count("trials", "abc").is_err());
    }

    #[test]
    fn scenario_from_settings() {
        let sc = Scenario::from_settings(&Settings::default()).unwrap();
        assert_eq!(sc, Scenario::default());
        let s = Settings::parse("xi = 10\nmean_gain_p = 2\np_max_db = inf\nlimit_db = 3").unwrap();
        let sc = Scenario::from_settings(&s).unwrap();
        assert_eq!(sc.mean_gain_s, 20.0);
        assert!(sc.p_max.is_infinite());
        assert!((sc.interference_limit - 1.9952623149688795).abs() < 1e-15);
        let bad = Settings::parse("xi = 1\nmean_gain_s = 1").unwrap();
        assert!(Scenario::from_settings(&bad).is_err());
        assert!(Scenario::from_settings(&Settings::parse("antennas = 0").unwrap()).is_err());
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let spec = SweepSpec::preset(name).unwrap();
            assert_eq!(spec.values().len(), spec.num_points);
        }
        let f4 = SweepSpec::preset("fig4").unwrap();
        assert_eq!(f4.variable, SweepVariable::Xi);
        assert_eq!((f4.start, f4.stop, f4.spacing), (0.1, 100.0, Spacing::Log));
        assert_eq!(f4.base.antennas, 2);
        assert_eq!(f4.base.p_max, 1.0);
        assert_eq!(f4.metric, Metric::MutualInformation);
        assert_eq!(f4.systems.len(), 4);
        let f8 = SweepSpec::preset("fig9").unwrap();
        assert_eq!(f8.variable, SweepVariable::InterferenceLimit);
        assert!((linear_to_db(f8.base.p_max) - 5.0).abs() < 1e-12);
        assert_eq!(f8.metric, Metric::Outage);
        assert!(SweepSpec::preset("fig10").is_err());
    }

    #[test]
    fn user_settings_override_preset() {
        let mut s = Settings::default();
        s.set("preset", "fig2");
        s.set("points", "2");
        s.set("xi", "5");
        let spec = SweepSpec::from_settings(&s).unwrap();
        assert_eq!(spec.num_points, 2);
        assert_eq!(spec.values(), vec![0.1, 100.0]);
        s.set("points", "1");
        assert!(SweepSpec::from_settings(&s).is_err());
    }

    #[test]
    fn analytic_sweep_matches_library_bit_for_bit() {
        let mut s = preset_settings("fig2").unwrap();
        s.set("points", "3");
        let spec = SweepSpec::from_settings(&s).unwrap();
        let recs = run_sweep(&spec, Execution::Sequential).unwrap();
        assert_eq!(recs.len(), 9);
        let r = recs.iter().find(|r| r.system == System::DsDelta1).unwrap();
        let sc = SweepVariable::Xi.scenario_at(&spec.base, r.value);
        let params = sc.params().unwrap();
        let w = SelectionWeight::MAX_GAIN;
        let p = statistical_power(&params, &sc.constraints().unwrap(), w).p_s;
        assert_eq!(
            r.metric_value,
            mutual_information(p, &params, w).unwrap().value
        );
        assert_eq!(r.stderr, None);
        let mut buf = Vec::new();
        write_sweep_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "sweep_variable,value,system,delta,p_s,metric_name,metric_value,stderr,trials,seed\n"
        ));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn delta_choice_parsing() {
        assert_eq!(
            "optimal".parse::<DeltaChoice>().unwrap(),
            DeltaChoice::Optimal
        );
        assert_eq!(
            "0.25".parse::<DeltaChoice>().unwrap(),
            DeltaChoice::Fixed(0.25)
        );
        assert!("1.5".parse::<DeltaChoice>().is_err());
    }

    #[test]
    fn sidecars() {
        let spec = SweepSpec::preset("fig5").unwrap();
        let meta = sweep_metadata(&spec);
        assert!(meta.contains("start=0.1\n") && meta.contains("stop=100\n"));
        assert!(meta.contains("calibration_trials=100000\n"));
        let gp = gnuplot_script(&spec, "fig5.csv");
        assert!(gp.contains("datafile = 'fig5.csv'") && gp.contains("set logscale y"));
        let (m, g) = sidecar_paths(Path::new("out/fig5.csv"));
        assert_eq!(m, PathBuf::from("out/fig5.csv.meta"));
        assert_eq!(g, PathBuf::from("out/fig5.gp"));
    }
}
