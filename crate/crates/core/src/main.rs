use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffsel::exec::{with_workers, Execution};
use diffsel::experiments::{
    analyze, gnuplot_script, linear_to_db, parse_real, run_sweep, sidecar_paths, sweep_metadata,
    write_sim_csv, write_sweep_csv, DeltaChoice, Metric, Scenario, Settings, SweepSpec,
    DEFAULT_SEED,
};
use diffsel::montecarlo::{run_sim_with, PowerPolicy, SimConfig, DEFAULT_TRIALS};
use diffsel::optimizer::{objective_curve_with, optimize_delta_with};
use diffsel::selection::Strategy;
use diffsel::Error;

const KNOWN_KEYS: &[&str] = &[
    "antennas",
    "xi",
    "mean_gain_s",
    "mean_gain_p",
    "noise_db",
    "p_max_db",
    "limit_db",
    "r0",
    "delta",
    "metric",
    "strategy",
    "policy",
    "p_s_db",
    "trials",
    "seed",
    "preset",
    "variable",
    "start",
    "stop",
    "points",
    "spacing",
    "systems",
    "curve",
];

#[derive(Parser)]
#[command(
    name = "diffsel",
    version,
    about = "Difference antenna selection for underlay cognitive radio"
)]
struct Cli {
    /// key = value scenario file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// CSV output path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ScenarioArgs {
    #[arg(long)]
    antennas: Option<String>,
    /// mean-gain ratio; sets mean_gain_s = xi * mean_gain_p
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    mean_gain_s: Option<String>,
    #[arg(long)]
    mean_gain_p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    noise_db: Option<String>,
    /// peak transmit power in dB; `inf` for no cap
    #[arg(long, visible_alias = "pmax-db", allow_hyphen_values = true)]
    p_max_db: Option<String>,
    /// interference limit in dB
    #[arg(long, allow_hyphen_values = true)]
    limit_db: Option<String>,
    /// outage rate threshold in bits/s/Hz
    #[arg(long)]
    r0: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form metric at a given or optimal selection weight
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// weight in [0, 1] or `optimal`
        #[arg(long)]
        delta: Option<String>,
        /// mi | outage
        #[arg(long)]
        metric: Option<String>,
    },
    /// Figure-data sweep over xi, P_max or the interference limit
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// fig2 .. fig9
        #[arg(long)]
        preset: Option<String>,
        /// xi | p_max_db | interference_limit
        #[arg(long)]
        variable: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        stop: Option<String>,
        #[arg(long)]
        points: Option<String>,
        /// linear | log
        #[arg(long)]
        spacing: Option<String>,
        /// comma-separated, e.g. DS-AIC,RS-PIC
        #[arg(long)]
        systems: Option<String>,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        trials: Option<String>,
    },
    /// Monte Carlo run of one selection strategy and power policy
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// difference | ratio | max-gain | min-interference
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        /// statistical-aic | instantaneous-pic | fixed
        #[arg(long)]
        policy: Option<String>,
        /// transmit power in dB for the fixed policy
        #[arg(long, allow_hyphen_values = true)]
        p_s_db: Option<String>,
        #[arg(long)]
        trials: Option<String>,
    },
    /// Joint selection-weight and power optimization
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        metric: Option<String>,
        /// also write the objective on this many uniformly spaced weights
        #[arg(long)]
        curve: Option<String>,
    },
}

fn put(s: &mut Settings, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        s.set(key, v.clone());
    }
}

impl ScenarioArgs {
    fn apply(&self, s: &mut Settings) {
        put(s, "antennas", &self.antennas);
        put(s, "xi", &self.xi);
        put(s, "mean_gain_s", &self.mean_gain_s);
        put(s, "mean_gain_p", &self.mean_gain_p);
        put(s, "noise_db", &self.noise_db);
        put(s, "p_max_db", &self.p_max_db);
        put(s, "limit_db", &self.limit_db);
        put(s, "r0", &self.r0);
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> diffsel::Result<()> {
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    put(&mut settings, "seed", &cli.seed);
    match &cli.command {
        Command::Analyze {
            scenario,
            delta,
            metric,
        } => {
            scenario.apply(&mut settings);
            put(&mut settings, "delta", delta);
            put(&mut settings, "metric", metric);
        }
        Command::Sweep {
            scenario,
            preset,
            variable,
            start,
            stop,
            points,
            spacing,
            systems,
            metric,
            trials,
        } => {
            scenario.apply(&mut settings);
            for (k, v) in [
                ("preset", preset),
                ("variable", variable),
                ("start", start),
                ("stop", stop),
                ("points", points),
                ("spacing", spacing),
                ("systems", systems),
                ("metric", metric),
                ("trials", trials),
            ] {
                put(&mut settings, k, v);
            }
        }
        Command::Simulate {
            scenario,
            strategy,
            delta,
            policy,
            p_s_db,
            trials,
        } => {
            scenario.apply(&mut settings);
            put(&mut settings, "strategy", strategy);
            put(&mut settings, "delta", delta);
            put(&mut settings, "policy", policy);
            put(&mut settings, "p_s_db", p_s_db);
            put(&mut settings, "trials", trials);
        }
        Command::Optimize {
            scenario,
            metric,
            curve,
        } => {
            scenario.apply(&mut settings);
            put(&mut settings, "metric", metric);
            put(&mut settings, "curve", curve);
        }
    }
    if let Some(k) = settings.keys().find(|k| !KNOWN_KEYS.contains(k)) {
        return Err(Error::Config(format!("unknown setting '{k}'")));
    }
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be >= 1".into()));
    }
    let out = cli.out.as_deref();
    with_workers(cli.workers, || match &cli.command {
        Command::Analyze { .. } => cmd_analyze(&settings, out),
        Command::Sweep { .. } => cmd_sweep(&settings, out),
        Command::Simulate { .. } => cmd_simulate(&settings, out),
        Command::Optimize { .. } => cmd_optimize(&settings, out),
    })
}

fn create(path: &Path) -> diffsel::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_analyze(s: &Settings, out: Option<&Path>) -> diffsel::Result<()> {
    let sc = Scenario::from_settings(s)?;
    let choice: DeltaChoice = s.text_or("delta", "optimal").parse()?;
    let metric: Metric = s.text_or("metric", "mi").parse()?;
    let a = analyze(&sc, choice, metric, Execution::Parallel)?;
    println!("delta      {}", a.delta);
    println!("p_s        {} ({} dB)", a.p_s, linear_to_db(a.p_s));
    println!("binding    {}", a.binding);
    println!("{:<10} {}", metric.name(), a.value);
    if let Some(path) = out {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["delta", "p_s", "binding", "metric_name", "metric_value"])?;
        w.write_record([
            a.delta.to_string(),
            a.p_s.to_string(),
            a.binding.to_string(),
            metric.name().to_string(),
            a.value.to_string(),
        ])?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_sweep(s: &Settings, out: Option<&Path>) -> diffsel::Result<()> {
    let spec = SweepSpec::from_settings(s)?;
    let records = run_sweep(&spec, Execution::Parallel)?;
    match out {
        Some(path) => {
            write_sweep_csv(&records, create(path)?)?;
            let (meta, gp) = sidecar_paths(path);
            std::fs::write(meta, sweep_metadata(&spec))?;
            let data = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            std::fs::write(gp, gnuplot_script(&spec, &data))?;
            println!("wrote {} records to {}", records.len(), path.display());
        }
        None => write_sweep_csv(&records, io::stdout().lock())?,
    }
    Ok(())
}

fn sim_config(s: &Settings) -> diffsel::Result<SimConfig> {
    let trials = s.count_or("trials", DEFAULT_TRIALS)?;
    if trials == 0 {
        return Err(Error::Config("--trials must be >= 1".into()));
    }
    let sc = Scenario::from_settings(s)?;
    let delta = s.real("delta")?;
    let strategy = Strategy::from_name(s.text_or("strategy", "difference"), delta)?;
    let power_policy = match s.text_or("policy", "statistical-aic") {
        "statistical-aic" => PowerPolicy::StatisticalAic,
        "instantaneous-pic" => PowerPolicy::InstantaneousPic,
        "fixed" => {
            let db = s
                .get("p_s_db")
                .ok_or_else(|| Error::Config("policy 'fixed' requires --p-s-db".into()))?;
            PowerPolicy::Fixed(diffsel::experiments::db_to_linear(parse_real(
                "p_s_db", db,
            )?))
        }
        other => return Err(Error::Config(format!("unknown policy '{other}'"))),
    };
    Ok(SimConfig {
        params: sc.params()?,
        constraints: sc.constraints()?,
        strategy,
        power_policy,
        trials,
        seed: s.count_or("seed", DEFAULT_SEED)?,
        r0: sc.r0,
    })
}

fn cmd_simulate(s: &Settings, out: Option<&Path>) -> diffsel::Result<()> {
    let cfg = sim_config(s)?;
    let r = run_sim_with(&cfg, Execution::Parallel)?;
    let mut so = io::stdout().lock();
    writeln!(so, "{:<22}{}", "strategy", cfg.strategy)?;
    writeln!(so, "{:<22}{}", "trials", r.trials_used)?;
    for (name, e) in [
        ("mean_mi", r.mean_mi),
        ("outage", r.outage),
        ("mean_interference", r.mean_interference),
        ("mean_selected_gain_s", r.mean_selected_gain_s),
        ("mean_selected_gain_p", r.mean_selected_gain_p),
        ("mean_p_s", r.mean_p_s),
    ] {
        writeln!(so, "{name:<22}{} ± {}", e.mean, e.stderr)?;
    }
    if let Some(c) = r.calibration {
        writeln!(
            so,
            "{:<22}{} draws, mean_gain_p {} ± {}, p_s {}",
            "calibration", c.trials, c.mean_gain_p.mean, c.mean_gain_p.stderr, c.p_s
        )?;
    }
    if let Some(path) = out {
        write_sim_csv(&cfg, &r, create(path)?)?;
    }
    Ok(())
}

fn cmd_optimize(s: &Settings, out: Option<&Path>) -> diffsel::Result<()> {
    let sc = Scenario::from_settings(s)?;
    let metric: Metric = s.text_or("metric", "mi").parse()?;
    let (params, constraints) = (sc.params()?, sc.constraints()?);
    let objective = metric.objective(sc.r0);
    let r = optimize_delta_with(&params, &constraints, objective, Execution::Parallel)?;
    println!("objective    {}", r.objective);
    println!("delta_star   {}", r.delta_star);
    println!(
        "p_s_star     {} ({} dB)",
        r.p_s_star,
        linear_to_db(r.p_s_star)
    );
    println!("binding      {}", r.power.binding);
    println!("value        {}", r.objective_value.value);
    println!("evaluations  {}", r.evaluations);
    if let Some(path) = out {
        let n = s.count_or("curve", 101)? as usize;
        let curve = objective_curve_with(&params, &constraints, objective, n, Execution::Parallel)?;
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["delta", "p_s", "metric_name", "metric_value"])?;
        for p in curve {
            w.write_record([
                p.delta.to_string(),
                p.p_s.to_string(),
                metric.name().to_string(),
                p.value.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
