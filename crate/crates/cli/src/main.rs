use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use craneplan::config::Config;
use craneplan::experiments::{metrics, summarize, sweep, tune_pi, write_sweep_csv};
use craneplan::geometry::verify_trajectory;
use craneplan::io::Provenance;
use craneplan::model::{FrictionVariant, ModelTag};
use craneplan::optimizer::{plan_pipeline, PlanOutcome};
use craneplan::plan::Plan;
use craneplan::simulator::run_closed_loop;
use craneplan::CraneError;

/// Exit status for every failure class.
mod exit {
    pub const FAILURE: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const COLLISION: u8 = 5;
}

#[derive(Parser, Debug)]
#[command(name = "craneplan", version, about = "Friction-aware trajectory planning for 3D overhead cranes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the RRT* seed and the sweep master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Friction model used for planning.
    #[arg(long, global = true, value_enum)]
    variant: Option<Variant>,
    /// Number of collocation intervals.
    #[arg(long, global = true)]
    ncoll: Option<usize>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    Cm,
    Sm,
    Nfm,
}

impl From<Variant> for ModelTag {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Cm => ModelTag::Cm,
            Variant::Sm => ModelTag::Sm,
            Variant::Nfm => ModelTag::Nfm,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan a trajectory: writes plan.csv and solve_report.json.
    Plan,
    /// Simulate a plan in closed loop: writes sim_log.csv and run_metrics.json.
    Simulate {
        /// Plan CSV to track; planned from the configuration when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Tune the PI gains on a plan (the no-dry-friction plan by default): writes gains.json.
    Tune {
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Plan with every friction model and run the perturbation sweep:
    /// writes sweep.csv and sweep_summary.json.
    Sweep,
    /// Check a plan against the scenario obstacles: writes collision_report.json.
    Verify {
        #[arg(long)]
        plan: PathBuf,
        /// Required clearance [m]; zero tests for contact.
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 10)]
        oversample: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Crane(CraneError),
    Collision(String),
}

impl From<CraneError> for CliError {
    fn from(e: CraneError) -> Self {
        CliError::Crane(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Crane(e.into())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Collision(_) => exit::COLLISION,
            CliError::Crane(e) => match e.root() {
                CraneError::Config(_) | CraneError::InvalidParams(_) | CraneError::InvalidInput(_) => exit::PARSE,
                CraneError::Infeasible(_) | CraneError::NoPathFound { .. } => exit::INFEASIBLE,
                CraneError::Verification(_) => exit::COLLISION,
                CraneError::Io(_) | CraneError::RetriesExhausted(_) => exit::FAILURE,
                _ => exit::SOLVER,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Crane(e) => write!(f, "{e}"),
            CliError::Collision(m) => write!(f, "collision detected: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config(common: &Common) -> CliResult<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.planner.seed.rng_seed = seed;
        cfg.sweep.master_seed = seed;
    }
    if let Some(v) = common.variant {
        cfg.variant = v.into();
    }
    if let Some(n) = common.ncoll {
        cfg.planner.intervals = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(&cli.common)?;
    let out = &cli.common.out;
    fs::create_dir_all(out)?;
    let text = cfg.to_toml()?;
    match &cli.command {
        Command::Plan => {
            let prov = Provenance::from_config_text(&text, cfg.planner.seed.rng_seed);
            let outcome = plan(&cfg, cfg.variant)?;
            write_plan(&outcome.plan, &out.join("plan.csv"), &prov)?;
            write_json(&out.join("solve_report.json"), &prov, &outcome)?;
            print!(
                "{} plan: T = {:.3} s, {} SQP iterations",
                cfg.variant.as_str(),
                outcome.t_end,
                outcome.report.iterations
            );
            if outcome.verification.min_clearance.is_finite() {
                print!(
                    ", {:.4} m clearance beyond the {} m margin",
                    outcome.verification.min_clearance, cfg.planner.margin
                );
            }
            println!();
        }
        Command::Simulate { plan: path } => {
            let prov = Provenance::from_config_text(&text, cfg.planner.seed.rng_seed);
            let plan = match path {
                Some(p) => read_plan(p, &cfg)?,
                None => plan(&cfg, cfg.variant)?.plan,
            };
            let log = run_closed_loop(&plan, &cfg.params, &cfg.gains, &cfg.sim)?;
            let m = metrics(&log, &plan, &cfg.scenario.obstacles, cfg.planner.n_rope, &cfg.sim)?;
            log.write_csv(BufWriter::new(File::create(out.join("sim_log.csv"))?), &prov)?;
            write_json(&out.join("run_metrics.json"), &prov, &m)?;
            println!(
                "residual oscillation {:.4} m, max tracking error {:.4} m, collided: {}",
                m.residual_oscillation, m.max_tracking_error, m.collided
            );
            if let Some(reason) = &log.aborted {
                eprintln!("warning: simulation aborted: {reason}");
            }
        }
        Command::Tune { plan: path } => {
            let prov = Provenance::from_config_text(&text, cfg.planner.seed.rng_seed);
            let plan = match path {
                Some(p) => read_plan(p, &cfg)?,
                None => plan(&cfg, ModelTag::Nfm)?.plan,
            };
            let t = tune_pi(&plan, &cfg.params, &cfg.gains, &cfg.sim, &cfg.tune)?;
            write_json(&out.join("gains.json"), &prov, &t)?;
            println!("IAE {:.5} -> {:.5} m·s after {} runs", t.initial_iae, t.iae, t.evaluations);
            if t.budget_exhausted {
                eprintln!("warning: tuning budget exhausted; gains are the best found so far");
            }
        }
        Command::Sweep => {
            let prov = Provenance::from_config_text(&text, cfg.sweep.master_seed);
            let mut plans = Vec::new();
            for tag in ModelTag::ALL {
                let outcome = plan(&cfg, tag)?;
                write_plan(&outcome.plan, &out.join(format!("plan_{}.csv", tag.as_str())), &prov)?;
                plans.push((tag, outcome.plan));
            }
            let rows = sweep(
                &plans,
                &cfg.scenario.obstacles,
                cfg.planner.n_rope,
                &cfg.params,
                &cfg.gains,
                &cfg.sim,
                &cfg.sweep,
            )?;
            write_sweep_csv(&rows, BufWriter::new(File::create(out.join("sweep.csv"))?), &prov)?;
            let summary = summarize(&rows, cfg.sweep.cutoff);
            write_json(&out.join("sweep_summary.json"), &prov, &summary)?;
            for s in &summary {
                let median = s.residual_oscillation.map_or(f64::NAN, |q| q.median);
                println!(
                    "{}: median residual oscillation {:.4} m, collision rate {:.2} ({} runs up to {:.0}%)",
                    s.plan.as_str(),
                    median,
                    s.collision_rate,
                    s.runs,
                    100.0 * s.cutoff
                );
            }
        }
        Command::Verify {
            plan: path,
            margin,
            oversample,
        } => {
            let prov = Provenance::from_config_text(&text, cfg.planner.seed.rng_seed);
            let plan = read_plan(path, &cfg)?;
            let report = verify_trajectory(
                &plan,
                &cfg.scenario.obstacles,
                cfg.planner.n_rope,
                *margin,
                *oversample,
                &cfg.params,
            )?;
            write_json(&out.join("collision_report.json"), &prov, &report)?;
            if report.collided {
                return Err(CliError::Collision(format!(
                    "clearance {:.4} m at t = {:.3} s",
                    report.min_clearance,
                    report.min_clearance_time.unwrap_or(0.0)
                )));
            }
            println!("no collision, min clearance {:.4} m", report.min_clearance);
        }
    }
    Ok(())
}

fn plan(cfg: &Config, tag: ModelTag) -> CliResult<PlanOutcome> {
    let variant = FrictionVariant::for_tag(tag, &cfg.params);
    info!("planning {} with the {} model", cfg.scenario.name, tag.as_str());
    Ok(plan_pipeline(&cfg.scenario, &cfg.params, &variant, &cfg.planner)?)
}

fn read_plan(path: &Path, cfg: &Config) -> CliResult<Plan> {
    let file = File::open(path).map_err(|e| CraneError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(Plan::read_csv(BufReader::new(file), &cfg.params)?)
}

fn write_plan(plan: &Plan, path: &Path, prov: &Provenance) -> CliResult<()> {
    plan.write_csv(BufWriter::new(File::create(path)?), prov)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

fn write_json<T: Serialize>(path: &Path, prov: &Provenance, value: &T) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Envelope { provenance: prov, result: value })
        .map_err(|e| CraneError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}
