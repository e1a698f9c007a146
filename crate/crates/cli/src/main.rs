use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dte_core::actions::ActionBudget;
use dte_core::analysis::{
    brute_force_optimum, check_theorem3_bound, enumerate_nash, lll_stationary_distribution, ProfileIndex,
};
use dte_core::learning::{Algorithm, InitialPlan, LearningConfig};
use dte_core::report::{action_set_sizes, write_report, RunReport};
use dte_core::scenario::{load_scenario, Scenario};
use dte_core::{BuildOptions, DteError, GameInstance, Mode};

#[derive(Parser)]
#[command(name = "dte", version, about = "Plan robot trajectories for cooperative tasks with time windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario, then summarize its variants.
    Validate(Target),
    /// Print per-robot action-set sizes.
    Actions {
        #[command(flatten)]
        target: Target,
        /// Also list every trajectory.
        #[arg(long)]
        trajectories: bool,
        /// Also count all feasible trajectories per station.
        #[arg(long)]
        counts: bool,
    },
    /// Run learning on one variant and optionally write a report.
    Plan {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        learn: LearnArgs,
        /// Directory for series.csv, histogram.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive analysis of small games.
    Analyze {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        nash: bool,
        #[arg(long)]
        optimum: bool,
        #[arg(long)]
        poa: bool,
        #[arg(long)]
        stationary: bool,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Maximum number of joint plans to enumerate.
        #[arg(long, env = "DTE_BUDGET", default_value_t = 10_000_000)]
        budget: u128,
        /// Print JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Run learning on every variant of a scenario.
    Batch {
        #[arg(value_name = "SCENARIO")]
        scenario: PathBuf,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, env = "DTE_SIGNATURE_BUDGET", default_value_t = ActionBudget::default().signatures)]
        signature_budget: usize,
        /// Each variant is written to `<out>/<variant>/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Target {
    #[arg(value_name = "SCENARIO")]
    scenario: PathBuf,
    /// Variant name; defaults to the first.
    #[arg(long)]
    variant: Option<String>,
    /// Force plain or extended actions.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, env = "DTE_SIGNATURE_BUDGET", default_value_t = ActionBudget::default().signatures)]
    signature_budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Plain,
    Extended,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Br,
    Lll,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl LearnArgs {
    fn resolve(&self, scenario: &Scenario) -> (LearningConfig, usize) {
        let defaults = scenario.learning_defaults();
        let mut cfg = scenario.learning_config();
        if let Some(a) = self.algorithm {
            cfg.algorithm = match a {
                AlgorithmArg::Br => Algorithm::BestResponse,
                AlgorithmArg::Lll => Algorithm::LogLinear,
            };
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.initial = InitialPlan::Random;
        (cfg, self.runs.or(defaults.runs).unwrap_or(1))
    }
}

fn build_options(mode: Option<ModeArg>, signature_budget: usize) -> BuildOptions {
    BuildOptions {
        mode: mode.map(|m| match m {
            ModeArg::Plain => Mode::Plain,
            ModeArg::Extended => Mode::Extended,
        }),
        budget: ActionBudget {
            signatures: signature_budget,
            ..ActionBudget::default()
        },
    }
}

fn load(path: &PathBuf) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn build(target: &Target) -> Result<(Scenario, String, GameInstance)> {
    let scenario = load(&target.scenario)?;
    let variant = scenario.variant(target.variant.as_deref())?.clone();
    let game = scenario
        .build(&variant, &build_options(target.mode, target.signature_budget))
        .with_context(|| format!("building variant `{}`", variant.name))?;
    Ok((scenario, variant.name, game))
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Plain => "plain",
        Mode::Extended => "extended",
    }
}

fn validate(target: &Target) -> Result<()> {
    let scenario = load(&target.scenario)?;
    println!("scenario {} ok (digest {})", target.scenario.display(), &scenario.digest[..16]);
    println!(
        "grid {}x{}, {} obstacles, stations {}, horizon {}",
        scenario.grid.width(),
        scenario.grid.height(),
        scenario.grid.obstacles().len(),
        scenario.station_ids.join(","),
        scenario.file.horizon
    );
    for v in &scenario.variants {
        let mut per_station = vec![0usize; scenario.station_ids.len()];
        for r in &v.robots {
            per_station[r.station] += 1;
        }
        let tasks = scenario.variant_tasks(v);
        let mode = if dte_core::task::check_no_overlap(&tasks).is_empty() { "plain" } else { "extended" };
        let split: Vec<String> = per_station.iter().map(|n| n.to_string()).collect();
        println!(
            "variant {}: {} robots ({}), {} tasks, {} mode",
            v.name,
            v.robots.len(),
            split.join("/"),
            tasks.len(),
            mode
        );
    }
    Ok(())
}

fn actions(target: &Target, trajectories: bool, counts: bool) -> Result<()> {
    let (scenario, variant, game) = build(target)?;
    println!("variant {variant} ({} mode)", mode_name(game.mode()));
    if counts {
        for (s, id) in scenario.station_ids.iter().enumerate() {
            let cell = scenario.grid.stations()[s];
            let n = scenario.grid.count_feasible_trajectories(cell, game.horizon())?;
            println!("station {id} {cell}: {n} feasible trajectories");
        }
    }
    for (i, size) in action_set_sizes(&game, &scenario.station_ids).iter().enumerate() {
        match game.mode() {
            Mode::Plain => println!("robot {} at {}: |A| = {}", size.robot, size.station, size.trajectories),
            Mode::Extended => println!(
                "robot {} at {}: |A| = {}, |A+| = {}",
                size.robot, size.station, size.trajectories, size.actions
            ),
        }
        if trajectories {
            for a in game.actions(i) {
                match &a.commitments {
                    Some(z) => {
                        let z: Vec<String> = z
                            .iter()
                            .map(|c| c.map_or("-".to_string(), |j| game.tasks()[j].id.clone()))
                            .collect();
                        println!("  {} [{}]", a.trajectory, z.join(","));
                    }
                    None => println!("  {}", a.trajectory),
                }
            }
        }
    }
    Ok(())
}

fn plan(target: &Target, learn: &LearnArgs, out: Option<&PathBuf>) -> Result<()> {
    let scenario = load(&target.scenario)?;
    let variant = scenario.variant(target.variant.as_deref())?.name.clone();
    let (cfg, runs) = learn.resolve(&scenario);
    let opts = build_options(target.mode, target.signature_budget);
    let (report, _) = RunReport::generate(&scenario, &variant, &opts, &cfg, runs, cfg.seed)
        .with_context(|| format!("running variant `{variant}`"))?;
    print_summary(&report);
    if let Some(dir) = out {
        write_report(&report, dir)?;
        println!("report written to {}", dir.display());
    }
    Ok(())
}

fn print_summary(report: &RunReport) {
    let sizes: Vec<String> = report.action_set_sizes.iter().map(|s| s.actions.to_string()).collect();
    let last = report.series.last().expect("series has round 0");
    println!(
        "variant {}: {} runs x {} rounds, |A_i| = [{}]",
        report.variant,
        report.runs,
        report.config.rounds,
        sizes.join(",")
    );
    println!(
        "final round {}: min {} avg {:.4} max {}; best run {} value {}",
        last.round, last.min, last.avg, last.max, report.best.run, report.best.value
    );
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    target: &Target,
    nash: bool,
    optimum: bool,
    poa: bool,
    stationary: bool,
    epsilon: f64,
    budget: u128,
    as_json: bool,
) -> Result<()> {
    let (_, variant, game) = build(target)?;
    let all = !(nash || optimum || poa || stationary);
    let mut out = serde_json::Map::new();
    out.insert("variant".into(), json!(variant));
    out.insert("profiles".into(), json!(game.profile_count().map(|n| n.to_string())));
    if optimum || all {
        let opt = brute_force_optimum(&game, budget)?;
        if !as_json {
            println!("optimum {} ({} maximizers)", opt.value, opt.witnesses.len());
        }
        out.insert("optimum".into(), serde_json::to_value(&opt)?);
    }
    if nash || poa || all {
        let report = enumerate_nash(&game, budget)?;
        if !as_json {
            println!("{} pure Nash equilibria", report.equilibria.len());
            for (p, v) in report.equilibria.iter().zip(&report.values) {
                println!("  {:?} value {v}", p.0);
            }
            println!("price of anarchy {} ({})", report.poa, report.poa.as_f64());
        }
        match check_theorem3_bound(&game, &report) {
            Ok(ok) => {
                out.insert("theorem3_bound_holds".into(), json!(ok));
            }
            Err(DteError::Inapplicable(why)) => {
                out.insert("theorem3_bound_holds".into(), json!(null));
                out.insert("theorem3_inapplicable".into(), json!(why));
            }
            Err(e) => return Err(e.into()),
        }
        out.insert("nash".into(), serde_json::to_value(&report)?);
    }
    if stationary {
        let dist = lll_stationary_distribution(&game, epsilon, budget)?;
        let idx = ProfileIndex::new(&game);
        let opt = brute_force_optimum(&game, budget)?;
        let mass = dist.mass_on(opt.witnesses.iter().map(|p| idx.index(p)));
        if !as_json {
            println!("stationary mass on maximizers at epsilon {epsilon}: {mass:.6} (residual {:.2e})", dist.residual);
        }
        out.insert("stationary_mass_on_optimum".into(), json!(mass));
        out.insert("stationary".into(), serde_json::to_value(&dist)?);
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    }
    Ok(())
}

fn batch(scenario_path: &PathBuf, learn: &LearnArgs, signature_budget: usize, out: Option<&PathBuf>) -> Result<()> {
    let scenario = load(scenario_path)?;
    let (cfg, runs) = learn.resolve(&scenario);
    let opts = build_options(None, signature_budget);
    for v in &scenario.variants {
        let (report, _) = RunReport::generate(&scenario, &v.name, &opts, &cfg, runs, cfg.seed)
            .with_context(|| format!("running variant `{}`", v.name))?;
        print_summary(&report);
        if let Some(dir) = out {
            if v.name.contains(['/', '\\']) || v.name == ".." {
                bail!("variant name `{}` is not a valid directory name", v.name);
            }
            write_report(&report, &dir.join(&v.name))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(t) => validate(t),
        Command::Actions {
            target,
            trajectories,
            counts,
        } => actions(target, *trajectories, *counts),
        Command::Plan { target, learn, out } => plan(target, learn, out.as_ref()),
        Command::Analyze {
            target,
            nash,
            optimum,
            poa,
            stationary,
            epsilon,
            budget,
            json,
        } => analyze(target, *nash, *optimum, *poa, *stationary, *epsilon, *budget, *json),
        Command::Batch {
            scenario,
            learn,
            signature_budget,
            out,
        } => batch(scenario, learn, *signature_budget, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
