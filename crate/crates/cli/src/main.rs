//! `meg` — goal-directedness scores for tabular MDP policies.
//!
//! Exit codes: 0 success, 1 input error, 2 solver stopped at the inverse-
//! temperature cap without meeting its gradient tolerance, 3 verification
//! failure.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use meg_core::envs::CliffWorldSpec;
use meg_core::experiments::{
    epsilon_sweep, goal_length_sweep, write_epsilon_csv, write_goal_length_csv, SweepConfig,
};
use meg_core::io;
use meg_core::mdp::StepUtilities;
use meg_core::meg::{
    meg_known, meg_known_from_trajectories, meg_unknown, meg_unknown_from_trajectories,
    MegOptions, MegResult,
};
use meg_core::utility::{FeatureMap, ParametricUtility, UtilityKind};
use meg_core::verify::run_battery;
use meg_core::MegError;

#[derive(Parser)]
#[command(
    name = "meg",
    version,
    about = "Maximum-entropy goal-directedness of policies in finite tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a policy (or sampled episodes) against one known utility function.
    Known(KnownArgs),
    /// Best score over a parametric utility class (tabular, linear, or MLP).
    Unknown(UnknownArgs),
    /// Cliff-world sweep: MEG of epsilon-greedy corruptions of the optimal policy.
    EpsilonExperiment(EpsilonArgs),
    /// Cliff-world sweep: MEG of the optimal policy as the goal region grows.
    GoalLengthExperiment(GoalLengthArgs),
    /// Run the seeded self-check battery and report each property.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Initial gradient-ascent step size.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Iteration budget per ascent run.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Inverse-temperature bound; the exact infinite limit is still scored.
    #[arg(long, default_value_t = 1e3)]
    beta_cap: f64,
    /// Random restarts for the unknown-utility ascent.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Seed for every random choice this invocation makes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn options(&self) -> MegOptions {
        MegOptions {
            learning_rate: self.lr,
            max_iterations: self.max_iters,
            beta_cap: self.beta_cap,
            restarts: self.restarts,
            seed: self.seed,
            ..MegOptions::default()
        }
    }
}

#[derive(Args)]
struct EvidenceArgs {
    /// Process description (JSON).
    #[arg(long)]
    mdp: PathBuf,
    /// Policy file (JSON); exactly one of --policy / --trajectories.
    #[arg(long, conflicts_with = "trajectories")]
    policy: Option<PathBuf>,
    /// Sampled episodes (CSV); exactly one of --policy / --trajectories.
    #[arg(long)]
    trajectories: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModelArg {
    Tabular,
    Linear,
    Mlp,
}

impl ModelArg {
    fn kind(self) -> UtilityKind {
        match self {
            ModelArg::Tabular => UtilityKind::Tabular,
            ModelArg::Linear => UtilityKind::Linear,
            ModelArg::Mlp => UtilityKind::Mlp,
        }
    }
}

#[derive(Args)]
struct KnownArgs {
    #[command(flatten)]
    evidence: EvidenceArgs,
    /// Utility file: a JSON array of per-state values, or a model checkpoint.
    #[arg(long)]
    utility: PathBuf,
    /// Output directory for result.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct UnknownArgs {
    #[command(flatten)]
    evidence: EvidenceArgs,
    /// Utility-model family to search over.
    #[arg(long, value_enum, default_value_t = ModelArg::Mlp)]
    model: ModelArg,
    /// Hidden width of the MLP family.
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    /// Output directory for result.json and the fitted-utility checkpoint.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EpsilonArgs {
    /// Goal-region length of the cliff world.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    k: u8,
    /// Episode length.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Mlp)]
    model: ModelArg,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    /// Independent unknown-utility runs behind each mean ± stderr.
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct GoalLengthArgs {
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Mlp)]
    model: ModelArg,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Known(args) => cmd_known(&args),
        Command::Unknown(args) => cmd_unknown(&args),
        Command::EpsilonExperiment(args) => cmd_epsilon(&args),
        Command::GoalLengthExperiment(args) => cmd_goal_length(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

enum Evidence {
    Policy(meg_core::Policy),
    Trajectories(meg_core::TrajectorySet),
}

fn load_evidence(args: &EvidenceArgs) -> Result<Evidence, MegError> {
    match (&args.policy, &args.trajectories) {
        (Some(p), None) => Ok(Evidence::Policy(io::load_policy(p)?)),
        (None, Some(t)) => Ok(Evidence::Trajectories(io::load_trajectories(t)?)),
        _ => Err(MegError::InvalidArgument(
            "provide exactly one of --policy and --trajectories".into(),
        )),
    }
}

fn write_result(
    out: &Path,
    algorithm: &str,
    solver: &SolverArgs,
    result: &MegResult,
    checkpoint: Option<&str>,
) -> Result<PathBuf, MegError> {
    std::fs::create_dir_all(out)?;
    let mut doc = serde_json::json!({
        "algorithm": algorithm,
        "options": {
            "lr": solver.lr,
            "max_iters": solver.max_iters,
            "beta_cap": solver.beta_cap,
            "restarts": solver.restarts,
            "seed": solver.seed,
        },
        "result": result,
    });
    if let Some(name) = checkpoint {
        doc["utility_checkpoint"] = serde_json::Value::String(name.to_string());
    }
    let path = out.join("result.json");
    let mut text = serde_json::to_string_pretty(&doc).expect("result serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn report(result: &MegResult, path: &Path) -> u8 {
    println!(
        "meg {:.6} nats  beta* {}  ({}, {} iterations)",
        result.meg,
        result.beta_star,
        if result.converged { "converged" } else { "stopped at cap" },
        result.iterations
    );
    println!("wrote {}", path.display());
    if result.converged {
        0
    } else {
        2
    }
}

fn cmd_known(args: &KnownArgs) -> Result<u8, MegError> {
    let mdp = io::load_mdp(&args.evidence.mdp)?;
    let values = io::load_utility_values(&args.utility)?;
    let utilities = StepUtilities::stationary(values, mdp.horizon);
    let opts = args.solver.options();
    let result = match load_evidence(&args.evidence)? {
        Evidence::Policy(pi) => meg_known(&mdp, &pi, &utilities, &opts)?,
        Evidence::Trajectories(t) => meg_known_from_trajectories(&mdp, &t, &utilities, &opts)?,
    };
    let path = write_result(&args.out, "known-utility", &args.solver, &result, None)?;
    Ok(report(&result, &path))
}

fn cmd_unknown(args: &UnknownArgs) -> Result<u8, MegError> {
    let mdp = io::load_mdp(&args.evidence.mdp)?;
    let proto = ParametricUtility::init(
        args.model.kind(),
        FeatureMap::OneHot {
            n_states: mdp.n_states,
        },
        args.hidden,
        args.solver.seed,
        0.1,
    );
    let opts = args.solver.options();
    let result = match load_evidence(&args.evidence)? {
        Evidence::Policy(pi) => meg_unknown(&mdp, &pi, &proto, &opts)?,
        Evidence::Trajectories(t) => meg_unknown_from_trajectories(&mdp, &t, &proto, &opts)?,
    };
    std::fs::create_dir_all(&args.out)?;
    let checkpoint_name = "utility_star.json";
    let theta = result.theta_star.clone().unwrap_or_default();
    let fitted = ParametricUtility::with_theta(
        args.model.kind(),
        FeatureMap::OneHot {
            n_states: mdp.n_states,
        },
        args.hidden,
        theta,
    )?;
    io::save_utility_model(&args.out.join(checkpoint_name), &fitted, args.solver.seed)?;
    let path = write_result(
        &args.out,
        "unknown-utility",
        &args.solver,
        &result,
        Some(checkpoint_name),
    )?;
    Ok(report(&result, &path))
}

fn sweep_config(
    k: usize,
    horizon: usize,
    model: ModelArg,
    hidden: usize,
    runs: usize,
    solver: &SolverArgs,
) -> SweepConfig {
    SweepConfig {
        spec: CliffWorldSpec {
            goal_length: k,
            horizon,
            ..CliffWorldSpec::default()
        },
        kind: model.kind(),
        hidden,
        opts: solver.options(),
        runs,
    }
}

fn cmd_epsilon(args: &EpsilonArgs) -> Result<u8, MegError> {
    let config = sweep_config(
        args.k as usize,
        args.horizon,
        args.model,
        args.hidden,
        args.runs,
        &args.solver,
    );
    let rows = epsilon_sweep(&config)?;
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("epsilon_sweep.csv");
    write_epsilon_csv(&csv_path, &rows)?;
    let known: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.meg_known)).collect();
    let unknown: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.meg_unknown_mean)).collect();
    let svg_path = args.out.join("epsilon_sweep.svg");
    plot::line_chart(
        "Goal-directedness vs exploration",
        "epsilon",
        "MEG (nats)",
        &[
            plot::Series {
                label: "known utility",
                color: "#1f77b4",
                points: &known,
            },
            plot::Series {
                label: "unknown utility",
                color: "#d62728",
                points: &unknown,
            },
        ],
        &svg_path,
    )?;
    println!("epsilon  meg_known  meg_unknown_mean  meg_unknown_stderr");
    for r in &rows {
        println!(
            "{:.1}      {:>9.4}  {:>16.4}  {:>18.4}",
            r.epsilon, r.meg_known, r.meg_unknown_mean, r.meg_unknown_stderr
        );
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(0)
}

fn cmd_goal_length(args: &GoalLengthArgs) -> Result<u8, MegError> {
    let config = sweep_config(1, args.horizon, args.model, args.hidden, args.runs, &args.solver);
    let rows = goal_length_sweep(&config)?;
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("goal_length_sweep.csv");
    write_goal_length_csv(&csv_path, &rows)?;
    let known: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.meg_known)).collect();
    let unknown: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.meg_unknown_mean)).collect();
    let svg_path = args.out.join("goal_length_sweep.svg");
    plot::line_chart(
        "Goal-directedness vs goal-region size",
        "goal length k",
        "MEG (nats)",
        &[
            plot::Series {
                label: "known utility",
                color: "#1f77b4",
                points: &known,
            },
            plot::Series {
                label: "unknown utility",
                color: "#d62728",
                points: &unknown,
            },
        ],
        &svg_path,
    )?;
    println!("k  meg_known  meg_unknown_mean  meg_unknown_stderr");
    for r in &rows {
        println!(
            "{}  {:>9.4}  {:>16.4}  {:>18.4}",
            r.k, r.meg_known, r.meg_unknown_mean, r.meg_unknown_stderr
        );
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, MegError> {
    let rows = run_battery(args.seed)?;
    let mut all_pass = true;
    println!("{:<34} {:>12} {:>10}  result", "property", "observed", "tolerance");
    for row in &rows {
        all_pass &= row.pass;
        println!(
            "{:<34} {:>12.3e} {:>10.1e}  {}",
            row.name,
            row.observed,
            row.tolerance,
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        println!("all {} properties hold", rows.len());
        Ok(0)
    } else {
        Ok(3)
    }
}
