//! `engage`: drives the tutoring experiment pipeline from the shell.
//!
//! Every verb except `validate-problems` ensures the artifact chain is
//! current up to some phase, so repeating a verb is cheap: phases whose
//! outputs already carry the active config hash are skipped. `ENGAGE_OUT`
//! or `--out` redirects the output root, `--seed` overrides the config's
//! master seed, and `--force` re-executes phases whose outputs look current.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use engage_core::config::ExperimentConfig;
use engage_core::logic::{make_buggy, make_guided, reference_completion, Problem, ProblemBank};
use engage_core::pipeline::{run_pipeline_until, ArtifactPaths, PhaseRun};
use engage_core::sim::bug_count;

#[derive(Debug, Parser)]
#[command(name = "engage", version, about = "Adaptive-scaffolding tutoring experiment pipeline")]
struct Cli {
    /// Experiment config file; documented defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root, overriding the config and the ENGAGE_OUT variable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Re-execute phases even when their outputs are already current.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Checks that every problem in the bank proves out, in all three
    /// presentation types.
    ValidateProblems {
        /// Bank directory; the config's bank when omitted.
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Simulates the historical cohort.
    Simulate(RunArgs),
    /// Distills mastery thresholds from the historical sessions.
    BktThresholds(RunArgs),
    /// Builds the training corpus and trains the policy network.
    TrainDrl(RunArgs),
    /// Runs the randomized three-condition trial.
    EvalPolicy(RunArgs),
    /// Writes the statistical report over the trial sessions.
    Report(RunArgs),
    /// Runs every phase in order.
    Pipeline(RunArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = effective_config(&cli)?;
    match &cli.command {
        Command::ValidateProblems { bank } => {
            validate_problems(bank.as_deref().unwrap_or(&config.bank))
        }
        Command::Simulate(args) => run_until(&config, "history", args),
        Command::BktThresholds(args) => run_until(&config, "thresholds", args),
        Command::TrainDrl(args) => run_until(&config, "train", args),
        Command::EvalPolicy(args) => run_until(&config, "trial", args),
        Command::Report(args) | Command::Pipeline(args) => run_until(&config, "report", args),
    }
}

fn effective_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    } else if let Some(out) = std::env::var_os("ENGAGE_OUT") {
        config.output_dir = PathBuf::from(out);
    }
    Ok(config)
}

fn run_until(config: &ExperimentConfig, last: &str, args: &RunArgs) -> anyhow::Result<()> {
    let runs = run_pipeline_until(config, last, args.force)?;
    print_runs(&runs);
    if last == "report" {
        let paths = ArtifactPaths::new(&config.output_dir);
        println!("report: {}", paths.report_text.display());
    }
    Ok(())
}

fn print_runs(runs: &[PhaseRun]) {
    for run in runs {
        let status = if run.executed { "ran" } else { "up to date" };
        println!("{:<12} {status}", run.phase);
    }
}

fn validate_problems(bank_dir: &Path) -> anyhow::Result<()> {
    let bank = ProblemBank::load_dir(bank_dir)
        .with_context(|| format!("loading bank {}", bank_dir.display()))?;
    let mut total = 0usize;
    for level in bank.levels() {
        for problem in &level.problems {
            check_problem(problem, level.level)
                .with_context(|| format!("problem {}", problem.id))?;
            total += 1;
        }
        println!("level {}: {} problems ok", level.level, level.problems.len());
    }
    println!("bank {}: {total} problems validate", bank_dir.display());
    Ok(())
}

/// The reference solution must check, and so must the round trips a session
/// can demand of the problem: a Guided variant completed with the reference
/// answers, and a Buggy variant with every bug fixed.
fn check_problem(problem: &Problem, level: u8) -> anyhow::Result<()> {
    let reference = problem.validate_solution(&problem.reference_solution)?;
    anyhow::ensure!(reference.valid, "reference solution fails validation");

    let guided = make_guided(problem, 0.5, 0)?;
    let completed = guided.complete(&reference_completion(problem, &guided))?;
    anyhow::ensure!(
        problem.validate_solution(&completed)?.valid,
        "guided completion fails validation"
    );

    let buggy = make_buggy(problem, bug_count(level), 0)?;
    anyhow::ensure!(
        problem.validate_solution(&buggy.fix_all())?.valid,
        "buggy fix-all fails validation"
    );
    Ok(())
}
