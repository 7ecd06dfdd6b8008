use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use goalinfer::commands::{cmd_eval, cmd_infer, cmd_plan, cmd_train, CommandCtx};
use goalinfer::scenario::{Scale, Scenario};

/// Goal inference with randomized path planners: plan paths, run posterior
/// chains, train the neural proposal, and compare inference strategies.
#[derive(Parser)]
#[command(name = "goalinfer", version, about)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,

    /// Output directory (the GOALINFER_OUT environment variable overrides
    /// this).
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Run the scenario's paper-scale settings instead of its desk-scale
    /// block.
    #[arg(long)]
    full: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the planner repeatedly and render the paths.
    Plan {
        /// Number of independent planner runs.
        #[arg(long, default_value_t = 60)]
        count: usize,
    },
    /// Run replicated MH chains and persist posterior samples.
    Infer,
    /// Generate waypoint training data and fit the proposal network.
    Train,
    /// Binned-KL convergence study across inference strategies.
    Eval,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut scenario = match Scenario::load(&cli.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let out_dir = std::env::var_os("GOALINFER_OUT")
        .map(PathBuf::from)
        .unwrap_or(cli.out);
    let scale = if cli.full { Scale::Full } else { Scale::Desk };
    let ctx = CommandCtx {
        scenario,
        scenario_dir: cli.scenario.parent().map(|p| p.to_path_buf()),
        out_dir,
        scale,
    };

    let result = match cli.command {
        Command::Plan { count } => cmd_plan(&ctx, count),
        Command::Infer => cmd_infer(&ctx),
        Command::Train => cmd_train(&ctx),
        Command::Eval => cmd_eval(&ctx),
    };
    match result {
        Ok(output) => {
            for f in output.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
