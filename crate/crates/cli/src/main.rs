use std::path::PathBuf;
use std::process::ExitCode;

use adafore_cli::pipeline::CONFIG_FILE;
use adafore_cli::{execute, CliError, Overrides, Plan, RunConfig, Stage};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "adafore", version, about = "Adaptive model selection over a windowed ARIMAX/VARMA forecasting grid")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML). Defaults to run_config.toml in the output directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config and ADAFORE_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for synthetic input.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for model fitting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Model codes or a grid filter, e.g. `group=0,3;w=48,96;d=1`.
    #[arg(long, global = true)]
    reduced_grid: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write a synthetic tick file.
    Synth,
    /// Aggregate ticks into 5-minute brackets.
    Ingest,
    /// Compute bracket features.
    Features,
    /// Rolling ADF scan of bracket prices.
    Adf,
    /// Fit the fixed-model grid at every forecast origin.
    Grid,
    /// Run the adaptive selectors.
    Select,
    /// Accuracy, PL and Sharpe reports.
    Report,
    /// Class-selection hypothesis tests.
    Test,
    /// All stages in order.
    Run,
}

fn load(args: &Args) -> Result<Plan, CliError> {
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        reduced_grid: args.reduced_grid.clone(),
    };
    let path = match &args.config {
        Some(p) => p.clone(),
        None => {
            let dir = args
                .out
                .clone()
                .or_else(|| std::env::var_os(adafore_cli::config::OUT_ENV).map(PathBuf::from))
                .ok_or_else(|| CliError::Validation("--config is required when no output directory holds a run config".into()))?;
            dir.join(CONFIG_FILE)
        }
    };
    Plan::new(RunConfig::load(&path)?, &overrides)
}

fn run(args: &Args) -> Result<(), CliError> {
    let plan = load(args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let stages: Vec<Stage> = match args.command {
        Command::Synth => vec![Stage::Synth],
        Command::Ingest => vec![Stage::Ingest],
        Command::Features => vec![Stage::Features],
        Command::Adf => vec![Stage::Adf],
        Command::Grid => vec![Stage::Grid],
        Command::Select => vec![Stage::Select],
        Command::Report => vec![Stage::Report],
        Command::Test => vec![Stage::Test],
        Command::Run => Stage::ALL.to_vec(),
    };
    let manifest = execute(&plan, &stages)?;
    eprintln!("{} artifacts in {}", manifest.files.len(), plan.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adafore: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
