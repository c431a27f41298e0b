mod cmd;
mod ctx;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctx::UsageError;

#[derive(Parser)]
#[command(
    name = "pwrules",
    version,
    about = "Mine protein-word / fragment rules and screen molecules with them"
)]
struct Cli {
    /// key = value configuration file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate inputs and configuration without writing outputs
    #[arg(long, global = true)]
    dry_run: bool,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fragment library
    #[command(subcommand)]
    Fragments(cmd::fragments::Cmd),
    /// Protein word segmentation
    #[command(subcommand)]
    Words(cmd::words::Cmd),
    /// Affinity ingestion, labels and splits
    #[command(subcommand)]
    Data(cmd::data::Cmd),
    /// Classifier training and prediction
    #[command(subcommand)]
    Model(cmd::model::Cmd),
    /// Rule extraction, accuracy and filtering
    #[command(subcommand)]
    Rules(cmd::rules::Cmd),
    /// PWScore screening, score fusion and metrics
    #[command(subcommand)]
    Screen(cmd::screen::Cmd),
    /// Structural validation of rules
    #[command(subcommand)]
    Structval(cmd::structval::Cmd),
    /// Write a synthetic dataset with one planted rule
    Synth(cmd::synth::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ctx::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let g = cmd::Global {
        config: cli.config,
        seed: cli.seed,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Fragments(c) => cmd::fragments::run(c, &g),
        Command::Words(c) => cmd::words::run(c, &g),
        Command::Data(c) => cmd::data::run(c, &g),
        Command::Model(c) => cmd::model::run(c, &g),
        Command::Rules(c) => cmd::rules::run(c, &g),
        Command::Screen(c) => cmd::screen::run(c, &g),
        Command::Structval(c) => cmd::structval::run(c, &g),
        Command::Synth(a) => cmd::synth::run(a, &g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
