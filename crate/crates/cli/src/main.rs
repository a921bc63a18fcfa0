//! `dirspeech` command-line runner.

mod beams;
mod config;
mod exit;
mod output;
mod score;
mod simulate;
mod sot;
mod stream;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "dirspeech", version, about = "Directional speech simulation, streaming and scoring")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base RNG seed; scene i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for scene generation and scoring.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate five-channel two-speaker scenes.
    Simulate(simulate::SimulateArgs),
    /// Run the streaming cascade over scenes or a WAV file.
    Stream(stream::StreamArgs),
    /// Score an event log or SOT output against a manifest.
    Score(score::ScoreArgs),
    /// Build SOT training pairs from a manifest.
    Sot(sot::SotArgs),
    /// Design and export fixed beamformer weights.
    Beams(beams::BeamsArgs),
}

fn load_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate(args) => simulate::run(cfg, args),
        Command::Stream(args) => stream::run(cfg, args),
        Command::Score(args) => score::run(cfg, args),
        Command::Sot(args) => sot::run(cfg, args),
        Command::Beams(args) => beams::run(cfg, args),
    }
}

/// The error chain joined with `: `, skipping causes the previous message
/// already ends with.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !msg.ends_with(&part) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&part);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.common.log).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit::code_for(&e))
        }
    }
}
