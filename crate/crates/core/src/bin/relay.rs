use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relay::harness::{report, Pipeline, RunConfig};

/// Hierarchical imitation and fine-tuning benchmark.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Override `output_dir` from the configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration as TOML.
    DefaultConfig,
    /// Check a configuration without running anything.
    Check(RunArgs),
    /// Run every stage in order.
    Run(RunArgs),
    /// Generate the scripted demonstrations.
    GenDemos(RunArgs),
    /// Relabel demonstrations into training datasets.
    Relabel(RunArgs),
    /// Train the relay policy and imitation baselines.
    TrainIl(RunArgs),
    /// Fine-tune every variant per goal, plus the fine-tuned baselines.
    Finetune(RunArgs),
    /// Distil fine-tuned per-goal policies into one policy.
    Distill(RunArgs),
    /// Evaluate every trained policy.
    Evaluate(RunArgs),
    /// Run the window and reward ablations.
    Ablate(RunArgs),
    /// Aggregate metrics into tables and series.
    Report(RunArgs),
    /// Recompute the report from metrics and compare with the stored one.
    Verify(RunArgs),
}

fn pipeline(args: &RunArgs) -> relay::Result<Pipeline> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    Pipeline::new(cfg)
}

fn run(cli: Cli) -> relay::Result<()> {
    let (stage, args) = match &cli.command {
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml_string());
            return Ok(());
        }
        Command::Check(a) => {
            pipeline(a)?;
            println!("configuration ok");
            return Ok(());
        }
        Command::Run(a) => {
            let report = pipeline(a)?.run_all()?;
            print!("{}", report::render_tables(&report));
            return Ok(());
        }
        Command::GenDemos(a) => ("gen-demos", a),
        Command::Relabel(a) => ("relabel", a),
        Command::TrainIl(a) => ("train-il", a),
        Command::Finetune(a) => ("finetune", a),
        Command::Distill(a) => ("distill", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Ablate(a) => ("ablate", a),
        Command::Report(a) => ("report", a),
        Command::Verify(a) => ("verify", a),
    };
    if let Some(report) = pipeline(args)?.run_stage(stage)? {
        print!("{}", report::render_tables(&report));
        if stage == "verify" {
            println!("report matches the metric records");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
