//! `modechoice`: estimation toolkit command line.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::RunContext;
use config::{validate, Config, Requirement};

#[derive(Parser)]
#[command(
    name = "modechoice",
    about = "Travel mode choice estimation toolkit: GPS pipeline, MNL/MXL estimation, joint RP-SP, cross-validation, and counterfactual scenarios",
    version
)]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the estimation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the draw count for mixed models.
    #[arg(long, global = true)]
    draws: Option<usize>,

    /// Override the per-person RP trip cap for mixed models.
    #[arg(long, global = true)]
    trip_cap: Option<usize>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transform GPS event and survey files into estimation-ready choice files.
    Pipeline,
    /// Estimate a model specification on choice files.
    Estimate,
    /// Five-fold observation-level cross-validation.
    Cv,
    /// Fare, access-time, and integration counterfactual tables.
    Scenario,
    /// Generate synthetic choice data; optionally re-estimate and report recovery.
    Synth,
    /// Render parameter, fit-comparison, and value-of-time tables from result files.
    Report {
        /// Estimation result files (result.toml) to render.
        results: Vec<PathBuf>,
    },
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Pipeline => "pipeline",
        Command::Estimate => "estimate",
        Command::Cv => "cv",
        Command::Scenario => "scenario",
        Command::Synth => "synth",
        Command::Report { .. } => "report",
    }
}

fn main() {
    let cli = Cli::parse();
    commands::configure_workers(cli.workers);
    let name = command_name(&cli.command).to_string();

    let (mut config, config_bytes) = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(config) => {
                let bytes = std::fs::read(path).unwrap_or_default();
                (config, bytes)
            }
            Err(e) => {
                std::process::exit(commands::emit_error_record(None, &name, &[e.to_string()]));
            }
        },
        None => (Config::default(), Vec::new()),
    };

    // Command-line overrides.
    if let Some(seed) = cli.seed {
        config.estimation.seed = seed;
        config.synth.seed = seed;
        config.cv.seed = seed;
    }
    if let Some(draws) = cli.draws {
        config.estimation.draws = Some(draws);
    }
    if let Some(cap) = cli.trip_cap {
        config.estimation.trip_cap = Some(cap);
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }

    let needs: &[Requirement] = match &cli.command {
        Command::Pipeline => &[Requirement::GpsInputs],
        Command::Estimate => &[Requirement::ChoiceData, Requirement::ModelSpec],
        Command::Cv => &[Requirement::ChoiceData, Requirement::ModelSpec, Requirement::Folds],
        Command::Scenario => &[Requirement::Scenario],
        Command::Synth => &[Requirement::SynthTruth],
        Command::Report { .. } => &[],
    };
    let errors = validate(&config, needs);
    if !errors.is_empty() {
        std::process::exit(commands::emit_error_record(Some(&config.output.dir), &name, &errors));
    }

    let ctx = RunContext {
        out_dir: config.output.dir.clone(),
        config,
        config_bytes,
        command: name.clone(),
    };
    if let Err(e) = ctx.prepare() {
        std::process::exit(commands::emit_error_record(None, &name, &[e.to_string()]));
    }

    let outcome = match &cli.command {
        Command::Pipeline => commands::pipeline(&ctx),
        Command::Estimate => commands::estimate(&ctx),
        Command::Cv => commands::cv(&ctx),
        Command::Scenario => commands::scenario(&ctx),
        Command::Synth => commands::synth(&ctx),
        Command::Report { results } => commands::report(&ctx, results),
    };
    if let Err(e) = outcome {
        let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
        std::process::exit(commands::emit_error_record(Some(&ctx.out_dir), &name, &chain));
    }
}
