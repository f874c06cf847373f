//! Command-line front end: one subcommand per pipeline stage plus an
//! end-to-end `pipeline` command driven by a JSON run configuration.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod config;
pub mod pipeline;

use anyhow::Result;

use args::{Cli, Command};
use commands::Reporter;

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let reporter = Reporter { quiet: cli.quiet };
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Synth(a) => commands::synth(a, seed, reporter),
        Command::FitTemporal(a) => commands::fit_temporal(a, seed, reporter),
        Command::Train(a) => commands::train(a, seed, reporter),
        Command::TrainFusion(a) => commands::train_fusion(a, seed, reporter),
        Command::Predict(a) => commands::predict(a, seed, reporter),
        Command::Refine(a) => commands::refine(a, seed, reporter),
        Command::Evaluate(a) => {
            let map = commands::evaluate_command(a, seed)?;
            println!("map {map:.6}");
            Ok(())
        }
        Command::FilterAugment(a) => commands::filter_augment(a, seed, reporter),
        Command::Pipeline(a) => {
            let config = pipeline::load_config(a, cli.seed)?;
            let outcome = pipeline::run_pipeline(&config, reporter)?;
            for path in &outcome.artifacts {
                reporter.note(format!("wrote {}", path.display()));
            }
            println!("map {:.6}", outcome.report.map);
            Ok(())
        }
    }
}
