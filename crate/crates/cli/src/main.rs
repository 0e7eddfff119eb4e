//! Command-line front end for the social-navigation laboratory.
//!
//! Options resolve from three layers, later wins: JSON config file
//! (`--config`), environment variables (`SOCNAV_<KEY>`), explicit flags.
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

mod config;
mod evaluate;
mod generate;
mod io;
mod render;
mod simulate;
mod train;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "socnav", version, about = "2D social navigation laboratory")]
struct Cli {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a map and a batch of seeded episodes.
    Generate(generate::GenerateOpts),
    /// Roll a policy over an episode batch, writing one log per episode.
    Simulate(simulate::SimulateOpts),
    /// Analyze logs: encounter report plus navigation metrics.
    Evaluate(evaluate::EvaluateOpts),
    /// Render a log (or just the map) to SVG.
    Render(render::RenderOpts),
    /// Train the learned policy; resumes from an existing checkpoint.
    Train(train::TrainOpts),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let config = cli.config.as_deref();
    let result = match cli.cmd {
        Cmd::Generate(flags) => config::resolve(config, &flags).and_then(generate::run),
        Cmd::Simulate(flags) => config::resolve(config, &flags).and_then(simulate::run),
        Cmd::Evaluate(flags) => config::resolve(config, &flags).and_then(evaluate::run),
        Cmd::Render(flags) => config::resolve(config, &flags).and_then(render::run),
        Cmd::Train(flags) => config::resolve(config, &flags).and_then(train::run),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
