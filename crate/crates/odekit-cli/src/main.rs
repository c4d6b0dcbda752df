use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "odekit", version, about = "Batch runner for fixed-step ODE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for data files and report.json (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed recorded in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for batch solves.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a batch of ODE models and report accuracy diagnostics.
    Solve(RunArgs),
    /// Recover Lotka-Volterra rates from sampled trajectory data.
    Estimate(RunArgs),
    /// Train a neural vector field on a damped-oscillator trajectory.
    TrainNode(RunArgs),
    /// Run a Gray-Scott reaction-diffusion simulation.
    ReactDiffuse(RunArgs),
    /// Time compartment-model solves across system sizes.
    Bench(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Estimate(a) => ("estimate", a),
        Command::TrainNode(a) => ("train-node", a),
        Command::ReactDiffuse(a) => ("react-diffuse", a),
        Command::Bench(a) => ("bench", a),
    };
    std::process::exit(odekit_cli::execute(
        name,
        &args.config,
        &args.out,
        args.seed,
        args.jobs,
    ));
}
