use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entbench::config::{read_config_file, Layers};
use entbench::{execute, status_code, CliError};

#[derive(Parser)]
#[command(name = "entbench", version, about = "Optimal local tests for maximally entangled states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form second errors over a parameter grid.
    Exact(RunArgs),
    /// Monte-Carlo run of a measurement protocol.
    Simulate(RunArgs),
    /// Haar twirls of the seed operators against the closed-form tests.
    #[command(name = "twirl-verify")]
    TwirlVerify(RunArgs),
    /// Exact and simulated acceptance approaching the Poisson limit.
    Sweep(RunArgs),
    /// Optimal binomial and Poisson tests.
    Classical(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// `key=value` settings; `a,b,c` gives a list and an empty value an empty list.
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.command {
        Command::Exact(a) => ("exact", a),
        Command::Simulate(a) => ("simulate", a),
        Command::TwirlVerify(a) => ("twirl-verify", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Classical(a) => ("classical", a),
    };
    match run(name, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(name: &str, args: RunArgs) -> Result<i32, CliError> {
    let file = args.config.as_deref().map(read_config_file).transpose()?;
    let layers = Layers { file, overrides: args.overrides, seed: args.seed, trials: args.trials, samples: args.samples, out: args.out };
    let (manifest, out) = execute(name, &layers)?;
    for line in &out.summary {
        println!("{line}");
    }
    for note in &out.notes {
        eprintln!("note: {note}");
    }
    println!("wrote {} to {}", manifest.outputs.join(", "), manifest.config.out_dir);
    Ok(status_code(out.status))
}
