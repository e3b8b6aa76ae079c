use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynct::{commands, selftest, Error, ExperimentConfig, RayonExecutor};

#[derive(Parser)]
#[command(name = "dynct", version, about = "Reconstruction of deforming objects from cone-beam data")]
struct Cli {
    /// Write outputs here instead of the configured `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a gridded dataset from the configured phantom.
    Simulate { config: PathBuf },
    /// Reconstruct a volume, with slice images and error metrics.
    Reconstruct { config: PathBuf },
    /// Artifact-risk map and critical arcs.
    AnalyzeCrit { config: PathBuf },
    /// Unfiltered comparator volume and artifact energies.
    CompareXstarx { config: PathBuf },
    /// Error of the reconstruction along the configured eps list.
    Converge { config: PathBuf },
    /// Built-in analytic checks.
    Selftest,
}

type Action = fn(&ExperimentConfig, &RayonExecutor) -> dynct::Result<Vec<PathBuf>>;

fn run(cli: Cli) -> Result<(), Error> {
    let (config, cmd): (PathBuf, Action) = match cli.command {
        Command::Selftest => return selftest::run(&mut std::io::stdout()),
        Command::Simulate { config } => (config, commands::simulate),
        Command::Reconstruct { config } => (config, commands::reconstruct),
        Command::AnalyzeCrit { config } => (config, commands::analyze_crit),
        Command::CompareXstarx { config } => (config, commands::compare_xstarx),
        Command::Converge { config } => (config, commands::converge),
    };
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let exec = RayonExecutor::from_env()?;
    for path in cmd(&cfg, &exec)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.class());
            ExitCode::FAILURE
        }
    }
}
