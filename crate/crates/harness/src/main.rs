use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fvlab_harness::{run, ExperimentConfig, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "fvlab", version, about = "Finite-volume transport and conservation-law experiments")]
struct Cli {
    /// Print the canned scenarios and exit.
    #[arg(long)]
    list_scenarios: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `experiment.output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides `experiment.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Doubles every cell count this many times.
        #[arg(long, default_value_t = 0)]
        refine: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_scenarios {
        for s in Scenario::ALL {
            println!("{:<24}{}", s.name(), s.description());
        }
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run { config, out, seed, refine }) = cli.command else {
        eprintln!("nothing to do; try `fvlab run <config>` or `fvlab --list-scenarios`");
        return ExitCode::from(1);
    };
    let result = ExperimentConfig::load(&config).and_then(|c| run(&c, &Overrides { out, seed, refine }));
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fvlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
