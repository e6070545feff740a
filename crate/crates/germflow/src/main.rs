use std::path::PathBuf;

use clap::{Parser, Subcommand};

use germflow::cli::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "germflow",
    version,
    about = "Semiclassical laboratory: germ overlaps, quantization residuals, mean-field fidelities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config; writes <study>_<name>.csv and manifest.json.
    Run {
        config: PathBuf,
        /// Worker threads for independent schedule entries.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides GERMFLOW_OUT and the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list every problem found.
    Validate { config: PathBuf },
    /// Print the JSON schema of the config format.
    Schema,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::exit_code(&e));
        }
    }
}

fn dispatch(cli: Cli) -> germflow::Result<i32> {
    match cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = cli::load_config(&config)?;
            let (dir, manifest) = cli::run_config(&cfg, &RunOptions { jobs, out_dir: out })?;
            for file in &manifest.outputs {
                println!("{}", dir.join(file).display());
            }
            println!("{}", dir.join("manifest.json").display());
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = cli::load_config(&config)?;
            let errors = cli::validate_config(&cfg);
            if errors.is_empty() {
                println!("ok");
                Ok(0)
            } else {
                for e in &errors {
                    eprintln!("{e}");
                }
                Ok(2)
            }
        }
        Command::Schema => {
            print!("{}", cli::SCHEMA_JSON);
            Ok(0)
        }
    }
}
