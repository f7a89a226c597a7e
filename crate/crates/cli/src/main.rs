use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tci_lab_cli::experiments::EXPERIMENTS;
use tci_lab_cli::{run, ExperimentConfig, VERSION};

#[derive(Parser)]
#[command(name = "lab", about = "Transportation-cost inequality experiments", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run { config: PathBuf },
    /// List the registered experiments.
    List,
    /// Print the version string.
    Version,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::List => {
            let width = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
            for e in EXPERIMENTS {
                println!("{:width$}  {}", e.name, e.description);
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("lab {VERSION}");
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let outcome = ExperimentConfig::from_file(&config).and_then(|c| run(&c));
            match outcome {
                Ok(summary) => {
                    for p in summary.outcome.properties.iter().filter(|p| !p.holds) {
                        eprintln!("property failed: {} ({})", p.name, p.detail);
                    }
                    eprintln!(
                        "wrote {} and {} in {:.2}s",
                        summary.report_path.display(),
                        summary.meta_path.display(),
                        summary.wall_seconds
                    );
                    ExitCode::from(if summary.holds() { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("lab: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
