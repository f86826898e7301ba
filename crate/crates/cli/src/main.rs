use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtrace_cli::catalog::list_catalog;

#[derive(Parser)]
#[command(name = "mtrace", version, about = "Martingale trace studies of integral operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for intra-study parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List kernels, spaces, densities, filtrations and studies.
    Catalog {
        /// Keep entries whose section, name or tag equals this value.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog { filter } => {
            print!("{}", list_catalog(filter.as_deref()));
            ExitCode::SUCCESS
        }
        Command::Run { config, out, threads } => match mtrace_cli::run(&config, out.as_deref(), threads) {
            Ok(summary) => {
                for o in &summary.outputs {
                    println!("{}  {}", o.sha256, summary.out_dir.join(&o.file).display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("mtrace: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
