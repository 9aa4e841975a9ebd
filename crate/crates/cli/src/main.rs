mod commands;
mod config;
mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::{CommonFlags, ExplainFlags, GlobalConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ebano", version, about = "Explain black-box text classifiers by perturbing interpretable features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a JSON and an HTML explanation for every input document.
    Explain {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        flags: ExplainFlags,
        /// `.txt` files, `.jsonl` files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Aggregate a directory of explanation reports into global.json.
    Global {
        #[command(flatten)]
        common: CommonFlags,
        /// Entries per class in the top-N arrays.
        #[arg(long)]
        top_n: Option<usize>,
        reports: PathBuf,
    },
    /// Serve the reference model over the JSON-lines protocol on stdin/stdout.
    ServeReference {
        #[arg(long, default_value = "ref")]
        model: String,
    },
}

fn run(cli: Cli) -> ebano_core::Result<u8> {
    match cli.command {
        Command::Explain { common, flags, inputs } => {
            let cfg = RunConfig::resolve(&common, &flags)?;
            Ok(commands::explain(&cfg, &inputs)?.code())
        }
        Command::Global { common, top_n, reports } => {
            let cfg = GlobalConfig::resolve(&common, top_n)?;
            Ok(commands::global(&cfg, &reports)?.code())
        }
        Command::ServeReference { model } => {
            commands::serve_reference(&model)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
