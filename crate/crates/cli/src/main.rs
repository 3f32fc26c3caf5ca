use std::path::PathBuf;
use std::process::ExitCode;

use agemort_cli::{load_config, run, Command};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agemort", version, about = "Age-structured mortality reconstruction and forecasting")]
struct Args {
    /// Flat `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for the ensemble and, for `synth`, the noise
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Input bundle directory (defaults to the output directory)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate a synthetic twin bundle
    Synth,
    /// Reconstruct yearly mortality curves from a bundle
    Reconstruct,
    /// Forecast mortality and diagnoses with nonnegative DMD
    Forecast,
    /// Project the population age structure
    Project,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Synth => Command::Synth,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::Forecast => Command::Forecast,
        Cmd::Project => Command::Project,
    };
    let result = load_config(args.config.as_deref()).and_then(|mut cfg| {
        if let Some(s) = args.seed {
            cfg.eki.seed = s;
            cfg.synth.seed = Some(s);
        }
        if let Some(o) = args.out {
            cfg.out = o;
        }
        if let Some(d) = args.data {
            cfg.data = Some(d);
        }
        run(command, &cfg)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
