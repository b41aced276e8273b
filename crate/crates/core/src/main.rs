use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use volgrow_core::cli::{error_json, load_config, run_to_dir, Command, RunError, GRAMMAR};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    EntropyVolume,
    EntropyBowen,
    Lyapunov,
    Domination,
    GrassmannCheck,
    BallGrowth,
    Compare,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::EntropyVolume => Command::EntropyVolume,
            Cmd::EntropyBowen => Command::EntropyBowen,
            Cmd::Lyapunov => Command::Lyapunov,
            Cmd::Domination => Command::Domination,
            Cmd::GrassmannCheck => Command::GrassmannCheck,
            Cmd::BallGrowth => Command::BallGrowth,
            Cmd::Compare => Command::Compare,
        }
    }
}

/// Entropy of torus maps from volume growth and from spanning sets.
#[derive(Debug, Parser)]
#[command(name = "volgrow", version, after_help = GRAMMAR)]
struct Args {
    command: Cmd,
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = serde_json::json!({
                "kind": "argument",
                "module": "cli-reporting",
                "operation": "parse_args",
                "message": e.to_string().trim_end(),
            });
            eprintln!("{}", error_json(&record));
            return ExitCode::from(2);
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), RunError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let (report, files) = run_to_dir(&cfg, args.command.into(), args.out.as_deref())?;
    println!("{}: {}", report.command, report.summary);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
