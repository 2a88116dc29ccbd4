use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use parctrl::Command;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    Optimize,
    Lambda,
    SweepAlpha,
    Decay,
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Optimize => Command::Optimize,
            Cmd::Lambda => Command::Lambda,
            Cmd::SweepAlpha => Command::SweepAlpha,
            Cmd::Decay => Command::Decay,
            Cmd::Verify => Command::Verify,
        }
    }
}

/// Heat-equation boundary control experiments.
///
/// Exit codes: 0 success, 1 failed verification, 2 invalid input,
/// 3 solver non-convergence.
#[derive(Debug, Parser)]
#[command(name = "parctrl", version)]
struct Args {
    command: Cmd,
    /// Config file, or a `manifest.json` from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match parctrl::run(args.command.into(), &args.config, args.out.as_deref()) {
        Ok(report) => {
            if let Some(msg) = &report.message {
                eprintln!("parctrl: {msg}");
            }
            println!("{}", report.out_dir.join("manifest.json").display());
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("parctrl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
