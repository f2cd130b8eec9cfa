mod analyze;
mod phantom;
mod plot;
mod run_qc;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit status for inputs that could not be parsed or validated.
pub const EXIT_PARSE: u8 = 2;
/// Exit status for fatal I/O problems.
pub const EXIT_IO: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "segqc", version, about = "Quality control for volumetric segmentation masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure every segment in a directory of mask/sidecar pairs and write the QC CSV.
    RunQc(run_qc::Args),
    /// Cohort analyses over a QC CSV.
    Analyze(analyze::Args),
    /// Generate a synthetic cohort with a defect log.
    GenPhantom(phantom::Args),
    /// Serve the HTTP API over a QC CSV.
    Serve(serve::Args),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Summary,
    Upset,
    LrDiff,
    WithinSd,
    RefCompare,
}

/// Writes to a file, or to standard output when no path is given.
pub fn write_output(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::RunQc(args) => run_qc::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::GenPhantom(args) => phantom::run(args),
        Command::Serve(args) => serve::run(args),
    };
    ExitCode::from(code)
}
