//! `toda-tba <mode> --config <file> [--out <file>] [--csv <file>] [--verbose]`

mod config;
mod error;
mod output;
mod run;

use clap::Parser;
use config::{Mode, RunConfig};
use error::{CliError, ExitStatus};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "toda-tba",
    version,
    about = "Quantum Toda chain spectra from the integral-equation and determinant routes"
)]
struct Args {
    #[arg(value_enum)]
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Result document path; defaults to `output.path` in the config, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `lambda,ln_y` profile export; defaults to `output.csv` in the config.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Stream iteration logs to stderr.
    #[arg(long)]
    verbose: bool,
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn emit(args: &Args, config: &RunConfig, outcome: Result<&run::Outcome, &CliError>) -> Result<(), CliError> {
    let doc = run::document(args.mode, config, outcome);
    let text = output::to_json(&doc).map_err(|e| output_error(Path::new("<json>"), e))?;
    match args.out.as_ref().or(config.output.path.as_ref()) {
        Some(path) => std::fs::write(path, text).map_err(|e| output_error(path, e))?,
        None => print!("{text}"),
    }
    if let (Ok(o), Some(path)) = (outcome, args.csv.as_ref().or(config.output.csv.as_ref())) {
        let Some((nodes, ln_y)) = &o.profile else {
            return Err(CliError::Validation {
                field: "output.csv".into(),
                message: format!("mode `{}` produces no ln Y profile", args.mode.name()),
            });
        };
        let file = File::create(path).map_err(|e| output_error(path, e))?;
        output::write_profile_csv(BufWriter::new(file), nodes, ln_y).map_err(|e| output_error(path, e))?;
    }
    Ok(())
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.status() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let config = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let outcome = run::run(args.mode, &config);
    if let Err(e) = emit(&args, &config, outcome.as_ref()) {
        return fail(&e);
    }
    match outcome {
        Ok(o) => {
            let status = o.status();
            for r in o.residuals.iter().filter(|r| !r.pass) {
                eprintln!("consistency failure: {} = {:e} exceeds {:e}", r.name, r.value, r.threshold);
            }
            if status != ExitStatus::Success {
                return ExitCode::from(status as u8);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
