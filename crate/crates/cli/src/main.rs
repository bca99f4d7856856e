use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use multicurve_cli::{run, CliError, Command, RunConfig, SCHEMA_VERSION};

/// Multiple-curve term-structure toolkit.
#[derive(Parser)]
#[command(name = "multicurve", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (JSON or `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<String, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.out.is_some() {
        cfg.out.clone_from(&args.out);
    }
    let summary = run(args.command, &cfg)?;
    let mut v = serde_json::to_value(&summary).expect("summary serialises");
    v["schema_version"] = SCHEMA_VERSION.into();
    Ok(v.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MULTICURVE_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match execute(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
