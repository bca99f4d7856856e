//! Command-line front end: configuration, market-data files, command
//! runners and plot-data emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod verify;

use std::path::PathBuf;

use serde::Serialize;

pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};

/// Version stamped on every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// What a successful run wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub out: PathBuf,
    pub artifacts: Vec<String>,
}

/// Validate `cfg` for `command`, run it, and write artifacts under
/// `cfg.out` (default `out`).
pub fn run(command: Command, cfg: &RunConfig) -> CliResult<Summary> {
    cfg.validate(command)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = io::Artifacts::new(&dir)?;
    let result = match command {
        Command::Bootstrap => commands::bootstrap(cfg, &mut out),
        Command::Price => commands::price(cfg, &mut out),
        Command::Simulate => commands::simulate(cfg, &mut out),
        Command::Calibrate => commands::calibrate_cmd(cfg, &mut out),
        Command::ConstructKernel => commands::construct_kernel(cfg, &mut out),
        Command::Verify => verify::verify(cfg, &mut out),
    };
    result.map(|()| Summary { command: command.name(), out: dir, artifacts: out.written() })
}
