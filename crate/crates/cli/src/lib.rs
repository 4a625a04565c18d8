//! Command-line front end.
//!
//! Every command resolves its settings (defaults, then the config file,
//! then flags), runs, and leaves a `manifest.json` next to its outputs.
//! The manifest is enough to replay the command with `rerun`.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::{Cli, Command, Common};
use crate::commands::{Normalize, RunInfo};
use crate::error::{exit, CliError, Result};
use crate::manifest::{Outputs, RunManifest, MANIFEST_FILE};
use crate::settings::*;

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match execute(cli.command) {
            Ok(()) => exit::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            code
        }
    }
}

type Runner<S> = fn(&S, &mut Outputs, &mut RunInfo) -> Result<()>;

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenCircuit(a) => from_flags("gen-circuit", &a.common, &a, commands::gen_circuit),
        Command::Run(a) => from_flags("run", &a.common, &a, commands::run),
        Command::Estimate(a) => from_flags("estimate", &a.common, &a, commands::estimate),
        Command::Converge(a) => from_flags("converge", &a.common, &a, commands::converge),
        Command::Analyze(a) => from_flags("analyze", &a.common, &a, commands::analyze),
        Command::Rerun(a) => {
            let m = RunManifest::load(&a.manifest)?;
            let out = a.out_dir;
            match m.command.as_str() {
                "gen-circuit" => replay(&m, out, commands::gen_circuit),
                "run" => replay(&m, out, commands::run),
                "estimate" => replay(&m, out, commands::estimate),
                "converge" => replay(&m, out, commands::converge),
                "analyze" => replay(&m, out, commands::analyze),
                other => Err(CliError::usage(format!("manifest names unknown command {other:?}"))),
            }
        }
    }
}

fn from_flags<S, F>(name: &str, common: &Common, flags: &F, runner: Runner<S>) -> Result<()>
where
    S: Serialize + DeserializeOwned + Default + Normalize,
    F: Serialize,
{
    let config = common.config.as_deref().map(|p| load_config(p).map(|c| (p, c))).transpose()?;
    let mut settings: S = resolve(name, config.as_ref().map(|(p, c)| (*p, c)), flags)?;
    settings.normalize()?;
    run_command(name, &settings, common.out_dir.clone(), runner)
}

fn replay<S>(m: &RunManifest, out_dir: Option<PathBuf>, runner: Runner<S>) -> Result<()>
where
    S: Serialize + DeserializeOwned + Normalize,
{
    let mut settings: S = serde_json::from_value(m.settings.clone())
        .map_err(|e| CliError::usage(format!("manifest settings for {}: {e}", m.command)))?;
    settings.normalize()?;
    run_command(&m.command, &settings, out_dir, runner)
}

fn run_command<S: Serialize>(name: &str, settings: &S, out_dir: Option<PathBuf>, runner: Runner<S>) -> Result<()> {
    let started_at = chrono::Local::now().to_rfc3339();
    let t0 = Instant::now();
    let mut out = Outputs::create(out_dir.unwrap_or_else(|| data_dir().join(name)))?;
    let mut info = RunInfo { seed: None, workers: 1 };
    let result = runner(settings, &mut out, &mut info);
    let exit_code = result.as_ref().map_or_else(CliError::exit_code, |_| exit::SUCCESS);
    let mut artifacts = out.files.clone();
    artifacts.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        command: name.to_string(),
        settings: serde_json::to_value(settings)?,
        seed: info.seed,
        artifacts,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        wall_time_s: t0.elapsed().as_secs_f64(),
        workers: info.workers,
        exit_code,
    };
    out.write_json(MANIFEST_FILE, &manifest)?;
    result
}
