//! Experiment runner for the WaveHoltz library: parses configs, runs the named
//! experiments and writes their CSV artifacts.

pub mod check;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod problem;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction};

pub use check::{check, CheckLine};
pub use commands::{run, Command, Outcome};
pub use config::ExperimentConfig;
pub use error::CliError;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "WAVEHOLTZ_THREADS";

/// A parsed command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: ExperimentConfig,
    pub check: bool,
}

fn clap_command() -> clap::Command {
    let names: Vec<&'static str> = Command::ALL.iter().map(|c| c.name()).collect();
    let mut cmd = clap::Command::new("waveholtz")
        .about("Runs WaveHoltz experiments and writes CSV data")
        .after_help("Every config key can be given as --key value; flags override the config file and the last occurrence wins.")
        .arg(Arg::new("command").required(true).value_parser(names))
        .arg(Arg::new("config").long("config").value_name("FILE").value_parser(clap::value_parser!(PathBuf)))
        .arg(Arg::new("check").long("check").action(ArgAction::SetTrue).help("Assert the experiment's acceptance properties (exit 3 on failure)"));
    for key in ExperimentConfig::KEYS.iter().filter(|k| **k != "experiment") {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").action(ArgAction::Append));
    }
    cmd
}

/// Parses `args` (program name first). Help and version requests come back
/// as the clap error that prints them.
pub fn parse_args<I, T>(args: I) -> Result<Invocation, Result<clap::Error, CliError>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = clap_command().try_get_matches_from(args).map_err(Ok)?;
    let command: Command = m.get_one::<String>("command").expect("required").parse().map_err(Err)?;
    let mut config = command.defaults();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        config.apply_text(&std::fs::read_to_string(path).map_err(|e| Err(CliError::io(path, e)))?).map_err(Err)?;
    }
    for key in ExperimentConfig::KEYS.iter().filter(|k| **k != "experiment") {
        if let Some(value) = m.get_many::<String>(key).and_then(|v| v.last()) {
            config.set(key, value).map_err(Err)?;
        }
    }
    config.experiment = command.name().into();
    Ok(Invocation { command, config, check: m.get_flag("check") })
}

/// Caps the global thread pool from [`THREADS_ENV`]. Later calls are no-ops.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer (got '{v}')")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs, writes the tables into `config.out` and evaluates checks when asked.
pub fn execute(inv: &Invocation) -> Result<(Outcome, Vec<PathBuf>, Vec<CheckLine>), CliError> {
    let outcome = run(inv.command, &inv.config)?;
    let paths = outcome
        .tables
        .iter()
        .map(|t| t.save(&inv.config.out, &inv.config))
        .collect::<Result<Vec<_>, _>>()?;
    let lines = if inv.check { check(inv.command, &inv.config, &outcome) } else { Vec::new() };
    Ok((outcome, paths, lines))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Invocation {
        parse_args(std::iter::once("waveholtz").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_and_last_wins() {
        let inv = parse(&["converge", "--omega", "3", "--omega", "4.5", "--out", "x", "--check"]);
        assert_eq!(inv.command, Command::Converge);
        assert_eq!(inv.config.omega, 4.5);
        assert_eq!(inv.config.out, PathBuf::from("x"));
        assert!(inv.check);
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "omega = 7\norder = 4\n").unwrap();
        let inv = parse(&["converge", "--order", "2", "--config", path.to_str().unwrap()]);
        assert_eq!((inv.config.omega, inv.config.order), (7.0, 2));
    }

    #[test]
    fn scaling_defaults() {
        let inv = parse(&["scaling"]);
        assert_eq!((inv.config.dim, inv.config.omega, inv.config.periods), (2, 11.0, 2));
        assert_eq!(inv.config.experiment, "scaling");
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let bad = |args: &[&str]| parse_args(std::iter::once("waveholtz").chain(args.iter().copied())).unwrap_err();
        assert!(matches!(bad(&["converge", "--omega", "x"]), Err(CliError::Config(_))));
        assert!(matches!(bad(&["converge", "--colour", "1"]), Ok(_)));
        assert!(matches!(bad(&["nonsense"]), Ok(_)));
        assert!(matches!(bad(&["converge", "--config", "/nonexistent/c.cfg"]), Err(CliError::Io { .. })));
    }
}
