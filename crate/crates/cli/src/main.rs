use std::path::{Path, PathBuf};
use std::process::ExitCode;

use archscale_core::experiment::{self, ExperimentConfig};
use archscale_core::Error;
use clap::{Parser, Subcommand};

/// Environment variables with this prefix override config keys; `__`
/// separates nesting levels, e.g. `ARCHSCALE_SIMULATION__MAX_REPLICAS=50`.
const ENV_PREFIX: &str = "ARCHSCALE_";

#[derive(Debug, Parser)]
#[command(name = "archscale", version, about = "Archetype-aware autoscaling experiments")]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic corpus and scenario traces plus a manifest.
    Generate,
    /// Weak-label every corpus window.
    Label,
    /// Train and calibrate the classifier, then score the test slice.
    Train,
    /// Dump the feature vector of every corpus window.
    Features,
    /// Run one trial of every scenario and strategy with full logs.
    Simulate,
    /// Run all trials and write the comparison report.
    Compare,
    /// Print the effective configuration.
    Config,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Validation(format!("override path {} crosses a non-table value", path.join(".")))
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn load_config(
    path: Option<&Path>,
    env: impl Iterator<Item = (String, String)>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let mut overrides: Vec<(String, String)> = env
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_string(), v)))
        .filter(|(k, _)| !k.is_empty())
        .collect();
    overrides.sort();
    for (key, raw) in overrides {
        let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(CliError::Validation(format!("bad override variable {ENV_PREFIX}{key}")));
        }
        log::debug!("override {} = {raw}", path.join("."));
        apply_override(&mut table, &path, parse_value(&raw))?;
    }
    let mut cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(format!("config: {e}")))?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let cfg = load_config(cli.config.as_deref(), std::env::vars(), cli.out, cli.seed)?;
    let text = match cli.command {
        Command::Generate => experiment::cmd_generate(&cfg)?,
        Command::Label => experiment::cmd_label(&cfg)?,
        Command::Train => experiment::cmd_train(&cfg)?,
        Command::Features => experiment::cmd_features(&cfg)?,
        Command::Simulate => experiment::cmd_simulate(&cfg)?,
        Command::Compare => experiment::cmd_compare(&cfg)?,
        Command::Config => cfg.to_toml_string()?,
    };
    Ok(text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> impl Iterator<Item = (String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<Vec<_>>()
            .into_iter()
    }

    #[test]
    fn env_overrides_nested_keys() {
        let cfg = load_config(
            None,
            vars(&[
                ("ARCHSCALE_SIMULATION__MAX_REPLICAS", "50"),
                ("ARCHSCALE_TRIALS", "3"),
                ("ARCHSCALE_REI__PRESET", "stability-heavy"),
                ("OTHER", "1"),
            ]),
            None,
            Some(9),
        )
        .unwrap();
        assert_eq!(cfg.simulation.max_replicas, 50);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.rei.preset.as_deref(), Some("stability-heavy"));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn invalid_override_is_a_validation_error() {
        let err = load_config(None, vars(&[("ARCHSCALE_TRIALS", "0")]), None, None).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        let err = load_config(None, vars(&[("ARCHSCALE_TRIALS", "many")]), None, None).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
    }

    #[test]
    fn values_parse_as_toml_literals() {
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("out/dir"), toml::Value::String("out/dir".into()));
        assert_eq!(parse_value("[\"hpa\"]").as_array().unwrap().len(), 1);
    }
}
