//! Command-line driver: `estimate`, `check` and `report`.
//!
//! Exit codes: 0 pass, 1 check failed, 2 config or input error, 3 numeric
//! failure (NaN distance, non-invertible map).

pub mod checks;
pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nadyn_core::entropy::{estimate_entropy, EntropyReport};
use nadyn_core::system::SystemSpec;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nadyn_core::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("check {0} failed")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nadyn", version, about = "Entropy estimation for non-autonomous systems")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count tables and entropy reports for every system and index.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs one property check and writes its verdict.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        check: checks::CheckName,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarizes count tables; directories contribute their *.csv files.
    Report { paths: Vec<PathBuf> },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate { config, seed } => {
            let cfg = load(&config, seed, cli.threads)?;
            let out = out_dir(cli.out, &cfg);
            nadyn_core::with_threads(cfg.threads, || cmd_estimate(&cfg, &out))?
        }
        Command::Check { config, check, seed } => {
            let cfg = load(&config, seed, cli.threads)?;
            let out = out_dir(cli.out, &cfg);
            let verdict = nadyn_core::with_threads(cfg.threads, || checks::cmd_check(&cfg, check))??;
            write_file(&out, &format!("check_{}.json", check.name()), &to_json(&verdict)?)?;
            println!("{}", to_json(&verdict)?.trim_end());
            if verdict.passed {
                Ok(())
            } else {
                Err(CliError::CheckFailed(check.name().into()))
            }
        }
        Command::Report { paths } => {
            let threads = cli.threads.unwrap_or(0);
            let summary = nadyn_core::with_threads(threads, || report::cmd_report(&paths))??;
            print!("{}", summary.to_text());
            if let Some(out) = cli.out {
                write_file(&out, "summary.json", &to_json(&summary)?)?;
                write_file(&out, "summary.txt", &summary.to_text())?;
            }
            Ok(())
        }
    }
}

fn load(path: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

/// Estimates every queried system at every index.
pub fn estimate_all(cfg: &ExperimentConfig) -> Result<Vec<EntropyReport>, CliError> {
    let query = cfg.query()?;
    let systems = cfg.systems()?;
    let chosen: Vec<&SystemSpec> = match &query.systems {
        Some(ids) => ids
            .iter()
            .map(|id| {
                systems
                    .get(id)
                    .ok_or_else(|| CliError::Config(format!("query names unknown system {id}")))
            })
            .collect::<Result<_, _>>()?,
        None => cfg.system.iter().map(|s| &systems[&s.id]).collect(),
    };
    let mut reports = Vec::new();
    for sys in chosen {
        let net = query.net(&sys.space, cfg.seed)?;
        for &i in &query.i {
            reports.push(estimate_entropy(sys, i, &query.params(), &net)?);
        }
    }
    Ok(reports)
}

fn cmd_estimate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    for r in estimate_all(cfg)? {
        let stem = format!("{}_i{}", r.system_id, r.i);
        let mut csv = Vec::new();
        r.counts.write_csv(&mut csv)?;
        write_file(out, &format!("{stem}.csv"), &String::from_utf8_lossy(&csv))?;
        write_file(out, &format!("{stem}.json"), &to_json(&r)?)?;
        println!(
            "{}\ti={}\testimate={:.4}\teps={}",
            r.system_id, r.i, r.estimate, r.estimate_epsilon
        );
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.system_id);
        }
    }
    Ok(())
}
