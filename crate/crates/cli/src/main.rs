//! `rumor`: batch front end for the spatial rumor toolkit.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{parse_assignment, parse_config_text, Command, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "rumor", version, about = "Simulate and check the spatial rumor process")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Config file with one `key = value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Required, either here or in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "rumor-out")]
    out: PathBuf,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Any config key, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long = "dim", global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    side: Option<usize>,
    #[arg(long, global = true)]
    boundary: Option<String>,
    #[arg(long, global = true)]
    engine: Option<String>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Run one trajectory.
    Simulate,
    /// Drive the rumor and contact processes with shared clocks and check dominance.
    Couple,
    /// Integrate the mean-field system and classify the free-rumor equilibrium.
    Meanfield,
    /// Compare engine output with the exact law on a tiny box.
    OracleCheck,
    /// Survival probability over a (λ, α) grid.
    Sweep,
    /// Block-event open probability.
    Block,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Couple => Command::Couple,
            Sub::Meanfield => Command::Meanfield,
            Sub::OracleCheck => Command::OracleCheck,
            Sub::Sweep => Command::Sweep,
            Sub::Block => Command::Block,
        }
    }
}

impl Cli {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut kv = Vec::new();
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        };
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("format", self.format.clone());
        flag("lambda", self.lambda.map(|v| v.to_string()));
        flag("alpha", self.alpha.map(|v| v.to_string()));
        flag("d", self.d.map(|v| v.to_string()));
        flag("side", self.side.map(|v| v.to_string()));
        flag("boundary", self.boundary.clone());
        flag("engine", self.engine.clone());
        flag("t_max", self.t_max.map(|v| v.to_string()));
        flag("replicas", self.replicas.map(|v| v.to_string()));
        for s in &self.set {
            kv.push(parse_assignment(s)?);
        }
        Ok(kv)
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let cfg = RunConfig::resolve(cli.command.into(), &file, &cli.overrides()?)?;
    commands::run(&cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok(summary) => {
            eprintln!("{summary} [{:.2}s]", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
