//! `ddrm` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 config error, 3 invariant
//! violation, 4 broken or malformed log, 5 replayed metrics mismatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ddrm_core::adversary::ScenarioError;
use ddrm_core::ledger::parse_ndjson;
use ddrm_core::report::{gas_table, render_gas_table, render_metrics_table};
use ddrm_core::{replay_verify, run_scenario, ReplayError, RunConfig, ScenarioMetrics};

#[derive(Debug, Parser)]
#[command(name = "ddrm", version, about = "Drone-service reputation protocol simulator")]
struct Cli {
    /// Print the default config and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured scenario and write metrics, logs and a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Print the gas-cost table.
    GasTable {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Check an exported event log's hash chain and replay its metrics.
    Verify {
        log: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Print the default config.
    PrintDefaults,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn cmd_run(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>, format: Format) -> Outcome {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    let mut runs = cfg
        .scenarios
        .par_iter()
        .map(|sc| run_scenario(sc, &cfg.protocol, &cfg.gas, cfg.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            ScenarioError::Invariant { .. } => Failure::new(3, e.to_string()),
            _ => Failure::new(2, e.to_string()),
        })?;
    runs.sort_by(|a, b| a.name.cmp(&b.name));

    fs::create_dir_all(&out).map_err(|e| Failure::new(1, format!("{}: {e}", out.display())))?;
    for r in &runs {
        write(&out.join(format!("{}.metrics.json", r.name)), &to_json(&r.metrics))?;
        write(&out.join(format!("{}.events.ndjson", r.name)), &r.to_ndjson())?;
    }
    let rows: Vec<(String, ScenarioMetrics)> = runs.iter().map(|r| (r.name.clone(), r.metrics.clone())).collect();
    let table = render_metrics_table(&rows);
    write(&out.join("summary.txt"), &table)?;
    match format {
        Format::Table => print!("{table}"),
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = rows
                .into_iter()
                .map(|(name, m)| (name, serde_json::to_value(m).expect("serializable")))
                .collect();
            print!("{}", to_json(&map));
        }
    }
    Ok(())
}

fn cmd_gas_table(config: Option<&Path>, format: Format) -> Outcome {
    let cfg = load_config(config)?;
    let rows = gas_table(&cfg.gas, cfg.usd_per_ether);
    match format {
        Format::Table => print!("{}", render_gas_table(&rows)),
        Format::Json => print!("{}", to_json(&rows)),
    }
    Ok(())
}

fn cmd_verify(log: &Path, format: Format) -> Outcome {
    let text = fs::read_to_string(log).map_err(|e| Failure::new(4, format!("{}: {e}", log.display())))?;
    let records = parse_ndjson(&text).map_err(|e| Failure::new(4, format!("{}: {e}", log.display())))?;
    let metrics = replay_verify(&records).map_err(|e| match e {
        ReplayError::Mismatch { .. } => Failure::new(5, format!("{}: {e}", log.display())),
        _ => Failure::new(4, format!("{}: {e}", log.display())),
    })?;
    match format {
        Format::Table => {
            let name = log.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let name = name.strip_suffix(".events.ndjson").unwrap_or(&name).to_string();
            println!("ok: {} records, chain intact, metrics replayed", records.len());
            print!("{}", render_metrics_table(&[(name, metrics)]));
        }
        Format::Json => print!("{}", to_json(&metrics)),
    }
    Ok(())
}

fn print_defaults() -> Outcome {
    println!("{}", RunConfig::default().to_json_pretty());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        _ if cli.print_defaults => print_defaults(),
        Some(Command::PrintDefaults) => print_defaults(),
        None => Err(Failure::new(2, "no command given; try --help")),
        Some(Command::Run { config, seed, out, format }) => cmd_run(config.as_deref(), seed, out, format),
        Some(Command::GasTable { config, format }) => cmd_gas_table(config.as_deref(), format),
        Some(Command::Verify { log, format }) => cmd_verify(&log, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ddrm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
