use std::path::PathBuf;
use std::process::ExitCode;

use chainid_cli::inspect::{self, Query};
use chainid_cli::{costs, exit, run, scenarios, ConfigError, RunOptions, ScenarioConfig};
use chainid_core::economics::{FeeSchedule, UsdQuote};
use chainid_core::ledger::{Address, Ledger, Txid};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainid", version, about = "Blockchain-anchored identity scenarios and costs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for blinding factors and proof nonces.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Fee rate in satoshi per byte.
    #[arg(long, global = true)]
    fee_rate: Option<u64>,
    /// BTC price in USD, e.g. 2720 or 2720.50.
    #[arg(long, global = true)]
    usd: Option<UsdQuote>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its transcript.
    Run {
        /// Scenario file in TOML.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Built-in scenario: museum, university, fork-attack or revocation.
        #[arg(long)]
        scenario: Option<String>,
        /// Write the final ledger as JSON.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Keep proofs in this directory.
        #[arg(long)]
        proof_dir: Option<PathBuf>,
    },
    /// Print transaction sizes, fees and identity costs.
    Costs,
    /// Query an exported ledger.
    Inspect {
        /// Ledger JSON written by `run --export`.
        #[arg(long)]
        ledger: PathBuf,
        #[command(subcommand)]
        query: InspectQuery,
    },
}

#[derive(Subcommand)]
enum InspectQuery {
    /// A transaction by id.
    Tx { txid: Txid },
    /// An identity by its publish transaction.
    Identity { publish: Txid },
    /// Authentications made by an address.
    Report { address: Address },
    /// Unspent outputs of a branch (the active one by default).
    Utxo {
        #[arg(long)]
        branch: Option<usize>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    code(exit::CONFIG_ERROR)
}

fn schedule(global: &Global) -> FeeSchedule {
    let mut s = FeeSchedule::standard();
    if let Some(r) = global.fee_rate {
        s.rate = r;
    }
    if let Some(u) = global.usd {
        s.usd_per_btc = u;
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    match cli.command {
        Command::Run { config, scenario, export, proof_dir } => {
            let loaded: Result<ScenarioConfig, ConfigError> = match (&config, &scenario) {
                (Some(path), _) => ScenarioConfig::load(path),
                (None, Some(name)) => scenarios::load(name),
                (None, None) => unreachable!("clap requires one of --config and --scenario"),
            };
            let config = match loaded {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let options = RunOptions { seed: g.seed, fee_rate: g.fee_rate, usd: g.usd, proof_dir };
            let result = match run(&config, &options) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            if g.json {
                println!("{}", result.transcript.to_json());
            } else {
                print!("{}", result.transcript.summary());
            }
            if let Some(path) = export {
                if let Err(e) = std::fs::write(&path, result.ledger.export_json()) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return code(exit::STEP_FAILURE);
                }
            }
            if let Some(f) = &result.transcript.failure {
                if g.json {
                    eprintln!("step {} ({}) failed: {}", f.step, f.action, f.message);
                }
                return code(exit::STEP_FAILURE);
            }
            code(exit::SUCCESS)
        }
        Command::Costs => {
            let s = schedule(g);
            if let Err(e) = s.validate() {
                return config_error(e);
            }
            let table = match costs::table(&s) {
                Ok(t) => t,
                Err(e) => return config_error(e),
            };
            if g.json {
                println!("{}", serde_json::to_string_pretty(&table).expect("cost table serializes"));
            } else {
                print!("{}", costs::render(&table));
            }
            code(exit::SUCCESS)
        }
        Command::Inspect { ledger, query } => {
            let text = match std::fs::read_to_string(&ledger) {
                Ok(t) => t,
                Err(e) => return config_error(format!("cannot read {}: {e}", ledger.display())),
            };
            let ledger = match Ledger::import_json(&text) {
                Ok(l) => l,
                Err(e) => return config_error(e),
            };
            let query = match query {
                InspectQuery::Tx { txid } => Query::Tx(txid),
                InspectQuery::Identity { publish } => Query::Identity(publish),
                InspectQuery::Report { address } => Query::Report(address),
                InspectQuery::Utxo { branch } => Query::Utxo { branch },
            };
            match inspect::inspect(&ledger, &query) {
                Ok(report) => {
                    if g.json {
                        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    } else {
                        print!("{}", inspect::render(&report));
                    }
                    code(exit::SUCCESS)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(exit::STEP_FAILURE)
                }
            }
        }
    }
}
