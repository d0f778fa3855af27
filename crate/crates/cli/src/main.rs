//! `oatf` command-line runner.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage error, 3 invalid config or
//! contract file, 4 no feasible contract, 5 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oatf::negotiation::Negotiated;
use oatf::report::{self, Mechanism};
use oatf::{ContractFile, Error, RiskReport, SimConfig};

const CONTRACTS_FILE: &str = "contracts.toml";

#[derive(Parser)]
#[command(name = "oatf", version, about = "Overbooked forward-contract market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Negotiate contracts, simulate the selected mechanisms and write results.
    Run(RunArgs),
    /// Negotiate OATF and CBooking contracts and print the outcome.
    Negotiate(NegotiateArgs),
    /// Print the built-in case-study configuration.
    DefaultConfig {
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value per line).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mc_samples_negotiation`.
    #[arg(long)]
    mc_negotiation: Option<usize>,
    /// Overrides `mc_samples_certify`.
    #[arg(long)]
    mc_certify: Option<usize>,
    /// Write the negotiated contracts to this file.
    #[arg(long)]
    save_contracts: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subset of OATF, CBooking, SpotT_UP, SpotT_DP.
    #[arg(long, value_delimiter = ',', default_values_t = Mechanism::ALL)]
    mechanisms: Vec<Mechanism>,
    #[arg(long, default_value_t = 5000)]
    rounds: usize,
    /// Output directory for rounds.csv, summary.json, summary.txt and contracts.toml.
    #[arg(long)]
    out: PathBuf,
    /// Skip negotiation and use a saved contract file.
    #[arg(long)]
    load_contracts: Option<PathBuf>,
}

#[derive(Args)]
struct NegotiateArgs {
    #[command(flatten)]
    common: Common,
}

fn load_config(common: &Common) -> oatf::Result<SimConfig> {
    let mut config = SimConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.scenario.market.rng_seed = seed;
    }
    if let Some(n) = common.mc_negotiation {
        config.negotiation.n_mc_negotiation = n;
    }
    if let Some(n) = common.mc_certify {
        config.negotiation.n_mc_certify = n;
    }
    Ok(config)
}

fn describe(name: &str, n: &Negotiated<f64>) {
    let w = &n.winner;
    let (e, c) = (&w.edge_contract, &w.cloud_contract);
    println!(
        "{name}: r_user={} p={:.4} q={:.4} c={:.4} | r_backup={} p={:.4} q={:.4}",
        e.reserved_per_user,
        e.price_user_to_edge,
        e.penalty_user_to_edge,
        e.compensation_edge_to_user,
        c.backup_slots,
        c.price_edge_to_cloud,
        c.penalty_edge_to_cloud
    );
    println!(
        "  expected utility: users {:.4} edge {:.4} cloud {:.4}",
        w.expected_user_utility, w.expected_edge_utility, w.expected_cloud_utility
    );
    println!("  analytic risks:  {}", risks(&w.risk_report));
    println!("  certified risks: {}", risks(&n.certification));
    println!(
        "  {} consensus quote pairs, {} evaluations",
        n.consensus_candidates, n.evaluations
    );
}

fn risks(r: &RiskReport) -> String {
    let p = r.probabilities();
    format!(
        "neg {:.4} unserved {:.4} edge_below {:.4} edge_under {:.4} cloud {:.4} ({})",
        p[0],
        p[1],
        p[2],
        p[3],
        p[4],
        if r.satisfied { "within bounds" } else { "VIOLATED" }
    )
}

fn negotiate_all(config: &SimConfig, save: Option<&Path>) -> oatf::Result<ContractFile> {
    let (oatf, cbooking) = report::negotiate_contracts(config)?;
    describe("OATF", &oatf);
    describe("CBooking", &cbooking);
    let file = ContractFile::new(oatf.winner.contracts(), cbooking.winner.contracts());
    if let Some(path) = save {
        file.save(path)?;
    }
    Ok(file)
}

fn run(cli: Cli) -> oatf::Result<()> {
    match cli.command {
        Command::DefaultConfig { out } => {
            let text = SimConfig::paper().to_text();
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?,
                None => print!("{text}"),
            }
        }
        Command::Negotiate(args) => {
            let config = load_config(&args.common)?;
            negotiate_all(&config, args.common.save_contracts.as_deref())?;
        }
        Command::Run(args) => {
            let config = load_config(&args.common)?;
            let contracts = match &args.load_contracts {
                Some(path) => ContractFile::load(path)?,
                None => negotiate_all(&config, None)?,
            };
            if let Some(path) = &args.common.save_contracts {
                contracts.save(path)?;
            }
            std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
                path: args.out.clone(),
                source: e,
            })?;
            contracts.save(&args.out.join(CONTRACTS_FILE))?;
            let seed = config.scenario.market.rng_seed;
            let summary = report::run_experiment(&config, &contracts, &args.mechanisms, args.rounds, seed, &args.out)?;
            print!("{}", summary.to_table());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Invalid { .. } => 3,
        Error::NoFeasibleContract(_) => 4,
        Error::Io { .. } | Error::Csv(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oatf: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
