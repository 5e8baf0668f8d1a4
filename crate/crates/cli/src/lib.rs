//! The `passchain` operator tool.

pub mod audit;
pub mod clock;
pub mod dump;
pub mod scenario;
pub mod serve;

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use passchain_core::bench::{bench_consensus, DEFAULT_POW_BITS};
use passchain_core::network::{bootstrap, load, NetworkError, Topology};
use passchain_gateway::http::GATEWAY_PORT_ENV;
use passchain_gateway::{Gateway, GatewayConfig, GatewayError};
use rand::rngs::ChaCha20Rng;
use rand::SeedableRng;

use crate::clock::ClockSpec;
use crate::scenario::{Decision, ScenarioName, StepError};

pub const DEFAULT_TOPOLOGY: &str = "config/topology.toml";
pub const DEFAULT_DATA_DIR: &str = "data";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{code}: {message}", code = .0.code, message = .0.message)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "passchain", version, about = "Permissioned travel-document ledger: operator tool")]
pub struct Cli {
    /// Where ledgers, keys and the manifest live.
    #[arg(long, global = true, env = "DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// `system`, or `step:<rfc3339>[,<millis>]` for a reproducible clock.
    #[arg(long, global = true, default_value = "system")]
    pub clock: ClockSpec,
    /// Seed for key generation and salts; OS randomness when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create CAs, identities and the channel described by a topology file.
    Bootstrap {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Run a scripted walk-through against a bootstrapped network.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        /// Source of the agents' passwords.
        #[arg(long, default_value = DEFAULT_TOPOLOGY)]
        topology: PathBuf,
        #[arg(long, value_enum, default_value = "APPROVE")]
        decision: Decision,
    },
    /// Verify every ledger copy and compare them; exits 1 on any failure.
    Audit,
    /// Write blocks FROM..=TO of the orderer's chain, one file each.
    Dump {
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Digest cost of the ordering service against a toy proof of work.
    Bench {
        #[arg(long, default_value_t = 100)]
        txs: usize,
        #[arg(long, default_value_t = DEFAULT_POW_BITS)]
        pow_bits: u32,
        #[arg(long)]
        json: bool,
    },
    /// Serve the portal API over HTTP until interrupted.
    Serve {
        #[arg(long, env = GATEWAY_PORT_ENV, default_value_t = 8080)]
        gateway_port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
    },
}

impl Cli {
    fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => rand::make_rng(),
        }
    }

    /// The flag or `DATA_DIR`, then the topology's own setting.
    fn data_dir(&self, topology: Option<&Topology>) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| topology.and_then(|t| t.data_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    fn gateway(&self, data_dir: &Path) -> Result<Gateway, CliError> {
        let deployment = load(data_dir, self.clock.build())?;
        Ok(Gateway::new(deployment, GatewayConfig::from_env()?, self.rng()))
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Bootstrap { topology } => {
            let topology = Topology::load(topology)?;
            let dir = cli.data_dir(Some(&topology));
            let d = bootstrap(&topology, &dir, &mut cli.rng(), cli.clock.build())?;
            let height = d.network.with_orderer(|o| o.height());
            println!(
                "bootstrapped channel {} in {}: {} organizations, height {height}",
                d.manifest.channel_id,
                dir.display(),
                d.manifest.orgs.len()
            );
        }
        Command::Scenario {
            name: ScenarioName::PaperDemo,
            topology,
            decision,
        } => {
            let topology = Topology::load(topology)?;
            let gateway = cli.gateway(&cli.data_dir(Some(&topology)))?;
            let steps = scenario::paper_demo(&gateway, &topology, *decision, &mut |s| println!("{s}"))?;
            let height = gateway.network().with_orderer(|o| o.height());
            println!("scenario paper-demo OK: {} steps, chain height {height}", steps.len());
        }
        Command::Audit => {
            let report = audit::audit(&cli.data_dir(None))?;
            println!("{report}");
            if !report.is_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Dump { from, to, out } => {
            let files = dump::dump(&cli.data_dir(None), *from, *to, out)?;
            println!("wrote {} block file(s) to {}", files.len(), out.display());
        }
        Command::Bench { txs, pow_bits, json } => {
            let report = bench_consensus(*txs, *pow_bits, cli.seed.unwrap_or(0))?;
            if *json {
                let mut value = serde_json::to_value(&report).expect("report serializes");
                value["ratio"] = report.ratio().into();
                value["pow"]["meanTrials"] = report.pow.mean_trials().into();
                println!("{value}");
            } else {
                println!("{:<8} {:>6} {:>7} {:>12} {:>9}", "path", "txs", "blocks", "digests", "wall_ms");
                for (name, p) in [("orderer", &report.orderer), ("pow", &report.pow.path)] {
                    println!(
                        "{name:<8} {:>6} {:>7} {:>12} {:>9}",
                        p.txs,
                        p.blocks,
                        p.digest_evaluations,
                        p.wall.as_millis()
                    );
                }
                println!(
                    "mean pow trials per block {:.0} (expected 2^{pow_bits} = {})",
                    report.pow.mean_trials(),
                    1u64 << pow_bits
                );
                println!("digest evaluations pow/orderer {:.1}x", report.ratio());
            }
        }
        Command::Serve { gateway_port, bind } => {
            let gateway = cli.gateway(&cli.data_dir(None))?;
            serve::serve(gateway, SocketAddr::new(*bind, *gateway_port))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
