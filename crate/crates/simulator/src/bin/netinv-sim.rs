use std::net::IpAddr;
use std::path::PathBuf;

use clap::Parser;
use netinv_sim::{Fixture, Ports, Simulator};

/// Serve simulated NETCONF/gNMI devices described by fixture files.
#[derive(Parser)]
#[command(name = "netinv-sim", version)]
struct Args {
    /// Fixture file (YAML or JSON); repeat for several devices
    #[arg(long = "fixture", required = true)]
    fixtures: Vec<PathBuf>,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Ignore fixture ports and bind OS-assigned ones
    #[arg(long)]
    ephemeral: bool,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let ports = if args.ephemeral { Ports::Ephemeral } else { Ports::Fixture };
    let mut running = Vec::new();
    for path in &args.fixtures {
        let started = match Fixture::load(path) {
            Ok(fixture) => Simulator::start(fixture, args.host, ports).await,
            Err(e) => Err(e.into()),
        };
        match started {
            Ok(sim) => {
                for ep in &sim.endpoints {
                    println!("{} {} {}", sim.fixture.name, ep.transport.kind.as_str(), ep.addr);
                }
                running.push(sim);
            }
            Err(e) => {
                eprintln!("netinv-sim: {e}");
                std::process::exit(1);
            }
        }
    }
    let _ = tokio::signal::ctrl_c().await;
    for sim in running {
        sim.stop().await;
    }
}
