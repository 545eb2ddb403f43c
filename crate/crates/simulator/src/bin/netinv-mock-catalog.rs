use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use netinv_sim::catalog::{load_records, CatalogState, MockCatalog};

/// Serve a YANG-catalog style module search API from record files.
#[derive(Parser)]
#[command(name = "netinv-mock-catalog", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8500")]
    listen: SocketAddr,
    /// Record file: one record, an array, or {"modules": [...]}
    #[arg(long = "fixture")]
    fixtures: Vec<PathBuf>,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut records = Vec::new();
    for path in &args.fixtures {
        match load_records(path) {
            Ok(r) => records.extend(r),
            Err(e) => {
                eprintln!("netinv-mock-catalog: {e}");
                std::process::exit(1);
            }
        }
    }
    let count = records.len();
    let catalog = match MockCatalog::start(args.listen, CatalogState::new(records)).await {
        Ok(c) => c,
        Err(e) => {
            eprintln!("netinv-mock-catalog: binding {}: {e}", args.listen);
            std::process::exit(1);
        }
    };
    println!("serving {count} records on {}", catalog.base_url());
    let _ = tokio::signal::ctrl_c().await;
    catalog.stop().await;
}
