use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use netinv_core::ContextStore;
use netinv_service::connector::{self, ConnectorConfig};
use netinv_service::{AppState, RunningService};

/// Network inventory service.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// address to serve HTTP on
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// directory holding the entity log and snapshot
    #[arg(long, default_value = "netinv-data", conflicts_with = "in_memory")]
    data_dir: PathBuf,
    /// keep the graph in memory only
    #[arg(long)]
    in_memory: bool,
    /// external catalog base URL; enables the scheduled sync
    #[arg(long, env = "CATALOG_URL")]
    catalog_url: Option<String>,
    /// time between scheduled catalog syncs (minimum 1m)
    #[arg(long, env = "CATALOG_INTERVAL", default_value = "24h", value_parser = humantime::parse_duration)]
    catalog_interval: Duration,
    #[arg(long, default_value_t = connector::DEFAULT_PAGE_SIZE)]
    catalog_page_size: usize,
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let catalog = ConnectorConfig {
        enabled: args.catalog_url.is_some(),
        base_url: args.catalog_url.clone().unwrap_or_default(),
        interval: args.catalog_interval,
        page_size: args.catalog_page_size,
    };
    if catalog.enabled {
        if let Err(e) = catalog.validate() {
            eprintln!("netinv-server: {e}");
            std::process::exit(1);
        }
    }
    let store = if args.in_memory {
        ContextStore::in_memory()
    } else {
        match ContextStore::open(&args.data_dir) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("netinv-server: opening {}: {e}", args.data_dir.display());
                std::process::exit(1);
            }
        }
    };
    let listener = match tokio::net::TcpListener::bind(args.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("netinv-server: binding {}: {e}", args.listen);
            std::process::exit(1);
        }
    };
    let state = AppState::new(store, catalog.clone());
    let _schedule = connector::run_schedule(state.connector.clone(), &catalog).expect("validated above");
    let service = RunningService::start(listener, state).await.expect("listener is bound");
    log::info!("serving on {}", service.base_url());
    let _ = tokio::signal::ctrl_c().await;
    service.stop().await;
}
