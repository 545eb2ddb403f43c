//! Network inventory service: an embedded NGSI-LD context store behind a
//! REST API, the platform registry, the catalog connector and the
//! inventory views.

use std::net::SocketAddr;
use std::sync::Arc;

use netinv_core::ContextStore;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

pub mod connector;
pub mod error;
pub mod inventory;
pub mod registry;
pub mod routes;

pub use connector::{Connector, ConnectorConfig, SyncReport};
pub use registry::{RegistrationEvent, RegistrationReport, Registry};
pub use routes::router;

pub struct AppState {
    pub store: Arc<ContextStore>,
    pub registry: Registry,
    pub connector: Arc<Connector>,
    /// defaults for manual syncs
    pub catalog: ConnectorConfig,
}

impl AppState {
    pub fn new(store: ContextStore, catalog: ConnectorConfig) -> Arc<AppState> {
        let store = Arc::new(store);
        Arc::new(AppState {
            registry: Registry::new(store.clone()),
            connector: Arc::new(Connector::new(store.clone())),
            store,
            catalog,
        })
    }
}

/// A service instance serving on a bound listener until stopped or dropped.
pub struct RunningService {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    stop: watch::Sender<bool>,
    task: Option<JoinHandle<()>>,
}

impl RunningService {
    pub async fn start(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<RunningService> {
        let addr = listener.local_addr()?;
        let (stop, mut rx) = watch::channel(false);
        let app = router(state.clone());
        let task = tokio::spawn(async move {
            let shutdown = async move {
                let _ = rx.changed().await;
            };
            if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                log::error!("http server failed: {e}");
            }
        });
        Ok(RunningService { addr, state, stop, task: Some(task) })
    }

    /// Binds `addr` and serves an in-memory store.
    pub async fn start_in_memory(addr: SocketAddr) -> std::io::Result<RunningService> {
        let listener = TcpListener::bind(addr).await?;
        RunningService::start(listener, AppState::new(ContextStore::in_memory(), ConnectorConfig::default())).await
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) {
        let _ = self.stop.send(true);
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.stop.send(true);
    }
}
