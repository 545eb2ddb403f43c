//! Mock YANG catalog serving module records from fixture files.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::fixture::FixtureError;

#[derive(Default)]
struct Inner {
    records: RwLock<Vec<Value>>,
    /// offsets whose page is answered with an unparseable body
    broken_offsets: RwLock<HashSet<usize>>,
    delay: RwLock<Duration>,
    requests: AtomicUsize,
}

/// Shared view of the catalog contents, usable while it is serving.
#[derive(Clone, Default)]
pub struct CatalogState(Arc<Inner>);

impl CatalogState {
    pub fn new(records: Vec<Value>) -> Self {
        let state = CatalogState::default();
        state.set_records(records);
        state
    }

    pub fn set_records(&self, records: Vec<Value>) {
        *self.0.records.write().unwrap() = records;
    }

    pub fn records(&self) -> Vec<Value> {
        self.0.records.read().unwrap().clone()
    }

    pub fn break_page_at(&self, offset: usize) {
        self.0.broken_offsets.write().unwrap().insert(offset);
    }

    pub fn set_delay(&self, delay: Duration) {
        *self.0.delay.write().unwrap() = delay;
    }

    pub fn requests(&self) -> usize {
        self.0.requests.load(Ordering::SeqCst)
    }
}

/// Accepts a single record, an array of records, or `{"modules": [...]}`.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<Value>, FixtureError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io { path: origin.clone(), source })?;
    let value: Value =
        serde_yaml::from_str(&text).map_err(|e| FixtureError::Parse { path: origin.clone(), message: e.to_string() })?;
    match value {
        Value::Array(items) => Ok(items),
        Value::Object(mut obj) if obj.contains_key("modules") => match obj.remove("modules") {
            Some(Value::Array(items)) => Ok(items),
            _ => Err(FixtureError::Parse { path: origin, message: "\"modules\" must be an array".into() }),
        },
        Value::Object(_) => Ok(vec![value]),
        _ => Err(FixtureError::Parse { path: origin, message: "expected a record or a list of records".into() }),
    }
}

#[derive(Deserialize)]
struct Page {
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn search(State(state): State<CatalogState>, Query(page): Query<Page>) -> Response {
    state.0.requests.fetch_add(1, Ordering::SeqCst);
    let delay = *state.0.delay.read().unwrap();
    if !delay.is_zero() {
        tokio::time::sleep(delay).await;
    }
    let offset = page.offset.unwrap_or(0);
    if state.0.broken_offsets.read().unwrap().contains(&offset) {
        return (StatusCode::OK, [("content-type", "application/json")], "{\"modules\": [").into_response();
    }
    let records = state.0.records.read().unwrap();
    let limit = page.limit.unwrap_or(records.len()).max(1);
    let modules: Vec<Value> = records.iter().skip(offset).take(limit).cloned().collect();
    Json(json!({ "modules": modules })).into_response()
}

pub fn router(state: CatalogState) -> Router {
    Router::new().route("/api/search/modules", get(search)).with_state(state)
}

pub struct MockCatalog {
    pub addr: SocketAddr,
    pub state: CatalogState,
    stop: watch::Sender<bool>,
    task: tokio::task::JoinHandle<()>,
}

impl MockCatalog {
    pub async fn start(addr: SocketAddr, state: CatalogState) -> std::io::Result<MockCatalog> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (stop, mut rx) = watch::channel(false);
        let app = router(state.clone());
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = rx.changed().await;
                })
                .await;
        });
        Ok(MockCatalog { addr, state, stop, task })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(self) {
        let _ = self.stop.send(true);
        let _ = self.task.await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::bundled_path;

    #[test]
    fn loads_bundled_records() {
        let c1 = load_records(bundled_path("catalog/c1-ietf-interfaces.json")).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0]["tree-type"], "nmda-compatible");
    }
}
