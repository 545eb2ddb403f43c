//! Catalog connector: pages through an external catalog's module search
//! API, maps every record and merges it into the graph. Runs on demand and
//! on a fixed schedule.

use std::collections::VecDeque;
use std::future::Future;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use netinv_core::catalog::{dependency_placeholders, is_unchanged, map_catalog_record, merge_policy, CatalogModuleRecord};
use netinv_core::ContextStore;
use serde::Serialize;
use serde_json::Value;
use tokio::task::JoinHandle;

pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(24 * 60 * 60);
pub const MIN_INTERVAL: Duration = Duration::from_secs(60);
pub const DEFAULT_PAGE_SIZE: usize = 500;
const KEPT_REPORTS: usize = 20;
const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectorConfig {
    pub base_url: String,
    pub interval: Duration,
    pub page_size: usize,
    pub enabled: bool,
}

impl Default for ConnectorConfig {
    fn default() -> Self {
        ConnectorConfig { base_url: String::new(), interval: DEFAULT_INTERVAL, page_size: DEFAULT_PAGE_SIZE, enabled: false }
    }
}

impl ConnectorConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        ConnectorConfig { base_url: base_url.into(), enabled: true, ..ConnectorConfig::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        reqwest::Url::parse(&self.base_url).map_err(|e| format!("catalog url {:?}: {e}", self.base_url))?;
        if self.interval < MIN_INTERVAL {
            return Err(format!("catalog interval {:?} is below the 1 minute minimum", self.interval));
        }
        if self.page_size == 0 {
            return Err("catalog page size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SyncReport {
    pub base_url: String,
    pub fetched: usize,
    pub upserted: usize,
    pub unchanged: usize,
    pub failed: usize,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl SyncReport {
    fn start(base_url: &str) -> Self {
        let now = Utc::now();
        SyncReport {
            base_url: base_url.to_string(),
            fetched: 0,
            upserted: 0,
            unchanged: 0,
            failed: 0,
            started_at: now,
            finished_at: now,
            error: None,
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, what: String) {
        self.failed += 1;
        self.failures.push(what);
    }
}

enum Page {
    Records(Vec<Value>),
    Malformed(String),
}

pub struct Connector {
    store: Arc<ContextStore>,
    client: reqwest::Client,
    reports: Mutex<VecDeque<SyncReport>>,
    running: tokio::sync::Mutex<()>,
}

impl Connector {
    pub fn new(store: Arc<ContextStore>) -> Self {
        let client = reqwest::Client::builder().timeout(REQUEST_TIMEOUT).build().expect("http client");
        Connector { store, client, reports: Mutex::default(), running: tokio::sync::Mutex::new(()) }
    }

    /// Most recent reports, oldest first.
    pub fn reports(&self) -> Vec<SyncReport> {
        self.reports.lock().unwrap().iter().cloned().collect()
    }

    async fn fetch(&self, base_url: &str, limit: usize, offset: usize) -> Result<Page, String> {
        let url = format!("{}/api/search/modules?limit={limit}&offset={offset}", base_url.trim_end_matches('/'));
        let resp = self
            .client
            .get(&url)
            .send()
            .await
            .map_err(|e| format!("GET {url}: {e}"))?;
        if !resp.status().is_success() {
            return Err(format!("GET {url}: status {}", resp.status()));
        }
        let body = resp.text().await.map_err(|e| format!("GET {url}: {e}"))?;
        Ok(match serde_json::from_str::<Value>(&body) {
            Ok(Value::Object(mut obj)) => match obj.remove("modules") {
                Some(Value::Array(records)) => Page::Records(records),
                _ => Page::Malformed(format!("offset {offset}: body has no \"modules\" array")),
            },
            Ok(_) => Page::Malformed(format!("offset {offset}: body is not an object")),
            Err(e) => Page::Malformed(format!("offset {offset}: {e}")),
        })
    }

    fn merge_record(&self, raw: Value, report: &mut SyncReport) {
        let record: CatalogModuleRecord = match serde_json::from_value(raw) {
            Ok(r) => r,
            Err(e) => return report.fail(format!("unparseable record: {e}")),
        };
        let label = format!("{}@{}", record.name, record.revision);
        let entity = match map_catalog_record(&record) {
            Ok(e) => e,
            Err(e) => return report.fail(format!("{label}: {e}")),
        };
        if self.store.get_entity(&entity.id).is_ok_and(|stored| is_unchanged(&stored, &entity)) {
            report.unchanged += 1;
            return;
        }
        match self.store.apply_batch(merge_policy(&entity, dependency_placeholders(&record))) {
            Ok(_) => report.upserted += 1,
            Err(e) => report.fail(format!("{label}: {e}")),
        }
    }

    /// One full pass over the catalog. Runs are serialized.
    pub async fn sync(&self, base_url: &str, page_size: usize) -> SyncReport {
        let _running = self.running.lock().await;
        self.sync_locked(base_url, page_size).await
    }

    /// Like `sync`, but returns `None` instead of waiting when a run is active.
    pub async fn try_sync(&self, base_url: &str, page_size: usize) -> Option<SyncReport> {
        let _running = self.running.try_lock().ok()?;
        Some(self.sync_locked(base_url, page_size).await)
    }

    async fn sync_locked(&self, base_url: &str, page_size: usize) -> SyncReport {
        let page_size = page_size.max(1);
        let mut report = SyncReport::start(base_url);
        let mut offset = 0;
        loop {
            match self.fetch(base_url, page_size, offset).await {
                Err(e) => {
                    report.error = Some(e);
                    break;
                }
                Ok(Page::Malformed(why)) => {
                    // the page's record count is unknowable
                    report.fetched += 1;
                    report.fail(format!("malformed page at {why}"));
                    break;
                }
                Ok(Page::Records(records)) => {
                    let n = records.len();
                    for raw in records {
                        report.fetched += 1;
                        self.merge_record(raw, &mut report);
                    }
                    if n < page_size {
                        break;
                    }
                    offset += n;
                }
            }
        }
        report.finished_at = Utc::now();
        log::info!(
            "catalog sync {}: fetched {} upserted {} unchanged {} failed {}{}",
            base_url,
            report.fetched,
            report.upserted,
            report.unchanged,
            report.failed,
            report.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
        let mut reports = self.reports.lock().unwrap();
        if reports.len() == KEPT_REPORTS {
            reports.pop_front();
        }
        reports.push_back(report.clone());
        report
    }
}

#[derive(Debug, Default)]
pub struct ScheduleStats {
    pub runs: AtomicUsize,
    pub skipped: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    in_flight: AtomicUsize,
}

impl ScheduleStats {
    pub fn runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }
}

/// A running periodic job; stops when dropped.
pub struct Schedule {
    pub stats: Arc<ScheduleStats>,
    task: JoinHandle<()>,
}

impl Schedule {
    /// Runs `job` immediately and then every `interval`. A tick that finds
    /// the previous run still active is skipped.
    pub fn every<F, Fut>(interval: Duration, job: F) -> Schedule
    where
        F: Fn() -> Fut + Send + Sync + 'static,
        Fut: Future<Output = ()> + Send + 'static,
    {
        let stats = Arc::new(ScheduleStats::default());
        let busy = Arc::new(AtomicBool::new(false));
        let job = Arc::new(job);
        let st = stats.clone();
        let task = tokio::spawn(async move {
            let mut ticker = tokio::time::interval(interval);
            ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                ticker.tick().await;
                if busy.swap(true, Ordering::SeqCst) {
                    st.skipped.fetch_add(1, Ordering::SeqCst);
                    continue;
                }
                st.runs.fetch_add(1, Ordering::SeqCst);
                let now = st.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                st.max_in_flight.fetch_max(now, Ordering::SeqCst);
                let (job, st, busy) = (job.clone(), st.clone(), busy.clone());
                tokio::spawn(async move {
                    job().await;
                    st.in_flight.fetch_sub(1, Ordering::SeqCst);
                    busy.store(false, Ordering::SeqCst);
                });
            }
        });
        Schedule { stats, task }
    }

    pub fn stop(&self) {
        self.task.abort();
    }
}

impl Drop for Schedule {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Periodic catalog sync per `config`; `None` when disabled.
pub fn run_schedule(connector: Arc<Connector>, config: &ConnectorConfig) -> Result<Option<Schedule>, String> {
    if !config.enabled {
        return Ok(None);
    }
    config.validate()?;
    Ok(Some(schedule_unchecked(connector, config.base_url.clone(), config.page_size, config.interval)))
}

/// Periodic sync at any interval, bypassing the configuration minimum.
pub fn schedule_unchecked(connector: Arc<Connector>, base_url: String, page_size: usize, interval: Duration) -> Schedule {
    Schedule::every(interval, move || {
        let (connector, base_url) = (connector.clone(), base_url.clone());
        async move {
            if connector.try_sync(&base_url, page_size).await.is_none() {
                log::info!("catalog sync skipped: a run is already active");
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_minimums() {
        let mut c = ConnectorConfig::new("http://127.0.0.1:1");
        assert!(c.validate().is_ok());
        c.interval = Duration::from_secs(59);
        assert!(c.validate().is_err());
        c.interval = MIN_INTERVAL;
        c.page_size = 0;
        assert!(c.validate().is_err());
        assert!(ConnectorConfig::new("not a url").validate().is_err());
    }

    #[tokio::test(start_paused = true)]
    async fn interval_ticks_with_inclusive_boundary() {
        let s = Schedule::every(Duration::from_secs(1), || async {});
        tokio::time::sleep(Duration::from_millis(3500)).await;
        let runs = s.stats.runs();
        assert!((3..=4).contains(&runs), "{runs} runs");
    }

    #[tokio::test(start_paused = true)]
    async fn slow_jobs_never_overlap() {
        let s = Schedule::every(Duration::from_millis(50), || tokio::time::sleep(Duration::from_millis(180)));
        tokio::time::sleep(Duration::from_millis(600)).await;
        assert_eq!(s.stats.max_in_flight.load(Ordering::SeqCst), 1);
        assert!(s.stats.skipped.load(Ordering::SeqCst) > 0);
        assert!(s.stats.runs() >= 2);
    }

    #[tokio::test]
    async fn disabled_schedule_never_runs() {
        let connector = Arc::new(Connector::new(Arc::new(ContextStore::in_memory())));
        let config = ConnectorConfig { enabled: false, ..ConnectorConfig::new("http://127.0.0.1:1") };
        assert!(run_schedule(connector.clone(), &config).unwrap().is_none());
        assert!(connector.reports().is_empty());
    }

    #[tokio::test]
    async fn unreachable_catalog_records_error() {
        let connector = Connector::new(Arc::new(ContextStore::in_memory()));
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let r = connector.sync(&url, 10).await;
        assert_eq!(r.fetched, 0);
        assert!(r.error.is_some());
        assert_eq!(connector.reports().len(), 1);
    }
}
