//! Platform registration: discovery over every submitted connection, mapping
//! path selection, and a single staged batch write of the Platform Domain
//! graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use netinv_core::graph::{encode_segment, Entity, EntityId, GraphError, WriteOp, URN_PREFIX};
use netinv_core::platform::{
    self, AdvertisedModule, PlatformInfo, ProtocolKind, BELONGS_TO, PLACEHOLDER, PLATFORM_SCOPED_TYPES, TYPE_DATASTORE,
    TYPE_MODULE, TYPE_MODULE_SET, TYPE_PLATFORM, TYPE_SCHEMA, TYPE_SUBMODULE,
};
use netinv_core::{ContextStore, Query};
use netinv_protocol::{discover, CapabilityDiscovery, ConnectionSpec, DiscoveryError, YangLibrary};
use serde::{Deserialize, Serialize};

/// ModuleSet holding gNMI-advertised modules that NETCONF did not report.
pub const GNMI_SET: &str = "gnmi";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RegistrationEvent {
    pub platform_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub connections: Vec<ConnectionSpec>,
}

impl RegistrationEvent {
    pub fn info(&self) -> PlatformInfo {
        PlatformInfo { name: self.platform_name.clone(), vendor: self.vendor.clone(), model: self.model.clone() }
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        self.info().validate().map_err(|e| RegistryError::Validation(e.to_string()))?;
        if self.connections.is_empty() {
            return Err(RegistryError::Validation("at least one connection is required".into()));
        }
        for (i, c) in self.connections.iter().enumerate() {
            c.validate().map_err(|e| RegistryError::Validation(format!("connections[{i}]: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Nmda,
    NonNmda,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProtocolOutcome {
    pub kind: String,
    pub host: String,
    pub port: u32,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub datastores: usize,
    pub schemas: usize,
    pub module_sets: usize,
    pub modules: usize,
    pub submodules: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationReport {
    pub platform_id: EntityId,
    pub mode: Mode,
    pub per_protocol: Vec<ProtocolOutcome>,
    pub counts: Counts,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeregistrationReport {
    pub platform_id: EntityId,
    pub removed_entities: usize,
    pub removed_memberships: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("discovery failed on every connection: {0}")]
    DiscoveryFailed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Entities and metadata staged from one set of discoveries.
struct Staged {
    mode: Mode,
    entities: BTreeMap<EntityId, Entity>,
    warnings: Vec<String>,
}

fn add_all(into: &mut BTreeMap<EntityId, Entity>, entities: Vec<Entity>) {
    for e in entities {
        match into.get_mut(&e.id) {
            Some(existing) => existing.merge_from(&e),
            None => {
                into.insert(e.id.clone(), e);
            }
        }
    }
}

/// Chooses the mapping path and maps every successful discovery. The first
/// NETCONF discovery decides the path; gNMI adds its Protocol entity and any
/// module names NETCONF did not report.
fn stage(info: &PlatformInfo, discoveries: &[&CapabilityDiscovery]) -> Result<Staged, GraphError> {
    let platform_id = platform::platform_urn(&info.name);
    let protocols: Vec<_> = discoveries.iter().map(|d| d.protocol.clone()).collect();
    let mut entities = BTreeMap::new();
    let mut warnings = Vec::new();
    add_all(&mut entities, platform::map_platform(info, &protocols));

    let netconf: Vec<_> = discoveries.iter().filter(|d| d.protocol.kind == ProtocolKind::Netconf).collect();
    let gnmi_modules: Vec<AdvertisedModule> = discoveries
        .iter()
        .filter(|d| d.protocol.kind == ProtocolKind::Gnmi)
        .flat_map(|d| d.hello_modules.iter().cloned())
        .collect();
    if netconf.len() > 1 {
        warnings.push(format!(
            "{} NETCONF connections succeeded; module data taken from {}:{}",
            netconf.len(),
            netconf[0].protocol.host,
            netconf[0].protocol.port
        ));
    }

    let (mode, mapped) = match netconf.first() {
        Some(d) => match &d.yang_library {
            Some(YangLibrary::Nmda(doc)) if !doc.datastores.is_empty() => {
                (Mode::Nmda, platform::map_yang_library_nmda(&platform_id, doc)?)
            }
            Some(YangLibrary::Legacy(doc)) => (Mode::NonNmda, platform::map_modules_state(&platform_id, doc)?),
            other => {
                if matches!(other, Some(YangLibrary::Nmda(_))) {
                    warnings.push("yang-library lists no datastores; using the hello fallback".into());
                }
                (Mode::Fallback, platform::map_hello_fallback(&platform_id, &d.hello_modules))
            }
        },
        None => (Mode::Fallback, platform::map_hello_fallback(&platform_id, &gnmi_modules)),
    };
    let known: BTreeSet<String> = mapped
        .iter()
        .filter(|e| e.entity_type == TYPE_MODULE && !platform::is_placeholder(e))
        .filter_map(|e| e.property_str("name").map(str::to_string))
        .collect();
    add_all(&mut entities, mapped);
    if !netconf.is_empty() {
        let extra: Vec<AdvertisedModule> =
            gnmi_modules.into_iter().filter(|m| !known.contains(&m.identifier.name)).collect();
        if !extra.is_empty() {
            add_all(&mut entities, platform::map_advertised(&platform_id, GNMI_SET, &extra));
        }
    }
    Ok(Staged { mode, entities, warnings })
}

fn counts(entities: &BTreeMap<EntityId, Entity>) -> Counts {
    let mut c = Counts::default();
    for e in entities.values() {
        match e.entity_type.as_str() {
            TYPE_DATASTORE => c.datastores += 1,
            TYPE_SCHEMA => c.schemas += 1,
            TYPE_MODULE_SET => c.module_sets += 1,
            TYPE_MODULE if !platform::is_placeholder(e) => c.modules += 1,
            TYPE_SUBMODULE => c.submodules += 1,
            _ => {}
        }
    }
    c
}

fn scoped_prefix(entity_type: &str, platform: &str) -> String {
    format!("{URN_PREFIX}{entity_type}:{}:", encode_segment(platform))
}

pub struct Registry {
    store: Arc<ContextStore>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    events: Mutex<HashMap<String, RegistrationEvent>>,
}

impl Registry {
    pub fn new(store: Arc<ContextStore>) -> Self {
        Registry { store, locks: Mutex::default(), events: Mutex::default() }
    }

    fn lock_for(&self, name: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().unwrap().entry(name.to_string()).or_default().clone()
    }

    pub fn registered_event(&self, name: &str) -> Option<RegistrationEvent> {
        self.events.lock().unwrap().get(name).cloned()
    }

    pub async fn register(&self, event: RegistrationEvent) -> Result<RegistrationReport, RegistryError> {
        event.validate()?;
        let lock = self.lock_for(&event.platform_name);
        let _guard = lock.lock().await;

        let tasks: Vec<_> = event
            .connections
            .iter()
            .cloned()
            .map(|spec| tokio::spawn(async move { discover(&spec).await }))
            .collect();
        let mut results = Vec::with_capacity(tasks.len());
        for t in tasks {
            results.push(t.await.unwrap_or_else(|e| Err(DiscoveryError::Connection(format!("discovery task: {e}")))));
        }

        let mut per_protocol = Vec::new();
        let mut warnings = Vec::new();
        let mut discoveries = Vec::new();
        for (spec, result) in event.connections.iter().zip(&results) {
            let mut outcome = ProtocolOutcome {
                kind: spec.transport.as_str().to_string(),
                host: spec.host.clone(),
                port: spec.port,
                outcome: "ok".into(),
                error: None,
            };
            match result {
                Ok(d) => discoveries.push(d),
                Err(e) => {
                    outcome.outcome = "failed".into();
                    outcome.error = Some(e.to_string());
                    warnings.push(format!("{} {}:{}: {e}", spec.transport.as_str(), spec.host, spec.port));
                }
            }
            per_protocol.push(outcome);
        }
        if discoveries.is_empty() {
            return Err(RegistryError::DiscoveryFailed(warnings.join("; ")));
        }

        let info = event.info();
        let mut staged = stage(&info, &discoveries)?;
        warnings.append(&mut staged.warnings);
        let counts = counts(&staged.entities);
        let ops = self.plan_writes(&info.name, staged.entities, &mut warnings);
        self.store.apply_batch(ops)?;
        log::info!("registered {} ({:?}): {counts:?}", info.name, staged.mode);
        self.events.lock().unwrap().insert(info.name.clone(), event);
        Ok(RegistrationReport {
            platform_id: platform::platform_urn(&info.name),
            mode: staged.mode,
            per_protocol,
            counts,
            warnings,
        })
    }

    /// Re-runs the last registration event recorded for `name`.
    pub async fn refresh(&self, name: &str) -> Result<RegistrationReport, RegistryError> {
        let event = self
            .registered_event(name)
            .ok_or_else(|| RegistryError::NotFound(format!("no registration event on record for platform {name:?}")))?;
        self.register(event).await
    }

    /// Sweeps stale platform-scoped entities and memberships, then writes
    /// the staged entities.
    fn plan_writes(&self, platform_name: &str, mut staged: BTreeMap<EntityId, Entity>, warnings: &mut Vec<String>) -> Vec<WriteOp> {
        for e in staged.values_mut() {
            if !(e.entity_type == TYPE_MODULE || e.entity_type == TYPE_SUBMODULE) {
                continue;
            }
            let Some(new_ns) = e.property_str("namespace").map(str::to_string) else { continue };
            let Ok(stored) = self.store.get_entity(&e.id) else { continue };
            if let Some(old_ns) = stored.property_str("namespace") {
                if old_ns != new_ns {
                    warnings.push(format!("{}: namespace {new_ns} conflicts with recorded {old_ns}; keeping the recorded one", e.id));
                    e.attributes.remove("namespace");
                }
            }
        }

        let mut ops = Vec::new();
        for t in PLATFORM_SCOPED_TYPES {
            let prefix = scoped_prefix(t, platform_name);
            for e in self.store.query_entities(&Query::of_type(*t)) {
                if e.id.as_str().starts_with(&prefix) && !staged.contains_key(&e.id) {
                    ops.push(WriteOp::DeleteIfExists(e.id));
                }
            }
        }
        ops.extend(self.stale_memberships(platform_name, |id, dataset_id| {
            staged
                .get(id)
                .is_some_and(|n| n.attributes.get(BELONGS_TO).iter().any(|a| a.dataset_id.as_deref() == Some(dataset_id)))
        }));
        for e in staged.into_values() {
            ops.push(match e.entity_type.as_str() {
                TYPE_MODULE | TYPE_SUBMODULE if platform::is_placeholder(&e) => WriteOp::CreateIfAbsent(e),
                TYPE_MODULE | TYPE_SUBMODULE => WriteOp::Patch { entity: e, remove: vec![PLACEHOLDER.to_string()] },
                _ => WriteOp::Upsert { entity: e, mode: netinv_core::graph::UpsertMode::Replace },
            });
        }
        ops
    }

    /// belongsTo instances pointing at this platform's module sets that `keep`
    /// does not retain.
    fn stale_memberships(&self, platform_name: &str, keep: impl Fn(&EntityId, &str) -> bool) -> Vec<WriteOp> {
        let prefix = scoped_prefix(TYPE_MODULE_SET, platform_name);
        let mut ops = Vec::new();
        for t in [TYPE_MODULE, TYPE_SUBMODULE] {
            for e in self.store.query_entities(&Query::of_type(t)) {
                let stale: Vec<String> = e
                    .attributes
                    .get(BELONGS_TO)
                    .iter()
                    .filter_map(|a| a.dataset_id.clone())
                    .filter(|ds| ds.starts_with(&prefix) && !keep(&e.id, ds))
                    .collect();
                if !stale.is_empty() {
                    ops.push(WriteOp::RemoveInstances { id: e.id, name: BELONGS_TO.to_string(), dataset_ids: stale });
                }
            }
        }
        ops
    }

    /// Removes the Platform entity, everything scoped under it, and the
    /// memberships of shared modules in its module sets.
    pub async fn deregister(&self, name: &str) -> Result<DeregistrationReport, RegistryError> {
        let lock = self.lock_for(name);
        let _guard = lock.lock().await;
        let platform_id = platform::platform_urn(name);
        if !self.store.contains(&platform_id) {
            return Err(RegistryError::NotFound(format!("platform {name:?} is not registered")));
        }
        let mut ops = vec![WriteOp::Delete(platform_id.clone())];
        for t in PLATFORM_SCOPED_TYPES {
            let prefix = scoped_prefix(t, name);
            ops.extend(
                self.store
                    .query_entities(&Query::of_type(*t))
                    .into_iter()
                    .filter(|e| e.id.as_str().starts_with(&prefix))
                    .map(|e| WriteOp::DeleteIfExists(e.id)),
            );
        }
        let removed_entities = ops.len();
        let memberships = self.stale_memberships(name, |_, _| false);
        let removed_memberships = memberships
            .iter()
            .map(|op| match op {
                WriteOp::RemoveInstances { dataset_ids, .. } => dataset_ids.len(),
                _ => 0,
            })
            .sum();
        ops.extend(memberships);
        self.store.apply_batch(ops)?;
        self.events.lock().unwrap().remove(name);
        log::info!("deregistered {name}: {removed_entities} entities, {removed_memberships} memberships");
        Ok(DeregistrationReport { platform_id, removed_entities, removed_memberships })
    }

    /// Names of registered platforms, in id order.
    pub fn platform_names(&self) -> Vec<String> {
        self.store
            .query_entities(&Query::of_type(TYPE_PLATFORM))
            .iter()
            .map(|e| platform::platform_name(&e.id))
            .collect()
    }
}
