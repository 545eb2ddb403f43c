//! Platform Domain information model.
//!
//! Device-reported module data (RFC 8525 yang-library for NMDA platforms,
//! legacy modules-state, or hello-advertised module lists) is mapped onto
//! context-graph entities:
//!
//! ```text
//! Protocol  --ofPlatform-->  Platform  <--ofPlatform--  Datastore --hasSchema--> Schema
//! ModuleSet --ofPlatform-->  Platform                  Schema --hasModuleSet--> ModuleSet
//! Module    --belongsTo[datasetId = ModuleSet URN]--> ModuleSet
//!             (conformanceType, features, deviatedBy* sub-attributes)
//! Submodule --isSubmoduleOf--> Module
//! ```
//!
//! Module and Submodule ids are global (`urn:ngsi-ld:Module:{name}:{revision}`)
//! so that platforms and the catalog share them; everything else is scoped
//! under the platform name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::{decode_segment, Attribute, Entity, EntityId, GraphError};

pub const TYPE_PLATFORM: &str = "Platform";
pub const TYPE_PROTOCOL: &str = "Protocol";
pub const TYPE_DATASTORE: &str = "Datastore";
pub const TYPE_SCHEMA: &str = "Schema";
pub const TYPE_MODULE_SET: &str = "ModuleSet";
pub const TYPE_MODULE: &str = "Module";
pub const TYPE_SUBMODULE: &str = "Submodule";

/// Entity types whose ids are scoped under a platform name.
pub const PLATFORM_SCOPED_TYPES: &[&str] = &[TYPE_PROTOCOL, TYPE_DATASTORE, TYPE_SCHEMA, TYPE_MODULE_SET];

pub const OF_PLATFORM: &str = "ofPlatform";
pub const HAS_SCHEMA: &str = "hasSchema";
pub const HAS_MODULE_SET: &str = "hasModuleSet";
pub const BELONGS_TO: &str = "belongsTo";
pub const IS_SUBMODULE_OF: &str = "isSubmoduleOf";
pub const DEVIATED_BY: &str = "deviatedBy";
pub const CONFORMANCE_TYPE: &str = "conformanceType";
pub const FEATURES: &str = "features";
pub const ORGANIZATION: &str = "organization";
pub const PLACEHOLDER: &str = "placeholder";
pub const REVISION_KNOWN: &str = "revisionKnown";

pub const MODULES_STATE_SET: &str = "modules-state";
pub const HELLO_SET: &str = "hello";
pub const UNKNOWN_REVISION: &str = "unknown";

/// True for a valid `YYYY-MM-DD` calendar date.
pub fn is_calendar_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| -> Option<u32> {
        s.get(r.clone())
            .filter(|p| p.bytes().all(|c| c.is_ascii_digit()))
            .and_then(|p| p.parse().ok())
    };
    let (Some(y), Some(m), Some(d)) = (digits(0..4), digits(5..7), digits(8..10)) else {
        return false;
    };
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&d)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleIdentifier {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub namespace: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_submodule: bool,
}

impl ModuleIdentifier {
    pub fn new(name: impl Into<String>, revision: Option<&str>) -> Self {
        ModuleIdentifier {
            name: name.into(),
            revision: revision.map(str::to_string),
            namespace: None,
            is_submodule: false,
        }
    }

    pub fn with_namespace(mut self, ns: impl Into<String>) -> Self {
        self.namespace = Some(ns.into());
        self
    }

    /// Name non-empty and revision, when present, a calendar date.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.name.is_empty() {
            return Err(GraphError::validation("module name must not be empty"));
        }
        if let Some(rev) = &self.revision {
            if !is_calendar_date(rev) {
                return Err(GraphError::validation(format!(
                    "module {}: revision {rev:?} is not a YYYY-MM-DD date",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn revision_known(&self) -> bool {
        self.revision.as_deref().is_some_and(is_calendar_date)
    }

    pub fn urn(&self) -> EntityId {
        if self.is_submodule {
            submodule_urn(&self.name, self.revision.as_deref())
        } else {
            module_urn(&self.name, self.revision.as_deref())
        }
    }
}

impl fmt::Display for ModuleIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.revision.as_deref().unwrap_or(UNKNOWN_REVISION))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConformanceType {
    #[default]
    Implement,
    Import,
    Unknown,
}

impl ConformanceType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConformanceType::Implement => "implement",
            ConformanceType::Import => "import",
            ConformanceType::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleImplementation {
    #[serde(flatten)]
    pub identifier: ModuleIdentifier,
    #[serde(default)]
    pub conformance_type: ConformanceType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<ModuleIdentifier>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub submodules: Vec<ModuleIdentifier>,
}

impl ModuleImplementation {
    pub fn new(identifier: ModuleIdentifier, conformance_type: ConformanceType) -> Self {
        ModuleImplementation {
            identifier,
            conformance_type,
            features: Vec::new(),
            deviations: Vec::new(),
            submodules: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        self.identifier.validate()?;
        for m in self.deviations.iter().chain(&self.submodules) {
            m.validate()?;
        }
        if has_duplicates(&self.deviations) || has_duplicates(&self.submodules) {
            return Err(GraphError::validation(format!(
                "module {}: duplicate deviation or submodule",
                self.identifier
            )));
        }
        Ok(())
    }
}

fn has_duplicates(ids: &[ModuleIdentifier]) -> bool {
    let mut seen = BTreeSet::new();
    ids.iter().any(|m| !seen.insert((&m.name, &m.revision)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleSet {
    pub name: String,
    #[serde(default)]
    pub modules: Vec<ModuleImplementation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SchemaDef {
    pub name: String,
    #[serde(default)]
    pub module_sets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatastoreDef {
    pub name: String,
    pub schema: String,
}

/// RFC 8525 (NMDA) yang-library content.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct YangLibraryDocument {
    #[serde(default)]
    pub module_sets: Vec<ModuleSet>,
    #[serde(default)]
    pub schemas: Vec<SchemaDef>,
    #[serde(default)]
    pub datastores: Vec<DatastoreDef>,
}

impl YangLibraryDocument {
    pub fn validate(&self) -> Result<(), GraphError> {
        let sets: BTreeSet<&str> = self.module_sets.iter().map(|s| s.name.as_str()).collect();
        let schemas: BTreeSet<&str> = self.schemas.iter().map(|s| s.name.as_str()).collect();
        for ds in &self.datastores {
            if !schemas.contains(ds.schema.as_str()) {
                return Err(GraphError::validation(format!(
                    "datastore {} references unknown schema {}",
                    ds.name, ds.schema
                )));
            }
        }
        for schema in &self.schemas {
            if let Some(missing) = schema.module_sets.iter().find(|s| !sets.contains(s.as_str())) {
                return Err(GraphError::validation(format!(
                    "schema {} references unknown module set {missing}",
                    schema.name
                )));
            }
        }
        for set in &self.module_sets {
            if set.name.is_empty() {
                return Err(GraphError::validation("module set name must not be empty"));
            }
            set.modules.iter().try_for_each(ModuleImplementation::validate)?;
        }
        Ok(())
    }
}

/// Legacy (RFC 7895) modules-state content.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModulesStateDocument {
    #[serde(default)]
    pub modules: Vec<ModuleImplementation>,
}

impl ModulesStateDocument {
    pub fn validate(&self) -> Result<(), GraphError> {
        self.modules.iter().try_for_each(ModuleImplementation::validate)
    }
}

/// A module learned from a capability exchange (NETCONF hello or gNMI
/// Capabilities): no conformance information is available.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdvertisedModule {
    #[serde(flatten)]
    pub identifier: ModuleIdentifier,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    /// Deviation module names.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub organization: Option<String>,
}

impl AdvertisedModule {
    pub fn new(identifier: ModuleIdentifier) -> Self {
        AdvertisedModule { identifier, features: Vec::new(), deviations: Vec::new(), organization: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlatformInfo {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl PlatformInfo {
    pub fn new(name: impl Into<String>) -> Self {
        PlatformInfo { name: name.into(), vendor: None, model: None }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.name.trim().is_empty() {
            return Err(GraphError::validation("platform name must not be empty"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Netconf,
    Gnmi,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Netconf => "netconf",
            ProtocolKind::Gnmi => "gnmi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProtocolInfo {
    pub kind: ProtocolKind,
    pub host: String,
    pub port: u16,
    #[serde(default)]
    pub capabilities: Vec<String>,
    #[serde(default)]
    pub encodings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl ProtocolInfo {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.port == 0 {
            return Err(GraphError::validation("port must be in 1..=65535"));
        }
        if self.host.is_empty() {
            return Err(GraphError::validation("protocol host must not be empty"));
        }
        Ok(())
    }
}

pub fn platform_urn(name: &str) -> EntityId {
    EntityId::from_segments(TYPE_PLATFORM, &[name])
}

pub fn protocol_urn(platform: &str, kind: ProtocolKind, host: &str, port: u16) -> EntityId {
    EntityId::from_segments(TYPE_PROTOCOL, &[platform, kind.as_str(), host, &port.to_string()])
}

pub fn datastore_urn(platform: &str, name: &str) -> EntityId {
    EntityId::from_segments(TYPE_DATASTORE, &[platform, name])
}

pub fn schema_urn(platform: &str, name: &str) -> EntityId {
    EntityId::from_segments(TYPE_SCHEMA, &[platform, name])
}

pub fn module_set_urn(platform: &str, name: &str) -> EntityId {
    EntityId::from_segments(TYPE_MODULE_SET, &[platform, name])
}

/// `urn:ngsi-ld:Module:{name}:{revision or "unknown"}`.
pub fn module_urn(name: &str, revision: Option<&str>) -> EntityId {
    EntityId::from_segments(TYPE_MODULE, &[name, revision.unwrap_or(UNKNOWN_REVISION)])
}

pub fn submodule_urn(name: &str, revision: Option<&str>) -> EntityId {
    EntityId::from_segments(TYPE_SUBMODULE, &[name, revision.unwrap_or(UNKNOWN_REVISION)])
}

/// Platform name encoded in a Platform URN.
pub fn platform_name(platform_id: &EntityId) -> String {
    decode_segment(platform_id.suffix_segments().next().unwrap_or_default())
}

/// One Platform entity plus one Protocol entity per protocol.
pub fn map_platform(info: &PlatformInfo, protocols: &[ProtocolInfo]) -> Vec<Entity> {
    let platform_id = platform_urn(&info.name);
    let mut platform = Entity::new(platform_id.clone()).with_property("name", info.name.as_str());
    if let Some(v) = &info.vendor {
        platform = platform.with_property("vendor", v.as_str());
    }
    if let Some(m) = &info.model {
        platform = platform.with_property("model", m.as_str());
    }
    let mut out = vec![platform];
    for p in protocols {
        let mut e = Entity::new(protocol_urn(&info.name, p.kind, &p.host, p.port))
            .with_relationship(OF_PLATFORM, platform_id.clone())
            .with_property("kind", p.kind.as_str())
            .with_property("address", p.host.as_str())
            .with_property("port", p.port)
            .with_property("capabilities", p.capabilities.clone())
            .with_property("encodings", p.encodings.clone());
        if let Some(v) = &p.version {
            e = e.with_property("version", v.as_str());
        }
        out.push(e);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out.dedup_by(|a, b| a.id == b.id);
    out
}

/// Accumulates entities, merging those that share an id.
#[derive(Default)]
struct Emitter {
    entities: BTreeMap<EntityId, Entity>,
    deviation_targets: BTreeMap<EntityId, ModuleIdentifier>,
}

impl Emitter {
    fn add(&mut self, entity: Entity) {
        match self.entities.get_mut(&entity.id) {
            Some(existing) => existing.merge_from(&entity),
            None => {
                self.entities.insert(entity.id.clone(), entity);
            }
        }
    }

    fn module_set(&mut self, platform_id: &EntityId, set_id: &EntityId, name: &str) {
        self.add(
            Entity::new(set_id.clone())
                .with_property("name", name)
                .with_relationship(OF_PLATFORM, platform_id.clone()),
        );
    }

    /// Module entity with a belongsTo instance for `set_id`, plus its
    /// submodules. `deviations` are already resolved identifiers.
    fn module(
        &mut self,
        set_id: &EntityId,
        m: &ModuleImplementation,
        deviations: &[ModuleIdentifier],
        organization: Option<&str>,
    ) {
        let id = module_urn(&m.identifier.name, m.identifier.revision.as_deref());
        let mut membership = Attribute::relationship(set_id.clone())
            .with_dataset_id(set_id.as_str())
            .with_sub(CONFORMANCE_TYPE, Attribute::property(m.conformance_type.as_str()));
        if !m.features.is_empty() {
            membership = membership.with_sub(FEATURES, Attribute::property(m.features.clone()));
        }
        if let Some(org) = organization {
            membership = membership.with_sub(ORGANIZATION, Attribute::property(org));
        }
        for dev in deviations {
            let dev_id = module_urn(&dev.name, dev.revision.as_deref());
            membership = membership.with_sub(DEVIATED_BY, Attribute::relationship(dev_id.clone()).with_dataset_id(dev_id.as_str()));
            self.deviation_targets.entry(dev_id).or_insert_with(|| dev.clone());
        }
        self.add(identity_entity(id.clone(), &m.identifier).with(BELONGS_TO, membership));

        for sub in &m.submodules {
            let sub_id = submodule_urn(&sub.name, sub.revision.as_deref());
            let entity = identity_entity(sub_id, sub)
                .with(IS_SUBMODULE_OF, Attribute::relationship(id.clone()).with_dataset_id(id.as_str()))
                .with(
                    BELONGS_TO,
                    Attribute::relationship(set_id.clone())
                        .with_dataset_id(set_id.as_str())
                        .with_sub(CONFORMANCE_TYPE, Attribute::property(m.conformance_type.as_str())),
                );
            self.add(entity);
        }
    }

    fn finish(mut self) -> Vec<Entity> {
        let targets = std::mem::take(&mut self.deviation_targets);
        for (id, ident) in targets {
            if !self.entities.contains_key(&id) {
                self.add(placeholder_module(&ident));
            }
        }
        self.entities.into_values().collect()
    }
}

/// Identity properties shared by Module and Submodule entities.
fn identity_entity(id: EntityId, ident: &ModuleIdentifier) -> Entity {
    let mut e = Entity::new(id).with_property("name", ident.name.as_str());
    if let Some(rev) = &ident.revision {
        e = e.with_property("revision", rev.as_str());
    }
    if let Some(ns) = &ident.namespace {
        e = e.with_property("namespace", ns.as_str());
    }
    if !ident.revision_known() {
        e = e.with_property(REVISION_KNOWN, false);
    }
    e
}

/// Module entity standing in for a referenced but unlisted module.
pub fn placeholder_module(ident: &ModuleIdentifier) -> Entity {
    let mut e = Entity::new(module_urn(&ident.name, ident.revision.as_deref()))
        .with_property("name", ident.name.as_str())
        .with_property(PLACEHOLDER, true);
    if let Some(rev) = &ident.revision {
        e = e.with_property("revision", rev.as_str());
    }
    if !ident.revision_known() {
        e = e.with_property(REVISION_KNOWN, false);
    }
    e
}

pub fn is_placeholder(entity: &Entity) -> bool {
    entity.property(PLACEHOLDER) == Some(&Value::Bool(true))
}

/// NMDA mapping: Datastore, Schema, ModuleSet, Module and Submodule entities.
pub fn map_yang_library_nmda(platform_id: &EntityId, doc: &YangLibraryDocument) -> Result<Vec<Entity>, GraphError> {
    doc.validate()?;
    let platform = platform_name(platform_id);
    let mut out = Emitter::default();
    for ds in &doc.datastores {
        out.add(
            Entity::new(datastore_urn(&platform, &ds.name))
                .with_property("name", ds.name.as_str())
                .with_relationship(OF_PLATFORM, platform_id.clone())
                .with_relationship(HAS_SCHEMA, schema_urn(&platform, &ds.schema)),
        );
    }
    for schema in &doc.schemas {
        let mut e = Entity::new(schema_urn(&platform, &schema.name)).with_property("name", schema.name.as_str());
        for set in &schema.module_sets {
            let set_id = module_set_urn(&platform, set);
            e = e.with(HAS_MODULE_SET, Attribute::relationship(set_id.clone()).with_dataset_id(set_id.as_str()));
        }
        out.add(e);
    }
    for set in &doc.module_sets {
        let set_id = module_set_urn(&platform, &set.name);
        out.module_set(platform_id, &set_id, &set.name);
        for m in &set.modules {
            // yang-library deviations name a module of the same set
            let devs: Vec<ModuleIdentifier> = m
                .deviations
                .iter()
                .map(|d| resolve_in_set(d, &set.modules))
                .collect();
            out.module(&set_id, m, &devs, None);
        }
    }
    Ok(out.finish())
}

fn resolve_in_set(dev: &ModuleIdentifier, modules: &[ModuleImplementation]) -> ModuleIdentifier {
    if dev.revision.is_some() {
        return dev.clone();
    }
    modules
        .iter()
        .find(|m| m.identifier.name == dev.name)
        .map(|m| m.identifier.clone())
        .unwrap_or_else(|| dev.clone())
}

/// Non-NMDA mapping: a single `modules-state` ModuleSet.
pub fn map_modules_state(platform_id: &EntityId, doc: &ModulesStateDocument) -> Result<Vec<Entity>, GraphError> {
    doc.validate()?;
    let platform = platform_name(platform_id);
    let set_id = module_set_urn(&platform, MODULES_STATE_SET);
    let mut out = Emitter::default();
    out.module_set(platform_id, &set_id, MODULES_STATE_SET);
    for m in &doc.modules {
        let devs: Vec<ModuleIdentifier> = m.deviations.iter().map(|d| resolve_in_set(d, &doc.modules)).collect();
        out.module(&set_id, m, &devs, None);
    }
    Ok(out.finish())
}

/// Fallback mapping from a capability exchange: a `hello` ModuleSet whose
/// members carry conformanceType `unknown`.
pub fn map_hello_fallback(platform_id: &EntityId, modules: &[AdvertisedModule]) -> Vec<Entity> {
    map_advertised(platform_id, HELLO_SET, modules)
}

/// Maps advertised modules into the named platform-scoped ModuleSet.
/// Duplicate (name, revision) advertisements collapse to the first one.
pub fn map_advertised(platform_id: &EntityId, set_name: &str, modules: &[AdvertisedModule]) -> Vec<Entity> {
    let platform = platform_name(platform_id);
    let set_id = module_set_urn(&platform, set_name);
    let mut out = Emitter::default();
    out.module_set(platform_id, &set_id, set_name);
    let mut seen = BTreeSet::new();
    for adv in modules {
        let key = (adv.identifier.name.clone(), adv.identifier.revision.clone());
        if !seen.insert(key) {
            continue;
        }
        let mut m = ModuleImplementation::new(adv.identifier.clone(), ConformanceType::Unknown);
        m.features = adv.features.clone();
        let devs: Vec<ModuleIdentifier> = adv
            .deviations
            .iter()
            .map(|name| {
                modules
                    .iter()
                    .find(|o| &o.identifier.name == name)
                    .map(|o| ModuleIdentifier::new(name.as_str(), o.identifier.revision.as_deref()))
                    .unwrap_or_else(|| ModuleIdentifier::new(name.as_str(), None))
            })
            .collect();
        out.module(&set_id, &m, &devs, adv.organization.as_deref());
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imp(name: &str, rev: &str, ct: ConformanceType) -> ModuleImplementation {
        ModuleImplementation::new(
            ModuleIdentifier::new(name, Some(rev)).with_namespace(format!("urn:ietf:params:xml:ns:yang:{name}")),
            ct,
        )
    }

    /// The F-NMDA fixture document.
    fn f_nmda() -> YangLibraryDocument {
        let mut snmp = imp("ietf-snmp", "2014-12-10", ConformanceType::Implement);
        snmp.submodules.push(ModuleIdentifier {
            is_submodule: true,
            ..ModuleIdentifier::new("ietf-snmp-common", Some("2014-12-10"))
        });
        YangLibraryDocument {
            module_sets: vec![ModuleSet {
                name: "common".into(),
                modules: vec![
                    imp("ietf-interfaces", "2018-02-20", ConformanceType::Implement),
                    imp("ietf-yang-library", "2019-01-04", ConformanceType::Implement),
                    imp("openconfig-interfaces", "2021-04-06", ConformanceType::Implement),
                    imp("ietf-inet-types", "2013-07-15", ConformanceType::Import),
                    snmp,
                ],
            }],
            schemas: vec![SchemaDef { name: "complete".into(), module_sets: vec!["common".into()] }],
            datastores: vec![
                DatastoreDef { name: "running".into(), schema: "complete".into() },
                DatastoreDef { name: "operational".into(), schema: "complete".into() },
            ],
        }
    }

    fn count(entities: &[Entity], ty: &str) -> usize {
        entities.iter().filter(|e| e.entity_type == ty).count()
    }

    fn find<'a>(entities: &'a [Entity], id: &str) -> &'a Entity {
        entities.iter().find(|e| e.id.as_str() == id).unwrap_or_else(|| panic!("{id} missing"))
    }

    #[test]
    fn calendar_dates() {
        assert!(is_calendar_date("2018-02-20"));
        assert!(is_calendar_date("2020-02-29"));
        assert!(!is_calendar_date("2019-02-29"));
        assert!(!is_calendar_date("1900-02-29"));
        assert!(is_calendar_date("2000-02-29"));
        assert!(!is_calendar_date("2018-13-01"));
        assert!(!is_calendar_date("2018-1-01"));
        assert!(!is_calendar_date("2.5.0"));
    }

    #[test]
    fn module_urns() {
        assert_eq!(module_urn("ietf-interfaces", Some("2018-02-20")).as_str(), "urn:ngsi-ld:Module:ietf-interfaces:2018-02-20");
        assert_eq!(module_urn("foo", None).as_str(), "urn:ngsi-ld:Module:foo:unknown");
        assert_eq!(module_urn("a:b", Some("2020-01-01")).as_str(), "urn:ngsi-ld:Module:a%3Ab:2020-01-01");
        assert_eq!(submodule_urn("s", Some("2020-01-01")).as_str(), "urn:ngsi-ld:Submodule:s:2020-01-01");
    }

    #[test]
    fn platform_and_protocols() {
        let netconf = ProtocolInfo {
            kind: ProtocolKind::Netconf,
            host: "127.0.0.1".into(),
            port: 8300,
            capabilities: vec!["urn:ietf:params:netconf:base:1.1".into()],
            encodings: vec!["XML".into()],
            version: Some("1.1".into()),
        };
        let out = map_platform(&PlatformInfo::new("simx-nmda"), std::slice::from_ref(&netconf));
        let ids: Vec<&str> = out.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["urn:ngsi-ld:Platform:simx-nmda", "urn:ngsi-ld:Protocol:simx-nmda:netconf:127.0.0.1:8300"]);

        assert_eq!(map_platform(&PlatformInfo::new("p"), &[]).len(), 1);

        let gnmi = ProtocolInfo { kind: ProtocolKind::Gnmi, port: 8400, ..netconf.clone() };
        let out = map_platform(&PlatformInfo::new("p"), &[netconf, gnmi]);
        assert_eq!(out.len(), 3);
        let platform = platform_urn("p");
        assert!(out
            .iter()
            .filter(|e| e.entity_type == TYPE_PROTOCOL)
            .all(|e| e.relationship(OF_PLATFORM) == Some(&platform)));
    }

    #[test]
    fn nmda_fixture_counts() {
        let pid = platform_urn("simx-nmda");
        let out = map_yang_library_nmda(&pid, &f_nmda()).unwrap();
        assert_eq!(count(&out, TYPE_DATASTORE), 2);
        assert_eq!(count(&out, TYPE_SCHEMA), 1);
        assert_eq!(count(&out, TYPE_MODULE_SET), 1);
        assert_eq!(count(&out, TYPE_MODULE), 5);
        assert_eq!(count(&out, TYPE_SUBMODULE), 1);
        assert!(out.iter().all(|e| !is_placeholder(e)));

        let inet = find(&out, "urn:ngsi-ld:Module:ietf-inet-types:2013-07-15");
        let b = &inet.attributes.get(BELONGS_TO)[0];
        assert_eq!(b.sub_attributes.first(CONFORMANCE_TYPE).unwrap().property_value().unwrap(), "import");

        let running = find(&out, "urn:ngsi-ld:Datastore:simx-nmda:running");
        assert_eq!(running.relationship(OF_PLATFORM), Some(&pid));
        assert_eq!(running.relationship(HAS_SCHEMA).unwrap().as_str(), "urn:ngsi-ld:Schema:simx-nmda:complete");

        let sub = find(&out, "urn:ngsi-ld:Submodule:ietf-snmp-common:2014-12-10");
        assert_eq!(sub.relationship(IS_SUBMODULE_OF).unwrap().as_str(), "urn:ngsi-ld:Module:ietf-snmp:2014-12-10");
    }

    #[test]
    fn nmda_output_closure() {
        let out = map_yang_library_nmda(&platform_urn("simx-nmda"), &f_nmda()).unwrap();
        let ids: BTreeSet<&EntityId> = out.iter().map(|e| &e.id).collect();
        for e in &out {
            for rel in [HAS_SCHEMA, HAS_MODULE_SET] {
                for a in e.attributes.get(rel) {
                    assert!(ids.contains(a.object().unwrap()));
                }
            }
            for a in e.attributes.get(BELONGS_TO) {
                assert_eq!(a.dataset_id.as_deref(), Some(a.object().unwrap().as_str()));
                assert!(ids.contains(a.object().unwrap()));
            }
        }
    }

    #[test]
    fn empty_document_maps_to_nothing() {
        let out = map_yang_library_nmda(&platform_urn("p"), &YangLibraryDocument::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn shared_module_across_sets_gets_two_instances() {
        let m = imp("ietf-interfaces", "2018-02-20", ConformanceType::Implement);
        let doc = YangLibraryDocument {
            module_sets: vec![
                ModuleSet { name: "a".into(), modules: vec![m.clone()] },
                ModuleSet { name: "b".into(), modules: vec![m] },
            ],
            ..Default::default()
        };
        let out = map_yang_library_nmda(&platform_urn("p"), &doc).unwrap();
        assert_eq!(count(&out, TYPE_MODULE), 1);
        let ds: Vec<_> = find(&out, "urn:ngsi-ld:Module:ietf-interfaces:2018-02-20")
            .attributes
            .get(BELONGS_TO)
            .iter()
            .map(|a| a.dataset_id.clone().unwrap())
            .collect();
        assert_eq!(ds, vec!["urn:ngsi-ld:ModuleSet:p:a", "urn:ngsi-ld:ModuleSet:p:b"]);
    }

    #[test]
    fn rejects_dangling_schema_refs_and_bad_revisions() {
        let mut doc = f_nmda();
        doc.datastores[0].schema = "nope".into();
        assert!(map_yang_library_nmda(&platform_urn("p"), &doc).is_err());
        let mut doc = f_nmda();
        doc.schemas[0].module_sets.push("missing".into());
        assert!(map_yang_library_nmda(&platform_urn("p"), &doc).is_err());
        let mut doc = f_nmda();
        doc.module_sets[0].modules[0].identifier.revision = Some("2018-02-30".into());
        assert!(map_yang_library_nmda(&platform_urn("p"), &doc).is_err());
        let mut doc = f_nmda();
        let dup = ModuleIdentifier::new("d", Some("2020-01-01"));
        doc.module_sets[0].modules[0].deviations = vec![dup.clone(), dup];
        assert!(map_yang_library_nmda(&platform_urn("p"), &doc).is_err());
    }

    /// The F-LEGACY fixture document.
    fn f_legacy() -> ModulesStateDocument {
        ModulesStateDocument {
            modules: vec![
                imp("ietf-interfaces", "2014-05-08", ConformanceType::Implement),
                imp("vendorx-ifm", "2020-02-01", ConformanceType::Implement),
                imp("ietf-yang-types", "2013-07-15", ConformanceType::Import),
            ],
        }
    }

    #[test]
    fn legacy_fixture_counts() {
        let out = map_modules_state(&platform_urn("simx-legacy"), &f_legacy()).unwrap();
        assert_eq!(count(&out, TYPE_MODULE_SET), 1);
        assert_eq!(count(&out, TYPE_MODULE), 3);
        assert_eq!(count(&out, TYPE_DATASTORE) + count(&out, TYPE_SCHEMA), 0);
        let set = find(&out, "urn:ngsi-ld:ModuleSet:simx-legacy:modules-state");
        assert_eq!(set.relationship(OF_PLATFORM), Some(&platform_urn("simx-legacy")));
        let yt = find(&out, "urn:ngsi-ld:Module:ietf-yang-types:2013-07-15");
        let ct = yt.attributes.get(BELONGS_TO)[0].sub_attributes.first(CONFORMANCE_TYPE).unwrap();
        assert_eq!(ct.property_value().unwrap(), "import");
    }

    #[test]
    fn legacy_empty_and_deviations() {
        let out = map_modules_state(&platform_urn("p"), &ModulesStateDocument::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entity_type, TYPE_MODULE_SET);

        let mut doc = f_legacy();
        doc.modules[0].deviations.push(ModuleIdentifier::new("vendorx-ifm", Some("2020-02-01")));
        doc.modules[1].deviations.push(ModuleIdentifier::new("vendorx-unlisted-dev", Some("2020-01-01")));
        let out = map_modules_state(&platform_urn("p"), &doc).unwrap();
        let ifs = find(&out, "urn:ngsi-ld:Module:ietf-interfaces:2014-05-08");
        let dev = ifs.attributes.get(BELONGS_TO)[0].sub_attributes.get(DEVIATED_BY);
        assert_eq!(dev.len(), 1);
        assert_eq!(dev[0].object().unwrap().as_str(), "urn:ngsi-ld:Module:vendorx-ifm:2020-02-01");
        // an unlisted deviation module becomes a placeholder
        let ph = find(&out, "urn:ngsi-ld:Module:vendorx-unlisted-dev:2020-01-01");
        assert!(is_placeholder(ph));
        assert_eq!(count(&out, TYPE_MODULE), 4);
    }

    fn adv(name: &str, rev: &str) -> AdvertisedModule {
        AdvertisedModule::new(ModuleIdentifier::new(name, Some(rev)))
    }

    #[test]
    fn hello_fallback() {
        let pid = platform_urn("simx-bare");
        let out = map_hello_fallback(&pid, &[adv("ietf-interfaces", "2014-05-08"), adv("vendory-port", "2019-06-01")]);
        assert_eq!(count(&out, TYPE_MODULE_SET), 1);
        assert_eq!(count(&out, TYPE_MODULE), 2);
        for m in out.iter().filter(|e| e.entity_type == TYPE_MODULE) {
            let ct = m.attributes.get(BELONGS_TO)[0].sub_attributes.first(CONFORMANCE_TYPE).unwrap();
            assert_eq!(ct.property_value().unwrap(), "unknown");
        }
        assert_eq!(map_hello_fallback(&pid, &[]).len(), 1);

        let out = map_hello_fallback(&pid, &[adv("a", "2020-01-01"), adv("a", "2020-01-01")]);
        assert_eq!(count(&out, TYPE_MODULE), 1);
        assert_eq!(find(&out, "urn:ngsi-ld:Module:a:2020-01-01").attributes.get(BELONGS_TO).len(), 1);
    }

    #[test]
    fn hello_deviation_without_listing_is_placeholder_with_unknown_revision() {
        let mut a = adv("a", "2020-01-01");
        a.deviations.push("a-dev".into());
        let out = map_hello_fallback(&platform_urn("p"), &[a]);
        let ph = find(&out, "urn:ngsi-ld:Module:a-dev:unknown");
        assert!(is_placeholder(ph));
        assert_eq!(ph.property(REVISION_KNOWN), Some(&Value::Bool(false)));
    }

    #[test]
    fn non_date_revision_is_flagged() {
        let mut a = adv("openconfig-interfaces", "2.5.0");
        a.organization = Some("OpenConfig working group".into());
        let out = map_hello_fallback(&platform_urn("simx-gnmi"), &[a]);
        let m = find(&out, "urn:ngsi-ld:Module:openconfig-interfaces:2.5.0");
        assert_eq!(m.property(REVISION_KNOWN), Some(&Value::Bool(false)));
        let b = &m.attributes.get(BELONGS_TO)[0];
        assert_eq!(b.sub_attributes.first(ORGANIZATION).unwrap().property_value().unwrap(), "OpenConfig working group");
    }

    #[test]
    fn fixture_yaml_shape_round_trips() {
        let doc = f_nmda();
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["moduleSets"][0]["modules"][3]["conformanceType"], "import");
        let back: YangLibraryDocument = serde_json::from_value(json).unwrap();
        assert_eq!(back, doc);
    }
}
