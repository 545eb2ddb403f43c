//! Read-side views over the graph: datastores, module search, protocol
//! details, merged module facts and dependency expansion. Every answer is
//! built from store queries alone.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use netinv_core::catalog::{CATALOG_OWNED, HAS_DEPENDENCIES, HAS_DEPENDENTS};
use netinv_core::graph::{Attribute, Entity, EntityId, GraphError};
use netinv_core::platform::{
    self, BELONGS_TO, CONFORMANCE_TYPE, DEVIATED_BY, FEATURES, HAS_SCHEMA, IS_SUBMODULE_OF, OF_PLATFORM,
    REVISION_KNOWN, TYPE_DATASTORE, TYPE_MODULE, TYPE_MODULE_SET, TYPE_PLATFORM, TYPE_PROTOCOL, TYPE_SUBMODULE,
};
use netinv_core::{ContextStore, Query};
use netinv_protocol::capability::XPATH;
use regex::Regex;
use serde::Serialize;
use serde_json::Value;

pub const MAX_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PlatformSummary {
    pub id: EntityId,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub nmda: bool,
    pub protocols: Vec<String>,
    pub module_sets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DatastoreView {
    pub datastore_name: String,
    pub schema_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleSummary {
    pub name: String,
    pub revision: Option<String>,
    pub conformance_type: Option<String>,
    pub module_set: String,
    pub catalog_enriched: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_type: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProtocolView {
    pub id: EntityId,
    pub kind: String,
    pub address: String,
    pub port: u64,
    pub capabilities: Vec<String>,
    pub encodings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub xpath_filter: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Membership {
    pub platform: String,
    pub module_set: String,
    pub conformance_type: Option<String>,
    pub features: Vec<String>,
    pub deviated_by: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModuleRefView {
    pub name: String,
    pub revision: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModuleInfo {
    pub id: EntityId,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub name: String,
    pub revision: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub namespace: Option<String>,
    pub placeholder: bool,
    pub revision_known: bool,
    pub implemented_by: Vec<String>,
    pub module_sets: Vec<Membership>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub submodule_of: Option<String>,
    pub catalog_enriched: bool,
    /// catalog-owned properties present on the entity
    pub catalog: BTreeMap<String, Value>,
    pub dependencies: Vec<ModuleRefView>,
    pub dependents: Vec<ModuleRefView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DependencyNode {
    pub id: EntityId,
    pub name: String,
    pub revision: Option<String>,
    pub placeholder: bool,
    pub stored: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyEdge {
    pub from: EntityId,
    pub to: EntityId,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    pub root: EntityId,
    pub depth: usize,
    pub nodes: Vec<DependencyNode>,
    pub edges: Vec<DependencyEdge>,
}

fn string(e: &Entity, name: &str) -> Option<String> {
    e.property_str(name).map(str::to_string)
}

fn strings(value: Option<&Value>) -> Vec<String> {
    match value {
        Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn sub_str(attr: &Attribute, name: &str) -> Option<String> {
    attr.sub_attributes.first(name).and_then(|a| a.property_value()).and_then(|v| v.as_str().map(str::to_string))
}

fn catalog_enriched(e: &Entity) -> bool {
    // organization also arrives from gNMI, but only as a belongsTo sub-property
    CATALOG_OWNED.iter().any(|n| e.attributes.contains(n))
}

fn platform_entity(store: &ContextStore, name: &str) -> Result<Entity, GraphError> {
    store
        .get_entity(&platform::platform_urn(name))
        .map_err(|_| GraphError::NotFound(format!("platform {name:?} is not registered")))
}

fn linked(store: &ContextStore, entity_type: &str, platform_id: &EntityId) -> Vec<Entity> {
    let q = format!("{OF_PLATFORM}=={}", quote(platform_id.as_str()));
    store.query_entities(&Query::of_type(entity_type).with_q(&q).expect("ofPlatform filter parses"))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Trailing segment of a platform-scoped URN, decoded.
fn scoped_name(id: &EntityId) -> String {
    id.suffix_segments().last().map(netinv_core::graph::decode_segment).unwrap_or_default()
}

fn name_of(store: &ContextStore, id: &EntityId) -> String {
    store.get_entity(id).ok().and_then(|e| string(&e, "name")).unwrap_or_else(|| scoped_name(id))
}

pub fn list_platforms(store: &ContextStore) -> Vec<PlatformSummary> {
    store
        .query_entities(&Query::of_type(TYPE_PLATFORM))
        .into_iter()
        .map(|p| {
            let protocols = linked(store, TYPE_PROTOCOL, &p.id)
                .iter()
                .filter_map(|e| string(e, "kind"))
                .collect();
            let module_sets = linked(store, TYPE_MODULE_SET, &p.id).iter().map(|e| name_of(store, &e.id)).collect();
            PlatformSummary {
                name: string(&p, "name").unwrap_or_else(|| platform::platform_name(&p.id)),
                vendor: string(&p, "vendor"),
                model: string(&p, "model"),
                nmda: !linked(store, TYPE_DATASTORE, &p.id).is_empty(),
                protocols,
                module_sets,
                id: p.id,
            }
        })
        .collect()
}

pub fn list_datastores(store: &ContextStore, platform_name: &str) -> Result<Vec<DatastoreView>, GraphError> {
    let p = platform_entity(store, platform_name)?;
    Ok(linked(store, TYPE_DATASTORE, &p.id)
        .iter()
        .map(|d| DatastoreView {
            datastore_name: string(d, "name").unwrap_or_else(|| scoped_name(&d.id)),
            schema_name: d.relationship(HAS_SCHEMA).map(|s| name_of(store, s)).unwrap_or_default(),
        })
        .collect())
}

pub fn find_modules(store: &ContextStore, platform_name: &str, pattern: Option<&str>) -> Result<Vec<ModuleSummary>, GraphError> {
    let re = pattern
        .map(Regex::new)
        .transpose()
        .map_err(|e| GraphError::validation(format!("invalid match pattern: {e}")))?;
    let p = platform_entity(store, platform_name)?;
    let sets: BTreeMap<String, String> = linked(store, TYPE_MODULE_SET, &p.id)
        .iter()
        .map(|s| (s.id.to_string(), name_of(store, &s.id)))
        .collect();
    let mut out = Vec::new();
    for m in store.query_entities(&Query::of_type(TYPE_MODULE)) {
        let Some(name) = string(&m, "name") else { continue };
        if re.as_ref().is_some_and(|re| !re.is_match(&name)) {
            continue;
        }
        for inst in m.attributes.get(BELONGS_TO) {
            let Some(set_name) = inst.object().and_then(|o| sets.get(o.as_str())) else { continue };
            out.push(ModuleSummary {
                name: name.clone(),
                revision: string(&m, "revision"),
                conformance_type: sub_str(inst, CONFORMANCE_TYPE),
                module_set: set_name.clone(),
                catalog_enriched: catalog_enriched(&m),
                schema_url: string(&m, "schemaUrl"),
                tree_type: string(&m, "treeType"),
            });
        }
    }
    Ok(out)
}

pub fn protocol_details(store: &ContextStore, platform_name: &str) -> Result<Vec<ProtocolView>, GraphError> {
    let p = platform_entity(store, platform_name)?;
    Ok(linked(store, TYPE_PROTOCOL, &p.id)
        .into_iter()
        .map(|e| {
            let capabilities = strings(e.property("capabilities"));
            ProtocolView {
                kind: string(&e, "kind").unwrap_or_default(),
                address: string(&e, "address").unwrap_or_default(),
                port: e.property("port").and_then(Value::as_u64).unwrap_or_default(),
                xpath_filter: capabilities.iter().any(|c| c == XPATH),
                capabilities,
                encodings: strings(e.property("encodings")),
                version: string(&e, "version"),
                id: e.id,
            }
        })
        .collect())
}

fn lookup_module(store: &ContextStore, name: &str, revision: &str) -> Result<Entity, GraphError> {
    store
        .get_entity(&platform::module_urn(name, Some(revision)))
        .or_else(|_| store.get_entity(&platform::submodule_urn(name, Some(revision))))
        .map_err(|_| GraphError::NotFound(format!("module {name}@{revision} is not known")))
}

fn refs(e: &Entity, rel: &str) -> Vec<ModuleRefView> {
    e.attributes
        .get(rel)
        .iter()
        .filter_map(|a| a.object())
        .map(|id| {
            let mut segs = id.suffix_segments().map(netinv_core::graph::decode_segment);
            let name = segs.next().unwrap_or_default();
            let revision = segs.next().filter(|r| r != platform::UNKNOWN_REVISION);
            ModuleRefView { name, revision }
        })
        .collect()
}

pub fn module_info(store: &ContextStore, name: &str, revision: &str) -> Result<ModuleInfo, GraphError> {
    let m = lookup_module(store, name, revision)?;
    let mut implemented_by = BTreeSet::new();
    let mut module_sets = Vec::new();
    for inst in m.attributes.get(BELONGS_TO) {
        let Some(set_id) = inst.object() else { continue };
        let platform = store
            .get_entity(set_id)
            .ok()
            .and_then(|s| s.relationship(OF_PLATFORM).map(platform::platform_name))
            .unwrap_or_else(|| set_id.suffix_segments().next().map(netinv_core::graph::decode_segment).unwrap_or_default());
        implemented_by.insert(platform.clone());
        module_sets.push(Membership {
            platform,
            module_set: name_of(store, set_id),
            conformance_type: sub_str(inst, CONFORMANCE_TYPE),
            features: strings(inst.sub_attributes.first(FEATURES).and_then(|a| a.property_value())),
            deviated_by: inst
                .sub_attributes
                .get(DEVIATED_BY)
                .iter()
                .filter_map(|d| d.object().map(|o| o.to_string()))
                .collect(),
        });
    }
    let catalog = CATALOG_OWNED
        .iter()
        .filter(|n| **n != HAS_DEPENDENCIES && **n != HAS_DEPENDENTS)
        .filter_map(|n| m.property(n).map(|v| (n.to_string(), v.clone())))
        .collect();
    Ok(ModuleInfo {
        entity_type: m.entity_type.clone(),
        name: string(&m, "name").unwrap_or_else(|| name.to_string()),
        revision: string(&m, "revision"),
        namespace: string(&m, "namespace"),
        placeholder: platform::is_placeholder(&m),
        revision_known: m.property(REVISION_KNOWN) != Some(&Value::Bool(false)),
        implemented_by: implemented_by.into_iter().collect(),
        module_sets,
        submodule_of: (m.entity_type == TYPE_SUBMODULE)
            .then(|| m.relationship(IS_SUBMODULE_OF).map(|p| p.to_string()))
            .flatten(),
        catalog_enriched: catalog_enriched(&m),
        catalog,
        dependencies: refs(&m, HAS_DEPENDENCIES),
        dependents: refs(&m, HAS_DEPENDENTS),
        id: m.id,
    })
}

/// Breadth-first expansion over hasDependencies up to `depth` hops.
pub fn dependency_graph(store: &ContextStore, name: &str, revision: &str, depth: usize) -> Result<DependencyGraph, GraphError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(GraphError::validation(format!("depth must be between 1 and {MAX_DEPTH}")));
    }
    let root = lookup_module(store, name, revision)?;
    let node = |id: &EntityId, e: Option<&Entity>| {
        let mut segs = id.suffix_segments().map(netinv_core::graph::decode_segment);
        let seg_name = segs.next().unwrap_or_default();
        let seg_rev = segs.next().filter(|r| r != platform::UNKNOWN_REVISION);
        DependencyNode {
            id: id.clone(),
            name: e.and_then(|e| string(e, "name")).unwrap_or(seg_name),
            revision: e.map(|e| string(e, "revision")).unwrap_or(seg_rev),
            placeholder: e.is_some_and(platform::is_placeholder),
            stored: e.is_some(),
        }
    };
    let mut nodes = vec![node(&root.id, Some(&root))];
    let mut edges = Vec::new();
    let mut visited: BTreeSet<EntityId> = BTreeSet::from([root.id.clone()]);
    let mut queue = VecDeque::from([(root.clone(), 0)]);
    while let Some((e, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for target in e.attributes.get(HAS_DEPENDENCIES).iter().filter_map(|a| a.object()) {
            edges.push(DependencyEdge { from: e.id.clone(), to: target.clone(), depth: d + 1 });
            if !visited.insert(target.clone()) {
                continue;
            }
            let stored = store.get_entity(target).ok();
            nodes.push(node(target, stored.as_ref()));
            if let Some(next) = stored {
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok(DependencyGraph { root: root.id, depth, nodes, edges })
}
