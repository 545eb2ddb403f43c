//! Catalog Domain information model: external-catalog metadata that
//! enriches the Module and Submodule entities shared with the Platform
//! Domain.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::{Attribute, Entity, GraphError, WriteOp};
use crate::platform::{self, ModuleIdentifier, PLACEHOLDER};

pub const HAS_DEPENDENCIES: &str = "hasDependencies";
pub const HAS_DEPENDENTS: &str = "hasDependents";

/// Attributes written by the catalog connector. Everything else on a Module
/// entity (belongsTo, namespace, ...) belongs to the Platform Domain.
pub const CATALOG_OWNED: &[&str] = &[
    "organization",
    "schemaUrl",
    "treeType",
    "semanticVersion",
    "reference",
    "maturityLevel",
    "moduleClassification",
    HAS_DEPENDENCIES,
    HAS_DEPENDENTS,
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleType {
    #[default]
    Module,
    Submodule,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModuleRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<String>,
}

/// One module record as served by the catalog's module search API.
/// Unknown fields are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CatalogModuleRecord {
    pub name: String,
    pub revision: String,
    pub organization: String,
    #[serde(default, rename = "schema", skip_serializing_if = "Option::is_none")]
    pub schema_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity_level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_classification: Option<String>,
    #[serde(default)]
    pub dependencies: Vec<ModuleRef>,
    #[serde(default)]
    pub dependents: Vec<ModuleRef>,
    #[serde(default)]
    pub module_type: ModuleType,
}

impl CatalogModuleRecord {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.name.is_empty() {
            return Err(GraphError::validation("catalog record without a module name"));
        }
        for (label, list) in [("dependencies", &self.dependencies), ("dependents", &self.dependents)] {
            let mut seen = BTreeSet::new();
            if let Some(dup) = list.iter().find(|r| !seen.insert(*r)) {
                return Err(GraphError::validation(format!(
                    "{}: duplicate entry {} in {label}",
                    self.name, dup.name
                )));
            }
        }
        Ok(())
    }

    pub fn identifier(&self) -> ModuleIdentifier {
        ModuleIdentifier {
            is_submodule: self.module_type == ModuleType::Submodule,
            ..ModuleIdentifier::new(self.name.as_str(), Some(&self.revision))
        }
    }
}

/// Module (or Submodule) entity carrying the record's metadata.
pub fn map_catalog_record(record: &CatalogModuleRecord) -> Result<Entity, GraphError> {
    record.validate()?;
    let mut e = Entity::new(record.identifier().urn())
        .with_property("name", record.name.as_str())
        .with_property("revision", record.revision.as_str())
        .with_property("organization", record.organization.as_str());
    let optional = [
        ("schemaUrl", &record.schema_url),
        ("treeType", &record.tree_type),
        ("semanticVersion", &record.semantic_version),
        ("reference", &record.reference),
        ("maturityLevel", &record.maturity_level),
        ("moduleClassification", &record.module_classification),
    ];
    for (name, value) in optional {
        if let Some(v) = value {
            e = e.with_property(name, v.as_str());
        }
    }
    for (rel, targets) in [(HAS_DEPENDENCIES, &record.dependencies), (HAS_DEPENDENTS, &record.dependents)] {
        for t in targets {
            let id = platform::module_urn(&t.name, t.revision.as_deref());
            e = e.with(rel, Attribute::relationship(id.clone()).with_dataset_id(id.as_str()));
        }
    }
    e.validate()?;
    Ok(e)
}

/// Placeholder entities for the record's dependency and dependent targets,
/// to be created only where the target is not stored yet.
pub fn dependency_placeholders(record: &CatalogModuleRecord) -> Vec<Entity> {
    record
        .dependencies
        .iter()
        .chain(&record.dependents)
        .map(|t| platform::placeholder_module(&ModuleIdentifier::new(t.name.as_str(), t.revision.as_deref())))
        .collect()
}

/// Store directives for a mapped record: the catalog-owned attribute set is
/// replaced wholesale, platform-owned attributes are left alone, and dependency
/// targets get create-if-absent placeholders.
pub fn merge_policy(record_entity: &Entity, placeholders: Vec<Entity>) -> Vec<WriteOp> {
    let mut remove: Vec<String> = CATALOG_OWNED.iter().map(|s| s.to_string()).collect();
    remove.push(PLACEHOLDER.to_string());
    let mut ops = vec![WriteOp::Patch { entity: record_entity.clone(), remove }];
    ops.extend(
        placeholders
            .into_iter()
            .filter(|p| p.id != record_entity.id)
            .map(WriteOp::CreateIfAbsent),
    );
    ops
}

/// True when `stored` already carries exactly what the record would write.
pub fn is_unchanged(stored: &Entity, record_entity: &Entity) -> bool {
    if stored.attributes.contains(PLACEHOLDER) {
        return false;
    }
    let owned = |e: &Entity, name: &str| e.attributes.get(name).to_vec();
    CATALOG_OWNED
        .iter()
        .chain(&["name", "revision"])
        .all(|name| owned(stored, name) == owned(record_entity, name))
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::graph::{ContextStore, EntityId, UpsertMode};
    use crate::platform::BELONGS_TO;

    /// Catalog fixture C-1.
    fn c1() -> CatalogModuleRecord {
        serde_json::from_value(json!({
            "name": "ietf-interfaces",
            "revision": "2018-02-20",
            "organization": "ietf",
            "schema": "https://raw.githubusercontent.com/YangModels/yang/main/standard/ietf/RFC/ietf-interfaces@2018-02-20.yang",
            "tree-type": "nmda-compatible",
            "reference": "RFC 8343",
            "dependencies": [{"name": "ietf-yang-types", "revision": "2013-07-15"}],
            "module-type": "module",
            "compilation-status": "passed"
        }))
        .unwrap()
    }

    #[test]
    fn maps_c1() {
        let e = map_catalog_record(&c1()).unwrap();
        assert_eq!(e.id.as_str(), "urn:ngsi-ld:Module:ietf-interfaces:2018-02-20");
        let metadata: Vec<&str> = ["organization", "schemaUrl", "treeType", "reference", "semanticVersion", "maturityLevel", "moduleClassification"]
            .into_iter()
            .filter(|n| e.attributes.contains(n))
            .collect();
        assert_eq!(metadata, ["organization", "schemaUrl", "treeType", "reference"]);
        let deps = e.attributes.get(HAS_DEPENDENCIES);
        assert_eq!(deps.len(), 1);
        assert_eq!(deps[0].object().unwrap().as_str(), "urn:ngsi-ld:Module:ietf-yang-types:2013-07-15");
        assert_eq!(deps[0].dataset_id.as_deref(), Some(deps[0].object().unwrap().as_str()));
        assert!(!e.attributes.contains(HAS_DEPENDENTS));
    }

    #[test]
    fn mandatory_only_record() {
        let rec: CatalogModuleRecord =
            serde_json::from_value(json!({"name": "m", "revision": "2020-01-01", "organization": "o"})).unwrap();
        let e = map_catalog_record(&rec).unwrap();
        let names: Vec<&str> = e.attributes.names().collect();
        assert_eq!(names, ["name", "organization", "revision"]);
    }

    #[test]
    fn submodule_record() {
        let rec: CatalogModuleRecord = serde_json::from_value(json!({
            "name": "ietf-snmp-common", "revision": "2014-12-10", "organization": "ietf", "module-type": "submodule"
        }))
        .unwrap();
        let e = map_catalog_record(&rec).unwrap();
        assert_eq!(e.entity_type, "Submodule");
        assert_eq!(e.id.as_str(), "urn:ngsi-ld:Submodule:ietf-snmp-common:2014-12-10");
    }

    #[test]
    fn rejects_duplicate_dependencies() {
        let mut rec = c1();
        rec.dependencies.push(rec.dependencies[0].clone());
        assert!(map_catalog_record(&rec).is_err());
    }

    #[test]
    fn revisionless_dependency_targets_unknown_placeholder() {
        let mut rec = c1();
        rec.dependencies.push(ModuleRef { name: "openconfig-extensions".into(), revision: None });
        let e = map_catalog_record(&rec).unwrap();
        assert!(e
            .attributes
            .get(HAS_DEPENDENCIES)
            .iter()
            .any(|a| a.object().unwrap().as_str() == "urn:ngsi-ld:Module:openconfig-extensions:unknown"));
        let ph = dependency_placeholders(&rec);
        let unknown = ph.iter().find(|p| p.id.as_str().ends_with(":unknown")).unwrap();
        assert_eq!(unknown.property(platform::REVISION_KNOWN), Some(&json!(false)));
        assert!(platform::is_placeholder(unknown));
    }

    fn platform_module() -> Entity {
        let a = EntityId::parse("urn:ngsi-ld:ModuleSet:simx-nmda:common").unwrap();
        let b = EntityId::parse("urn:ngsi-ld:ModuleSet:simx-nmda2:common").unwrap();
        Entity::new(EntityId::parse("urn:ngsi-ld:Module:ietf-interfaces:2018-02-20").unwrap())
            .with_property("name", "ietf-interfaces")
            .with_property("revision", "2018-02-20")
            .with_property("namespace", "urn:ietf:params:xml:ns:yang:ietf-interfaces")
            .with(BELONGS_TO, Attribute::relationship(a.clone()).with_dataset_id(a.as_str()))
            .with(BELONGS_TO, Attribute::relationship(b.clone()).with_dataset_id(b.as_str()))
    }

    #[test]
    fn merge_keeps_platform_attributes() {
        let store = ContextStore::in_memory();
        store.upsert_entity(platform_module(), UpsertMode::Replace).unwrap();
        let rec = c1();
        let e = map_catalog_record(&rec).unwrap();
        store.apply_batch(merge_policy(&e, dependency_placeholders(&rec))).unwrap();
        let got = store.get_entity(&e.id).unwrap();
        assert_eq!(got.attributes.get(BELONGS_TO), platform_module().attributes.get(BELONGS_TO));
        assert!(got.property("schemaUrl").is_some());
        assert!(got.property("namespace").is_some());
        assert!(is_unchanged(&got, &e));

        // re-sync of the same record changes nothing
        let before = store.snapshot_json();
        store.apply_batch(merge_policy(&e, dependency_placeholders(&rec))).unwrap();
        assert_eq!(store.snapshot_json(), before);
        assert!(store
            .check_referential_integrity()
            .iter()
            .all(|d| d.attribute_name == BELONGS_TO));
    }

    #[test]
    fn catalog_update_replaces_only_changed_property() {
        let store = ContextStore::in_memory();
        store.upsert_entity(platform_module(), UpsertMode::Replace).unwrap();
        let mut rec = c1();
        rec.semantic_version = Some("2.4.0".into());
        let e = map_catalog_record(&rec).unwrap();
        store.apply_batch(merge_policy(&e, vec![])).unwrap();
        let before = store.get_entity(&e.id).unwrap();
        rec.semantic_version = Some("2.5.0".into());
        let e2 = map_catalog_record(&rec).unwrap();
        assert!(!is_unchanged(&before, &e2));
        store.apply_batch(merge_policy(&e2, vec![])).unwrap();
        let mut after = store.get_entity(&e.id).unwrap();
        assert_eq!(after.property_str("semanticVersion"), Some("2.5.0"));
        after.attributes.upsert("semanticVersion", Attribute::property("2.4.0"));
        assert_eq!(after, before);
    }

    #[test]
    fn dropped_dependency_disappears() {
        let store = ContextStore::in_memory();
        let mut rec = c1();
        store.apply_batch(merge_policy(&map_catalog_record(&rec).unwrap(), vec![])).unwrap();
        rec.dependencies.clear();
        let e = map_catalog_record(&rec).unwrap();
        store.apply_batch(merge_policy(&e, vec![])).unwrap();
        assert!(!store.get_entity(&e.id).unwrap().attributes.contains(HAS_DEPENDENCIES));
    }

    #[test]
    fn real_record_clears_placeholder_marker() {
        let store = ContextStore::in_memory();
        let ph = platform::placeholder_module(&ModuleIdentifier::new("ietf-interfaces", Some("2018-02-20")));
        store.upsert_entity(ph, UpsertMode::Replace).unwrap();
        let e = map_catalog_record(&c1()).unwrap();
        assert!(!is_unchanged(&store.get_entity(&e.id).unwrap(), &e));
        store.apply_batch(merge_policy(&e, vec![])).unwrap();
        assert!(!platform::is_placeholder(&store.get_entity(&e.id).unwrap()));
    }
}
