//! JSON rendering of entities.
//!
//! ```json
//! {"id": "urn:ngsi-ld:Module:ietf-interfaces:2018-02-20", "type": "Module",
//!  "name": {"type": "Property", "value": "ietf-interfaces"},
//!  "belongsTo": [{"type": "Relationship", "object": "urn:...", "datasetId": "urn:...",
//!                 "conformanceType": {"type": "Property", "value": "implement"}}]}
//! ```
//!
//! A single-instance attribute is rendered without the array wrapper.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::entity::{RESERVED_ATTRIBUTE_KEYS, RESERVED_ENTITY_KEYS};
use super::{Attribute, AttributeMap, AttributeValue, Entity, EntityId, GraphError};

/// Default JSON-LD context shipped with the service. Term names are used
/// verbatim; no expansion or compaction is performed.
pub const DEFAULT_CONTEXT: &str = r#"{
  "@context": {
    "ngsi-ld": "https://uri.etsi.org/ngsi-ld/",
    "inv": "urn:netinv:terms:",
    "Platform": "inv:Platform",
    "Protocol": "inv:Protocol",
    "Datastore": "inv:Datastore",
    "Schema": "inv:Schema",
    "ModuleSet": "inv:ModuleSet",
    "Module": "inv:Module",
    "Submodule": "inv:Submodule",
    "ofPlatform": {"@id": "inv:ofPlatform", "@type": "@id"},
    "hasSchema": {"@id": "inv:hasSchema", "@type": "@id"},
    "hasModuleSet": {"@id": "inv:hasModuleSet", "@type": "@id"},
    "belongsTo": {"@id": "inv:belongsTo", "@type": "@id"},
    "isSubmoduleOf": {"@id": "inv:isSubmoduleOf", "@type": "@id"},
    "deviatedBy": {"@id": "inv:deviatedBy", "@type": "@id"},
    "hasDependencies": {"@id": "inv:hasDependencies", "@type": "@id"},
    "hasDependents": {"@id": "inv:hasDependents", "@type": "@id"}
  }
}"#;

impl Entity {
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("id".into(), Value::String(self.id.to_string()));
        map.insert("type".into(), Value::String(self.entity_type.clone()));
        render_attributes(&self.attributes, &mut map);
        Value::Object(map)
    }

    pub fn from_json(value: &Value) -> Result<Self, GraphError> {
        let obj = value
            .as_object()
            .ok_or_else(|| GraphError::validation("entity must be a JSON object"))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| GraphError::validation("entity is missing a string id"))?;
        let id = EntityId::parse(id)?;
        let entity_type = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| GraphError::validation("entity is missing a string type"))?
            .to_string();
        let attributes = parse_attributes(obj, RESERVED_ENTITY_KEYS, "")?;
        let entity = Entity { id, entity_type, attributes };
        entity.validate()?;
        Ok(entity)
    }

    /// Parses an attribute fragment (the body of `PATCH .../attrs`): a JSON
    /// object of attribute name to instance(s), without id/type.
    pub fn attributes_from_json(value: &Value) -> Result<AttributeMap, GraphError> {
        let obj = value
            .as_object()
            .ok_or_else(|| GraphError::validation("attribute fragment must be a JSON object"))?;
        parse_attributes(obj, RESERVED_ENTITY_KEYS, "")
    }
}

fn render_attributes(attrs: &AttributeMap, out: &mut Map<String, Value>) {
    for (name, instances) in attrs.iter() {
        let rendered = if instances.len() == 1 {
            render_attribute(&instances[0])
        } else {
            Value::Array(instances.iter().map(render_attribute).collect())
        };
        out.insert(name.to_string(), rendered);
    }
}

fn render_attribute(attr: &Attribute) -> Value {
    let mut map = Map::new();
    match &attr.value {
        AttributeValue::Property(v) => {
            map.insert("type".into(), Value::String("Property".into()));
            map.insert("value".into(), v.clone());
        }
        AttributeValue::Relationship(o) => {
            map.insert("type".into(), Value::String("Relationship".into()));
            map.insert("object".into(), Value::String(o.to_string()));
        }
    }
    if let Some(ds) = &attr.dataset_id {
        map.insert("datasetId".into(), Value::String(ds.clone()));
    }
    render_attributes(&attr.sub_attributes, &mut map);
    Value::Object(map)
}

fn parse_attributes(obj: &Map<String, Value>, reserved: &[&str], path: &str) -> Result<AttributeMap, GraphError> {
    let mut attrs = AttributeMap::new();
    for (name, raw) in obj {
        if reserved.contains(&name.as_str()) {
            continue;
        }
        let here = if path.is_empty() { name.clone() } else { format!("{path}.{name}") };
        let instances = match raw {
            Value::Array(items) => items
                .iter()
                .map(|item| parse_attribute(item, &here))
                .collect::<Result<Vec<_>, _>>()?,
            other => vec![parse_attribute(other, &here)?],
        };
        if instances.is_empty() {
            return Err(GraphError::validation(format!("{here}: empty instance array")));
        }
        attrs.insert_raw(name.clone(), instances);
    }
    attrs.normalize();
    Ok(attrs)
}

fn parse_attribute(raw: &Value, path: &str) -> Result<Attribute, GraphError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| GraphError::validation(format!("{path}: attribute must be an object")))?;
    let kind = obj.get("type").and_then(Value::as_str);
    let value = match kind {
        Some("Property") => {
            if obj.contains_key("object") {
                return Err(GraphError::validation(format!("{path}: Property must not carry an object")));
            }
            let v = obj
                .get("value")
                .ok_or_else(|| GraphError::validation(format!("{path}: Property without value")))?;
            AttributeValue::Property(v.clone())
        }
        Some("Relationship") => {
            if obj.contains_key("value") {
                return Err(GraphError::validation(format!("{path}: Relationship must not carry a value")));
            }
            let o = obj
                .get("object")
                .and_then(Value::as_str)
                .ok_or_else(|| GraphError::validation(format!("{path}: Relationship without string object")))?;
            AttributeValue::Relationship(EntityId::parse(o)?)
        }
        other => {
            return Err(GraphError::validation(format!(
                "{path}: unsupported attribute type {other:?}"
            )))
        }
    };
    let dataset_id = match obj.get("datasetId") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(GraphError::validation(format!("{path}: datasetId must be a string"))),
    };
    let sub_attributes = parse_attributes(obj, RESERVED_ATTRIBUTE_KEYS, path)?;
    Ok(Attribute { value, dataset_id, sub_attributes })
}

impl Serialize for Entity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Entity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Entity::from_json(&value).map_err(serde::de::Error::custom)
    }
}
