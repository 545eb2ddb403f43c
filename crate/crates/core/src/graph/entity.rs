use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{EntityId, GraphError};

/// Keys that cannot be used as attribute names on an entity.
pub const RESERVED_ENTITY_KEYS: &[&str] = &["id", "type", "@context"];
/// Keys that cannot be used as sub-attribute names.
pub const RESERVED_ATTRIBUTE_KEYS: &[&str] = &["type", "value", "object", "datasetId"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeKind {
    Property,
    Relationship,
}

impl AttributeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Property => "Property",
            AttributeKind::Relationship => "Relationship",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttributeValue {
    Property(Value),
    Relationship(EntityId),
}

/// One instance of a Property or Relationship, with optional datasetId and
/// nested sub-attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    pub value: AttributeValue,
    pub dataset_id: Option<String>,
    pub sub_attributes: AttributeMap,
}

impl Attribute {
    pub fn property(value: impl Into<Value>) -> Self {
        Attribute {
            value: AttributeValue::Property(value.into()),
            dataset_id: None,
            sub_attributes: AttributeMap::default(),
        }
    }

    pub fn relationship(object: EntityId) -> Self {
        Attribute {
            value: AttributeValue::Relationship(object),
            dataset_id: None,
            sub_attributes: AttributeMap::default(),
        }
    }

    pub fn with_dataset_id(mut self, dataset_id: impl Into<String>) -> Self {
        self.dataset_id = Some(dataset_id.into());
        self
    }

    pub fn with_sub(mut self, name: impl Into<String>, attr: Attribute) -> Self {
        self.sub_attributes.upsert(name, attr);
        self
    }

    pub fn kind(&self) -> AttributeKind {
        match self.value {
            AttributeValue::Property(_) => AttributeKind::Property,
            AttributeValue::Relationship(_) => AttributeKind::Relationship,
        }
    }

    pub fn property_value(&self) -> Option<&Value> {
        match &self.value {
            AttributeValue::Property(v) => Some(v),
            AttributeValue::Relationship(_) => None,
        }
    }

    pub fn object(&self) -> Option<&EntityId> {
        match &self.value {
            AttributeValue::Relationship(o) => Some(o),
            AttributeValue::Property(_) => None,
        }
    }

    fn validate(&self, path: &str) -> Result<(), GraphError> {
        if let AttributeValue::Property(Value::Null) = self.value {
            return Err(GraphError::validation(format!("{path}: property value must not be null")));
        }
        if let Some(ds) = &self.dataset_id {
            if ds.is_empty() {
                return Err(GraphError::validation(format!("{path}: empty datasetId")));
            }
        }
        self.sub_attributes.validate(path, RESERVED_ATTRIBUTE_KEYS)
    }

    fn count_instances(&self) -> usize {
        1 + self.sub_attributes.instance_count()
    }
}

/// Attribute name to its instances. Instances are kept sorted by datasetId
/// (default instance first) so that structural equality does not depend on
/// the order writes arrived in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributeMap(BTreeMap<String, Vec<Attribute>>);

impl AttributeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, name: &str) -> &[Attribute] {
        self.0.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Default instance, or the first one if the attribute is multi-instance only.
    pub fn first(&self, name: &str) -> Option<&Attribute> {
        self.get(name).first()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Attribute])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Inserts or replaces the instance keyed by (name, datasetId).
    pub fn upsert(&mut self, name: impl Into<String>, attr: Attribute) {
        let instances = self.0.entry(name.into()).or_default();
        match instances.iter_mut().find(|a| a.dataset_id == attr.dataset_id) {
            Some(slot) => *slot = attr,
            None => {
                instances.push(attr);
                instances.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
            }
        }
    }

    /// Inserts the instance only when no instance with the same key exists.
    pub fn insert_if_absent(&mut self, name: impl Into<String>, attr: Attribute) {
        let name = name.into();
        if !self.get(&name).iter().any(|a| a.dataset_id == attr.dataset_id) {
            self.upsert(name, attr);
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Vec<Attribute>> {
        self.0.remove(name)
    }

    /// Removes instances of `name` for which `drop` returns true.
    pub fn retain_instances(&mut self, name: &str, mut keep: impl FnMut(&Attribute) -> bool) -> usize {
        let Some(instances) = self.0.get_mut(name) else {
            return 0;
        };
        let before = instances.len();
        instances.retain(|a| keep(a));
        let removed = before - instances.len();
        if instances.is_empty() {
            self.0.remove(name);
        }
        removed
    }

    /// Upserts every instance of `other` keyed by (name, datasetId).
    pub fn merge(&mut self, other: &AttributeMap) {
        for (name, instances) in &other.0 {
            for attr in instances {
                self.upsert(name.clone(), attr.clone());
            }
        }
    }

    /// Total number of attribute instances, sub-attributes included.
    pub fn instance_count(&self) -> usize {
        self.0.values().flatten().map(Attribute::count_instances).sum()
    }

    pub(crate) fn insert_raw(&mut self, name: String, instances: Vec<Attribute>) {
        self.0.insert(name, instances);
    }

    pub(crate) fn normalize(&mut self) {
        self.0.retain(|_, v| !v.is_empty());
        for instances in self.0.values_mut() {
            instances.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
            for a in instances.iter_mut() {
                a.sub_attributes.normalize();
            }
        }
    }

    fn validate(&self, path: &str, reserved: &[&str]) -> Result<(), GraphError> {
        for (name, instances) in &self.0 {
            let here = if path.is_empty() { name.clone() } else { format!("{path}.{name}") };
            if name.is_empty() || reserved.contains(&name.as_str()) {
                return Err(GraphError::validation(format!("{here}: reserved or empty attribute name")));
            }
            if instances.is_empty() {
                return Err(GraphError::validation(format!("{here}: attribute without instances")));
            }
            let kind = instances[0].kind();
            if instances.iter().any(|a| a.kind() != kind) {
                return Err(GraphError::validation(format!(
                    "{here}: instances mix Property and Relationship"
                )));
            }
            if instances.iter().filter(|a| a.dataset_id.is_none()).count() > 1 {
                return Err(GraphError::validation(format!("{here}: more than one default instance")));
            }
            let mut seen = BTreeSet::new();
            for ds in instances.iter().filter_map(|a| a.dataset_id.as_deref()) {
                if !seen.insert(ds) {
                    return Err(GraphError::validation(format!("{here}: duplicate datasetId {ds}")));
                }
            }
            for attr in instances {
                attr.validate(&here)?;
            }
        }
        Ok(())
    }
}

/// A node of the context graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub entity_type: String,
    pub attributes: AttributeMap,
}

impl Entity {
    /// New entity whose type is taken from the id.
    pub fn new(id: EntityId) -> Self {
        let entity_type = id.entity_type().to_string();
        Entity { id, entity_type, attributes: AttributeMap::default() }
    }

    pub fn with(mut self, name: impl Into<String>, attr: Attribute) -> Self {
        self.attributes.upsert(name, attr);
        self
    }

    pub fn with_property(self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.with(name, Attribute::property(value))
    }

    pub fn with_relationship(self, name: impl Into<String>, object: EntityId) -> Self {
        self.with(name, Attribute::relationship(object))
    }

    /// Value of the default (or first) instance of a Property.
    pub fn property(&self, name: &str) -> Option<&Value> {
        self.attributes.first(name).and_then(Attribute::property_value)
    }

    pub fn property_str(&self, name: &str) -> Option<&str> {
        self.property(name).and_then(Value::as_str)
    }

    pub fn relationship(&self, name: &str) -> Option<&EntityId> {
        self.attributes.first(name).and_then(Attribute::object)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.entity_type.is_empty() {
            return Err(GraphError::validation("entity type must not be empty"));
        }
        if self.id.entity_type() != super::id::encode_segment(&self.entity_type) {
            return Err(GraphError::validation(format!(
                "id {} does not match type {}",
                self.id, self.entity_type
            )));
        }
        self.attributes.validate("", RESERVED_ENTITY_KEYS)
    }

    /// Attribute-level merge keyed by (name, datasetId).
    pub fn merge_from(&mut self, other: &Entity) {
        self.attributes.merge(&other.attributes);
    }

    pub fn instance_count(&self) -> usize {
        self.attributes.instance_count()
    }
}
