use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GraphError;

pub const URN_PREFIX: &str = "urn:ngsi-ld:";

/// Characters escaped inside a single URN path segment.
const SEGMENT: &AsciiSet = &CONTROLS.add(b':').add(b'/').add(b'%').add(b' ');

/// Percent-encodes one URN path segment.
pub fn encode_segment(segment: &str) -> String {
    utf8_percent_encode(segment, SEGMENT).to_string()
}

pub fn decode_segment(segment: &str) -> String {
    percent_decode_str(segment).decode_utf8_lossy().into_owned()
}

/// Identifier of an entity: `urn:ngsi-ld:{EntityType}:{suffix}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn parse(value: &str) -> Result<Self, GraphError> {
        let rest = value
            .strip_prefix(URN_PREFIX)
            .ok_or_else(|| GraphError::validation(format!("entity id {value:?} is not an urn:ngsi-ld URN")))?;
        let (ty, suffix) = rest
            .split_once(':')
            .ok_or_else(|| GraphError::validation(format!("entity id {value:?} has no suffix")))?;
        if ty.is_empty() || suffix.is_empty() {
            return Err(GraphError::validation(format!(
                "entity id {value:?} needs a non-empty type and suffix"
            )));
        }
        if value.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(GraphError::validation(format!(
                "entity id {value:?} contains unencoded whitespace or '/'"
            )));
        }
        Ok(EntityId(value.to_string()))
    }

    /// Builds an id from raw (unencoded) suffix segments joined by `:`.
    pub fn from_segments<S: AsRef<str>>(entity_type: &str, segments: &[S]) -> Self {
        let suffix = segments
            .iter()
            .map(|s| encode_segment(s.as_ref()))
            .collect::<Vec<_>>()
            .join(":");
        EntityId(format!("{URN_PREFIX}{}:{suffix}", encode_segment(entity_type)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn entity_type(&self) -> &str {
        let rest = &self.0[URN_PREFIX.len()..];
        rest.split_once(':').map(|(ty, _)| ty).unwrap_or(rest)
    }

    /// Raw (still encoded) segments after the type.
    pub fn suffix_segments(&self) -> impl Iterator<Item = &str> {
        let rest = &self.0[URN_PREFIX.len()..];
        rest.split_once(':').map(|(_, s)| s).unwrap_or("").split(':')
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for EntityId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        EntityId::parse(&raw).map_err(serde::de::Error::custom)
    }
}
