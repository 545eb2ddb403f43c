//! Embedded context graph: a labeled property graph of NGSI-LD style
//! entities with Property/Relationship attributes, multi-instance attributes
//! via datasetId, and recursive sub-attributes.

mod entity;
mod id;
mod json;
mod query;
mod store;

pub use entity::{Attribute, AttributeKind, AttributeMap, AttributeValue, Entity};
pub use id::{decode_segment, encode_segment, EntityId, URN_PREFIX};
pub use json::DEFAULT_CONTEXT;
pub use query::{eval_q, Comparison, Filter, Literal, Term};
pub use store::{ContextStore, DanglingReference, OpOutcome, UpsertMode, WriteOp};

pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    AlreadyExists(String),
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),
}

impl GraphError {
    pub fn validation(msg: impl Into<String>) -> Self {
        GraphError::Validation(msg.into())
    }
}

/// Entity query: optional type filter, optional `q` expression, pagination.
#[derive(Clone, Debug)]
pub struct Query {
    pub entity_type: Option<String>,
    pub filter: Option<Filter>,
    pub limit: usize,
    pub offset: usize,
}

impl Default for Query {
    fn default() -> Self {
        Query { entity_type: None, filter: None, limit: DEFAULT_LIMIT, offset: 0 }
    }
}

impl Query {
    /// Unpaginated query over all entities.
    pub fn all() -> Self {
        Query { limit: usize::MAX, ..Query::default() }
    }

    pub fn of_type(entity_type: impl Into<String>) -> Self {
        Query { entity_type: Some(entity_type.into()), ..Query::all() }
    }

    pub fn with_q(mut self, q: &str) -> Result<Self, GraphError> {
        self.filter = Some(Filter::parse(q)?);
        Ok(self)
    }

    pub fn with_page(mut self, limit: usize, offset: usize) -> Result<Self, GraphError> {
        if limit == 0 {
            return Err(GraphError::validation("limit must be positive"));
        }
        self.limit = limit;
        self.offset = offset;
        Ok(self)
    }

    pub fn matches(&self, entity: &Entity) -> bool {
        self.entity_type.as_deref().is_none_or(|t| t == entity.entity_type)
            && self.filter.as_ref().is_none_or(|f| f.matches(entity))
    }
}
