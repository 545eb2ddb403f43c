//! Core of the network inventory: the embedded context graph and the
//! information models that map device and catalog data onto it.

pub mod catalog;
pub mod graph;
pub mod platform;

pub use graph::{ContextStore, Entity, EntityId, GraphError, Query};
