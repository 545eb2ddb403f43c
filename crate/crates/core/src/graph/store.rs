//! Durable entity store: an in-memory map behind a reader/writer lock,
//! persisted through an append-only log of resulting entity states plus a
//! periodically compacted snapshot file.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};

use super::{Attribute, AttributeMap, Entity, EntityId, GraphError, Query};

const LOG_FILE: &str = "entities.log";
const SNAPSHOT_FILE: &str = "snapshot.json";
const COMPACT_AFTER: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpsertMode {
    Replace,
    Merge,
}

#[derive(Clone, Debug)]
pub enum WriteOp {
    Upsert { entity: Entity, mode: UpsertMode },
    /// Fails with `AlreadyExists` when the id is taken.
    Create(Entity),
    /// Writes the entity only when the id is free.
    CreateIfAbsent(Entity),
    /// Drops the named attributes, then merges `entity` in. Creates the
    /// entity when absent.
    Patch { entity: Entity, remove: Vec<String> },
    /// Drops instances of `name` whose datasetId is listed. Missing entities
    /// are ignored.
    RemoveInstances { id: EntityId, name: String, dataset_ids: Vec<String> },
    /// Fails with `NotFound` when the id is unknown.
    Delete(EntityId),
    DeleteIfExists(EntityId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum OpOutcome {
    Created,
    Updated,
    Unchanged,
    Skipped,
    Deleted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DanglingReference {
    pub source_entity: EntityId,
    pub attribute_name: String,
    pub dangling_object: EntityId,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LogRecord {
    Put(Entity),
    Del(EntityId),
}

struct Wal {
    dir: PathBuf,
    file: File,
    records: usize,
}

impl Wal {
    fn append(&mut self, records: &[LogRecord]) -> Result<(), GraphError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        let before = self.file.metadata()?.len();
        let res = self.file.write_all(&buf).and_then(|_| self.file.sync_data());
        if let Err(e) = res {
            // keep the log free of half-written batches
            let _ = self.file.set_len(before);
            return Err(e.into());
        }
        self.records += records.len();
        Ok(())
    }

    fn write_snapshot(&mut self, entities: &BTreeMap<EntityId, Entity>) -> Result<(), GraphError> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            let all: Vec<&Entity> = entities.values().collect();
            serde_json::to_writer(&mut f, &all).map_err(std::io::Error::other)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        self.file.set_len(0)?;
        self.file.sync_all()?;
        self.records = 0;
        Ok(())
    }
}

struct State {
    entities: BTreeMap<EntityId, Entity>,
    wal: Option<Wal>,
}

/// Thread-safe entity store. Every write is atomic: concurrent readers see
/// the state before or after a write, never a mix.
pub struct ContextStore {
    state: RwLock<State>,
}

impl Default for ContextStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ContextStore {
    pub fn in_memory() -> Self {
        ContextStore { state: RwLock::new(State { entities: BTreeMap::new(), wal: None }) }
    }

    /// Opens (or initializes) a durable store in `dir`, replaying the
    /// snapshot and log found there.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, GraphError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut entities = BTreeMap::new();
        let snapshot = dir.join(SNAPSHOT_FILE);
        if snapshot.exists() {
            let raw = fs::read(&snapshot)?;
            let all: Vec<Entity> = serde_json::from_slice(&raw)
                .map_err(|e| GraphError::Storage(std::io::Error::other(format!("corrupt snapshot: {e}"))))?;
            for e in all {
                entities.insert(e.id.clone(), e);
            }
        }
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LogRecord>(&line) {
                    Ok(LogRecord::Put(e)) => {
                        entities.insert(e.id.clone(), e);
                    }
                    Ok(LogRecord::Del(id)) => {
                        entities.remove(&id);
                    }
                    Err(e) => {
                        // a torn final append; everything before it is intact
                        log::warn!("ignoring unreadable log record {} in {}: {e}", n + 1, log_path.display());
                        break;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&log_path)?;
        let mut wal = Wal { dir, file, records: 0 };
        wal.write_snapshot(&entities)?;
        Ok(ContextStore { state: RwLock::new(State { entities, wal: Some(wal) }) })
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(PoisonError::into_inner)
    }

    /// Replace substitutes the stored entity; merge upserts attribute
    /// instances keyed by (name, datasetId).
    pub fn upsert_entity(&self, entity: Entity, mode: UpsertMode) -> Result<OpOutcome, GraphError> {
        let outcome = self.apply_batch(vec![WriteOp::Upsert { entity, mode }])?[0];
        Ok(match outcome {
            OpOutcome::Unchanged => OpOutcome::Updated,
            other => other,
        })
    }

    pub fn create_entity(&self, entity: Entity) -> Result<(), GraphError> {
        self.apply_batch(vec![WriteOp::Create(entity)]).map(|_| ())
    }

    pub fn get_entity(&self, id: &EntityId) -> Result<Entity, GraphError> {
        self.read()
            .entities
            .get(id)
            .cloned()
            .ok_or_else(|| GraphError::NotFound(id.to_string()))
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.read().entities.contains_key(id)
    }

    pub fn delete_entity(&self, id: &EntityId) -> Result<(), GraphError> {
        self.apply_batch(vec![WriteOp::Delete(id.clone())]).map(|_| ())
    }

    /// Matching entities in id order, paginated.
    pub fn query_entities(&self, query: &Query) -> Vec<Entity> {
        self.read()
            .entities
            .values()
            .filter(|e| query.matches(e))
            .skip(query.offset)
            .take(query.limit)
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.read().entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total attribute instances across the store.
    pub fn instance_count(&self) -> usize {
        self.read().entities.values().map(Entity::instance_count).sum()
    }

    /// Every stored entity, in id order.
    pub fn snapshot(&self) -> Vec<Entity> {
        self.read().entities.values().cloned().collect()
    }

    /// Canonical serialization of the whole store.
    pub fn snapshot_json(&self) -> String {
        let state = self.read();
        let all: Vec<&Entity> = state.entities.values().collect();
        serde_json::to_string(&all).expect("entities serialize")
    }

    /// Relationship instances (at any nesting depth) whose object is not stored.
    pub fn check_referential_integrity(&self) -> Vec<DanglingReference> {
        let state = self.read();
        let mut out = Vec::new();
        for e in state.entities.values() {
            collect_dangling(&state.entities, &e.id, "", &e.attributes, &mut out);
        }
        out
    }

    /// Applies all ops atomically: either every op succeeds and the batch
    /// is logged as a unit, or nothing changes.
    pub fn apply_batch(&self, ops: Vec<WriteOp>) -> Result<Vec<OpOutcome>, GraphError> {
        let mut state = self.write();
        let mut staged: BTreeMap<EntityId, Option<Entity>> = BTreeMap::new();
        let mut outcomes = Vec::with_capacity(ops.len());
        for op in ops {
            outcomes.push(stage(&state.entities, &mut staged, op)?);
        }
        let changes: Vec<(EntityId, Option<Entity>)> = staged
            .into_iter()
            .filter(|(id, new)| state.entities.get(id) != new.as_ref())
            .collect();
        if changes.is_empty() {
            return Ok(outcomes);
        }
        let compact = if let Some(wal) = state.wal.as_mut() {
            let records: Vec<LogRecord> = changes
                .iter()
                .map(|(id, new)| match new {
                    Some(e) => LogRecord::Put(e.clone()),
                    None => LogRecord::Del(id.clone()),
                })
                .collect();
            wal.append(&records)?;
            wal.records >= COMPACT_AFTER
        } else {
            false
        };
        for (id, new) in changes {
            match new {
                Some(e) => state.entities.insert(id, e),
                None => state.entities.remove(&id),
            };
        }
        if compact {
            let State { entities, wal } = &mut *state;
            if let Some(wal) = wal.as_mut() {
                if let Err(e) = wal.write_snapshot(entities) {
                    log::warn!("snapshot compaction failed: {e}");
                }
            }
        }
        Ok(outcomes)
    }
}

fn stage(
    committed: &BTreeMap<EntityId, Entity>,
    staged: &mut BTreeMap<EntityId, Option<Entity>>,
    op: WriteOp,
) -> Result<OpOutcome, GraphError> {
    let current = |staged: &BTreeMap<EntityId, Option<Entity>>, id: &EntityId| -> Option<Entity> {
        match staged.get(id) {
            Some(s) => s.clone(),
            None => committed.get(id).cloned(),
        }
    };
    let (id, before, after) = match op {
        WriteOp::Upsert { entity, mode } => {
            entity.validate()?;
            let before = current(staged, &entity.id);
            let after = match (&before, mode) {
                (Some(old), UpsertMode::Merge) => {
                    let mut merged = old.clone();
                    if merged.entity_type != entity.entity_type {
                        return Err(GraphError::validation(format!("type mismatch for {}", entity.id)));
                    }
                    merged.merge_from(&entity);
                    merged.validate()?;
                    merged
                }
                _ => entity,
            };
            (after.id.clone(), before, Some(after))
        }
        WriteOp::Create(entity) => {
            entity.validate()?;
            if current(staged, &entity.id).is_some() {
                return Err(GraphError::AlreadyExists(entity.id.to_string()));
            }
            (entity.id.clone(), None, Some(entity))
        }
        WriteOp::CreateIfAbsent(entity) => {
            entity.validate()?;
            if current(staged, &entity.id).is_some() {
                return Ok(OpOutcome::Skipped);
            }
            (entity.id.clone(), None, Some(entity))
        }
        WriteOp::Patch { entity, remove } => {
            entity.validate()?;
            let before = current(staged, &entity.id);
            let after = match &before {
                Some(old) => {
                    if old.entity_type != entity.entity_type {
                        return Err(GraphError::validation(format!("type mismatch for {}", entity.id)));
                    }
                    let mut next = old.clone();
                    for name in &remove {
                        next.attributes.remove(name);
                    }
                    next.merge_from(&entity);
                    next.validate()?;
                    next
                }
                None => entity,
            };
            (after.id.clone(), before, Some(after))
        }
        WriteOp::RemoveInstances { id, name, dataset_ids } => {
            let Some(before) = current(staged, &id) else {
                return Ok(OpOutcome::Skipped);
            };
            let mut after = before.clone();
            after
                .attributes
                .retain_instances(&name, |a| !a.dataset_id.as_ref().is_some_and(|d| dataset_ids.contains(d)));
            (id, Some(before), Some(after))
        }
        WriteOp::Delete(id) => {
            let before = current(staged, &id).ok_or_else(|| GraphError::NotFound(id.to_string()))?;
            (id, Some(before), None)
        }
        WriteOp::DeleteIfExists(id) => match current(staged, &id) {
            Some(before) => (id, Some(before), None),
            None => return Ok(OpOutcome::Skipped),
        },
    };
    let outcome = match (&before, &after) {
        (None, Some(_)) => OpOutcome::Created,
        (Some(_), None) => OpOutcome::Deleted,
        (Some(b), Some(a)) if b == a => OpOutcome::Unchanged,
        _ => OpOutcome::Updated,
    };
    staged.insert(id, after);
    Ok(outcome)
}

fn collect_dangling(
    entities: &BTreeMap<EntityId, Entity>,
    source: &EntityId,
    prefix: &str,
    attrs: &AttributeMap,
    out: &mut Vec<DanglingReference>,
) {
    for (name, instances) in attrs.iter() {
        let path = if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        for attr in instances {
            check_instance(entities, source, &path, attr, out);
        }
    }
}

fn check_instance(
    entities: &BTreeMap<EntityId, Entity>,
    source: &EntityId,
    path: &str,
    attr: &Attribute,
    out: &mut Vec<DanglingReference>,
) {
    if let Some(object) = attr.object() {
        if !entities.contains_key(object) {
            out.push(DanglingReference {
                source_entity: source.clone(),
                attribute_name: path.to_string(),
                dangling_object: object.clone(),
            });
        }
    }
    collect_dangling(entities, source, path, &attr.sub_attributes, out);
}
