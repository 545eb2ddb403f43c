//! HTTP handlers: the NGSI-LD entity API plus registry, catalog, graph and
//! inventory routes.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query as QueryParams, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use netinv_core::graph::{DEFAULT_CONTEXT, DEFAULT_LIMIT};
use netinv_core::{Entity, EntityId, Query};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::registry::{RegistrationEvent, RegistryError};
use crate::{inventory, AppState};

pub const MAX_LIMIT: usize = 1000;

type AppRef = State<Arc<AppState>>;

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Validation(m) => ApiError::bad_request(m),
            RegistryError::NotFound(m) => ApiError::not_found(m),
            e @ RegistryError::DiscoveryFailed(_) => ApiError::bad_gateway(e.to_string()),
            RegistryError::Graph(g) => g.into(),
        }
    }
}

fn json_body(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn entity_id(raw: &str) -> ApiResult<EntityId> {
    EntityId::parse(raw).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn create_entity(State(app): AppRef, body: Bytes) -> ApiResult<Response> {
    let entity = Entity::from_json(&json_body(&body)?)?;
    let location = format!("/ngsi-ld/v1/entities/{}", entity.id);
    app.store.create_entity(entity)?;
    Ok((StatusCode::CREATED, [(header::LOCATION, location)]).into_response())
}

async fn upsert_entities(
    State(app): AppRef,
    QueryParams(params): QueryParams<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Response> {
    let mode = match params.get("options").map(String::as_str) {
        Some("update") => netinv_core::graph::UpsertMode::Merge,
        Some("replace") | None => netinv_core::graph::UpsertMode::Replace,
        Some(other) => return Err(ApiError::bad_request(format!("unknown options value {other:?}"))),
    };
    let Value::Array(items) = json_body(&body)? else {
        return Err(ApiError::bad_request("upsert body must be an array of entities"));
    };
    let mut success = Vec::new();
    let mut errors = Vec::new();
    for item in items {
        let id = item.get("id").cloned().unwrap_or(Value::Null);
        match Entity::from_json(&item).and_then(|e| {
            let id = e.id.clone();
            app.store.upsert_entity(e, mode).map(|_| id)
        }) {
            Ok(id) => success.push(Value::String(id.to_string())),
            Err(e) => errors.push(json!({ "entityId": id, "error": { "detail": e.to_string() } })),
        }
    }
    let status = if errors.is_empty() { StatusCode::OK } else { StatusCode::MULTI_STATUS };
    Ok((status, Json(json!({ "success": success, "errors": errors }))).into_response())
}

fn page_param(params: &HashMap<String, String>, name: &str, default: usize) -> ApiResult<usize> {
    match params.get(name) {
        None => Ok(default),
        Some(raw) => raw.parse().map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer"))),
    }
}

async fn query_entities(State(app): AppRef, QueryParams(params): QueryParams<HashMap<String, String>>) -> ApiResult<Response> {
    let limit = page_param(&params, "limit", DEFAULT_LIMIT)?;
    if limit > MAX_LIMIT {
        return Err(ApiError::bad_request(format!("limit must not exceed {MAX_LIMIT}")));
    }
    let offset = page_param(&params, "offset", 0)?;
    let mut query = Query::all().with_page(limit, offset)?;
    query.entity_type = params.get("type").filter(|t| !t.is_empty()).cloned();
    if let Some(q) = params.get("q").filter(|q| !q.is_empty()) {
        query = query.with_q(q)?;
    }
    let entities: Vec<Value> = app.store.query_entities(&query).iter().map(Entity::to_json).collect();
    Ok(Json(entities).into_response())
}

async fn get_entity(State(app): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(app.store.get_entity(&entity_id(&id)?)?.to_json()))
}

async fn delete_entity(State(app): AppRef, Path(id): Path<String>) -> ApiResult<StatusCode> {
    app.store.delete_entity(&entity_id(&id)?)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn patch_attrs(State(app): AppRef, Path(id): Path<String>, body: Bytes) -> ApiResult<StatusCode> {
    let id = entity_id(&id)?;
    let stored = app.store.get_entity(&id)?;
    let attributes = Entity::attributes_from_json(&json_body(&body)?)?;
    let patch = Entity { id, entity_type: stored.entity_type, attributes };
    app.store.upsert_entity(patch, netinv_core::graph::UpsertMode::Merge)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn context() -> Response {
    ([(header::CONTENT_TYPE, "application/ld+json")], DEFAULT_CONTEXT).into_response()
}

async fn integrity(State(app): AppRef) -> Json<Value> {
    let dangling = app.store.check_referential_integrity();
    Json(json!({ "count": dangling.len(), "dangling": dangling }))
}

async fn register(State(app): AppRef, body: Bytes) -> ApiResult<Response> {
    let event: RegistrationEvent =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid registration event: {e}")))?;
    let report = app.registry.register(event).await?;
    Ok((StatusCode::CREATED, Json(report)).into_response())
}

async fn refresh(State(app): AppRef, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.registry.refresh(&name).await?).into_response())
}

async fn deregister(State(app): AppRef, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.registry.deregister(&name).await?).into_response())
}

#[derive(Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SyncRequest {
    base_url: Option<String>,
    page_size: Option<usize>,
}

async fn sync_catalog(State(app): AppRef, body: Bytes) -> ApiResult<Response> {
    let req: SyncRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SyncRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid sync request: {e}")))?
    };
    let base_url = req.base_url.unwrap_or_else(|| app.catalog.base_url.clone());
    if base_url.is_empty() {
        return Err(ApiError::bad_request("no catalog URL configured; pass baseUrl"));
    }
    reqwest::Url::parse(&base_url).map_err(|e| ApiError::bad_request(format!("catalog url {base_url:?}: {e}")))?;
    let page_size = req.page_size.unwrap_or(app.catalog.page_size);
    if page_size == 0 {
        return Err(ApiError::bad_request("pageSize must be positive"));
    }
    let report = app.connector.sync(&base_url, page_size).await;
    match &report.error {
        Some(e) => Err(ApiError::bad_gateway(format!("catalog sync failed: {e}"))),
        None => Ok(Json(report).into_response()),
    }
}

async fn catalog_reports(State(app): AppRef) -> Response {
    Json(app.connector.reports()).into_response()
}

async fn platforms(State(app): AppRef) -> Response {
    Json(inventory::list_platforms(&app.store)).into_response()
}

async fn datastores(State(app): AppRef, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(inventory::list_datastores(&app.store, &name)?).into_response())
}

async fn modules(
    State(app): AppRef,
    Path(name): Path<String>,
    QueryParams(params): QueryParams<HashMap<String, String>>,
) -> ApiResult<Response> {
    let pattern = params.get("match").filter(|m| !m.is_empty()).map(String::as_str);
    Ok(Json(inventory::find_modules(&app.store, &name, pattern)?).into_response())
}

async fn protocols(State(app): AppRef, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(inventory::protocol_details(&app.store, &name)?).into_response())
}

async fn module(State(app): AppRef, Path((name, revision)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(Json(inventory::module_info(&app.store, &name, &revision)?).into_response())
}

async fn dependencies(
    State(app): AppRef,
    Path((name, revision)): Path<(String, String)>,
    QueryParams(params): QueryParams<HashMap<String, String>>,
) -> ApiResult<Response> {
    let depth = page_param(&params, "depth", 1)?;
    Ok(Json(inventory::dependency_graph(&app.store, &name, &revision, depth)?).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ngsi-ld/v1/entities", post(create_entity).get(query_entities))
        .route("/ngsi-ld/v1/entities/{id}", get(get_entity).delete(delete_entity))
        .route("/ngsi-ld/v1/entities/{id}/attrs", axum::routing::patch(patch_attrs))
        .route("/ngsi-ld/v1/entityOperations/upsert", post(upsert_entities))
        .route("/ngsi-ld/v1/context.jsonld", get(context))
        .route("/graph/integrity", get(integrity))
        .route("/registry/platforms", post(register))
        .route("/registry/platforms/{name}/refresh", post(refresh))
        .route("/registry/platforms/{name}", axum::routing::delete(deregister))
        .route("/catalog/sync", post(sync_catalog))
        .route("/catalog/reports", get(catalog_reports))
        .route("/inventory/platforms", get(platforms))
        .route("/inventory/platforms/{name}/datastores", get(datastores))
        .route("/inventory/platforms/{name}/modules", get(modules))
        .route("/inventory/platforms/{name}/protocols", get(protocols))
        .route("/inventory/modules/{name}/{revision}", get(module))
        .route("/inventory/modules/{name}/{revision}/dependencies", get(dependencies))
        .with_state(state)
}
