//! JSON over HTTP. Reads work on a snapshot; writes go through the single
//! writer and honour an `If-Match: <revision>` precondition.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use classalg::model::Snapshot;
use classalg::{document, hierarchy, Error, Oid, Store};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ops::{self, Page, RelationSpec};

pub type Shared = Arc<RwLock<Store>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            position: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: e.code().to_string(),
            message: e.to_string(),
            position: e.position(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

/// Serializes `v` with the revision it was computed at.
fn reply(status: StatusCode, revision: u64, v: impl Serialize) -> ApiResult {
    let body = match serde_json::to_value(v)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
    {
        Value::Object(mut m) => {
            m.insert("revision".into(), revision.into());
            Value::Object(m)
        }
        other => json!({ "revision": revision, "result": other }),
    };
    Ok((
        status,
        [(header::ETAG, format!("\"{revision}\""))],
        Json(body),
    )
        .into_response())
}

fn ok(revision: u64, v: impl Serialize) -> ApiResult {
    reply(StatusCode::OK, revision, v)
}

fn body<T: DeserializeOwned>(b: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(b)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "ParseError", e.to_string()))
}

fn snapshot(s: &Shared) -> Snapshot {
    s.read().unwrap_or_else(|p| p.into_inner()).snapshot()
}

fn precondition(h: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(v) = h.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = v
        .to_str()
        .unwrap_or("")
        .trim()
        .trim_start_matches("W/")
        .trim_matches('"');
    text.parse().map(Some).map_err(|_| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "ParseError",
            format!("If-Match `{text}` is not a revision"),
        )
    })
}

/// Runs a mutation on a copy of the store and commits it only on success.
fn mutate<T>(
    s: &Shared,
    h: &HeaderMap,
    f: impl FnOnce(&mut Store) -> classalg::Result<T>,
) -> Result<(T, u64), ApiError> {
    let expected = precondition(h)?;
    let mut guard = s.write().unwrap_or_else(|p| p.into_inner());
    if let Some(r) = expected {
        if r != guard.revision() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "RevisionConflict",
                format!(
                    "store is at revision {}, request expected {r}",
                    guard.revision()
                ),
            ));
        }
    }
    let mut work = guard.clone();
    let out = f(&mut work)?;
    *guard = work;
    Ok((out, guard.revision()))
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/revision", get(revision))
        .route("/objects", get(list_objects).post(create_object))
        .route(
            "/objects/{oid}",
            get(get_object).patch(patch_object).delete(delete_object),
        )
        .route("/relations", post(define_relation))
        .route("/relations/{name}/edges", post(add_edges))
        .route("/classes", get(list_classes).post(define_class))
        .route("/classes/{name}", get(get_class).delete(delete_class))
        .route("/classes/{name}/extent", get(class_extent))
        .route("/query", post(query))
        .route("/normalize", post(normalize))
        .route("/report/implications", get(implications))
        .route("/describe", post(describe))
        .route("/hierarchy", get(get_hierarchy))
        .route("/rules", get(rules))
        .route("/summarize", get(summarize))
        .route(
            "/constraints",
            get(list_constraints).post(validate_constraints),
        )
        .route("/constraints/apply", post(apply_constraints))
        .route("/document", get(get_document))
        .with_state(store)
}

pub async fn serve(store: Store, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(RwLock::new(store))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn revision(State(s): State<Shared>) -> ApiResult {
    ok(snapshot(&s).revision(), json!({}))
}

// ---- objects ----

fn oid_param(text: &str) -> Result<Oid, ApiError> {
    text.parse().map(Oid).map_err(|_| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "ParseError",
            format!("`{text}` is not an oid"),
        )
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributesBody {
    #[serde(default)]
    attributes: Map<String, Value>,
}

async fn list_objects(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), ops::objects_json(&d))
}

async fn create_object(State(s): State<Shared>, h: HeaderMap, b: Bytes) -> ApiResult {
    let req: AttributesBody = body(&b)?;
    let attrs = ops::attributes_from_json(&req.attributes)?;
    let (obj, rev) = mutate(&s, &h, |st| {
        let oid = st.create_object(attrs)?;
        ops::object_json(st.data(), oid)
    })?;
    reply(StatusCode::CREATED, rev, obj)
}

async fn get_object(State(s): State<Shared>, Path(oid): Path<String>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), ops::object_json(&d, oid_param(&oid)?)?)
}

async fn patch_object(
    State(s): State<Shared>,
    h: HeaderMap,
    Path(oid): Path<String>,
    b: Bytes,
) -> ApiResult {
    let oid = oid_param(&oid)?;
    let req: AttributesBody = body(&b)?;
    let (obj, rev) = mutate(&s, &h, |st| {
        ops::patch_object(st, oid, &req.attributes)?;
        ops::object_json(st.data(), oid)
    })?;
    ok(rev, obj)
}

async fn delete_object(
    State(s): State<Shared>,
    h: HeaderMap,
    Path(oid): Path<String>,
) -> ApiResult {
    let oid = oid_param(&oid)?;
    let (_, rev) = mutate(&s, &h, |st| st.delete_object(oid))?;
    ok(rev, json!({ "deleted": oid }))
}

// ---- relations ----

async fn define_relation(State(s): State<Shared>, h: HeaderMap, b: Bytes) -> ApiResult {
    let spec: RelationSpec = body(&b)?;
    let (name, rev) = mutate(&s, &h, |st| ops::define_relation(st, spec))?;
    reply(StatusCode::CREATED, rev, json!({ "name": name }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgesBody {
    edges: Vec<[u64; 2]>,
}

async fn add_edges(
    State(s): State<Shared>,
    h: HeaderMap,
    Path(name): Path<String>,
    b: Bytes,
) -> ApiResult {
    let req: EdgesBody = body(&b)?;
    let (_, rev) = mutate(&s, &h, |st| {
        req.edges
            .iter()
            .try_for_each(|[a, t]| st.add_relation_edge(&name, Oid(*a), Oid(*t)))
    })?;
    ok(rev, json!({ "name": name, "added": req.edges.len() }))
}

// ---- classes ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassBody {
    name: String,
    expression: String,
}

async fn list_classes(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), json!({ "classes": ops::classes(&d)? }))
}

async fn define_class(State(s): State<Shared>, h: HeaderMap, b: Bytes) -> ApiResult {
    let req: ClassBody = body(&b)?;
    let (info, rev) = mutate(&s, &h, |st| {
        ops::define_class(st, &req.name, &req.expression)
    })?;
    reply(StatusCode::CREATED, rev, info)
}

async fn get_class(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), ops::class_info(&d, &name)?)
}

async fn delete_class(
    State(s): State<Shared>,
    h: HeaderMap,
    Path(name): Path<String>,
) -> ApiResult {
    let (_, rev) = mutate(&s, &h, |st| st.delete_class(&name))?;
    ok(rev, json!({ "deleted": name }))
}

async fn class_extent(
    State(s): State<Shared>,
    Path(name): Path<String>,
    Query(p): Query<HashMap<String, String>>,
) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), ops::class_extent(&d, &name, page_from(&p)?)?)
}

fn page_from(p: &HashMap<String, String>) -> Result<Page, ApiError> {
    let num = |k: &str| -> Result<Option<usize>, ApiError> {
        p.get(k)
            .map(|v| {
                v.parse().map_err(|_| {
                    ApiError::new(
                        StatusCode::BAD_REQUEST,
                        "ParseError",
                        format!("`{k}` must be a non-negative integer"),
                    )
                })
            })
            .transpose()
    };
    Ok(Page {
        cursor: num("cursor")?.unwrap_or(0),
        limit: num("limit")?,
    })
}

// ---- queries and reports ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBody {
    expression: String,
    #[serde(default)]
    cursor: usize,
    limit: Option<usize>,
}

async fn query(State(s): State<Shared>, b: Bytes) -> ApiResult {
    let req: QueryBody = body(&b)?;
    let d = snapshot(&s);
    let page = Page {
        cursor: req.cursor,
        limit: req.limit,
    };
    ok(d.revision(), ops::query(&d, &req.expression, page)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpressionBody {
    expression: String,
}

async fn normalize(State(s): State<Shared>, b: Bytes) -> ApiResult {
    let req: ExpressionBody = body(&b)?;
    let d = snapshot(&s);
    ok(
        d.revision(),
        json!({ "sdnf": ops::normalize(&d, &req.expression)? }),
    )
}

async fn implications(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), hierarchy::implication_report(&d)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DescribeBody {
    oids: BTreeSet<Oid>,
}

async fn describe(State(s): State<Shared>, b: Bytes) -> ApiResult {
    let req: DescribeBody = body(&b)?;
    let d = snapshot(&s);
    ok(d.revision(), ops::describe(&d, &req.oids)?)
}

async fn get_hierarchy(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), hierarchy::build_hierarchy(&d)?)
}

async fn rules(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(
        d.revision(),
        json!({ "rules": hierarchy::suggest_rules(&d)? }),
    )
}

async fn summarize(State(s): State<Shared>, Query(p): Query<HashMap<String, String>>) -> ApiResult {
    let attr = p.get("attr").ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "MissingParameter",
            "query parameter `attr` is required",
        )
    })?;
    let d = snapshot(&s);
    ok(
        d.revision(),
        json!({ "attribute": attr, "groups": hierarchy::summarize(&d, attr)? }),
    )
}

// ---- constraints ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsBody {
    constraints: Vec<String>,
}

async fn list_constraints(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    ok(d.revision(), ops::validate(&d, &[])?)
}

async fn validate_constraints(State(s): State<Shared>, b: Bytes) -> ApiResult {
    let req: ConstraintsBody = body(&b)?;
    let d = snapshot(&s);
    ok(d.revision(), ops::validate(&d, &req.constraints)?)
}

async fn apply_constraints(State(s): State<Shared>, h: HeaderMap, b: Bytes) -> ApiResult {
    let req: ConstraintsBody = body(&b)?;
    let (report, rev) = mutate(&s, &h, |st| ops::constrain(st, &req.constraints))?;
    ok(rev, report)
}

async fn get_document(State(s): State<Shared>) -> ApiResult {
    let d = snapshot(&s);
    let doc: Value = serde_json::from_str(&document::to_string(&d))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    Ok(([(header::ETAG, format!("\"{}\"", d.revision()))], Json(doc)).into_response())
}
