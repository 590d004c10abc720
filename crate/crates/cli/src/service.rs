//! JSON-over-HTTP front end of the design store and the core pipeline.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dlp2c_core::codegen::{generate, CodegenError, Dialect};
use dlp2c_core::graph::{from_value, validate, CompGraph, ParseMode, Provenance};
use dlp2c_vision::{extract, ExtractorConfig};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use uuid::Uuid;

use crate::store::{Store, StoreError};

pub const DEFAULT_BODY_LIMIT: usize = 8 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store: PathBuf,
    pub body_limit: usize,
    /// Allowed CORS origins; empty allows any.
    pub cors_origins: Vec<String>,
    pub extractor: ExtractorConfig,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>) -> ServiceConfig {
        ServiceConfig {
            store: store.into(),
            body_limit: DEFAULT_BODY_LIMIT,
            cors_origins: Vec::new(),
            extractor: ExtractorConfig::default(),
        }
    }
}

pub struct AppState {
    pub store: Store,
    pub extractor: ExtractorConfig,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> ApiError {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }

    fn bad_request(message: impl std::fmt::Display) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> ApiError {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Conflict { .. } => StatusCode::CONFLICT,
            StoreError::InvalidRating(_) => StatusCode::BAD_REQUEST,
            StoreError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut err = ApiError::new(status, &e);
        if let StoreError::Conflict { current, .. } = e {
            err.body["current_version"] = json!(current);
        }
        err
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse_json(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))
}

fn parse_graph(value: Value) -> Result<CompGraph, ApiError> {
    from_value(&value, ParseMode::Strict).map_err(|e| ApiError::bad_request(format!("malformed graph: {e}")))
}

fn parse_id(id: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(id).map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("design {id} not found")))
}

fn parse_provenance(v: Option<&Value>) -> Result<Option<Provenance>, ApiError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Provenance::parse(s)
            .map(Some)
            .ok_or_else(|| ApiError::bad_request(format!("unknown provenance {s:?}"))),
        Some(other) => Err(ApiError::bad_request(format!("provenance must be a string, got {other}"))),
    }
}

fn parse_source_ref(v: Option<&Value>) -> Result<Option<Option<String>>, ApiError> {
    match v {
        None => Ok(None),
        Some(Value::Null) => Ok(Some(None)),
        Some(Value::String(s)) => Ok(Some(Some(s.clone()))),
        Some(other) => Err(ApiError::bad_request(format!("source_ref must be a string, got {other}"))),
    }
}

#[derive(Debug, Deserialize)]
struct ValidateQuery {
    #[serde(default)]
    strict: bool,
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn validate_graph(Query(q): Query<ValidateQuery>, body: Bytes) -> ApiResult {
    let graph = parse_graph(parse_json(&body)?)?;
    let report = validate(&graph, q.strict);
    Ok(Json(json!({ "valid": report.is_valid(), "violations": report.violations })).into_response())
}

/// The response shared with the CLI: code text, or the error list.
pub fn codegen_response(graph: &CompGraph, dialect: Dialect) -> Result<String, ApiError> {
    generate(graph, dialect).map_err(|e| {
        let errors = match &e {
            CodegenError::InvalidGraph(list) => list.clone(),
            other => vec![other.to_string()],
        };
        let report = validate(graph, false);
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": e.to_string(), "errors": errors, "violations": report.violations }),
        }
    })
}

async fn codegen(Path(target): Path<String>, body: Bytes) -> ApiResult {
    let dialect = Dialect::parse(&target)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown codegen target {target:?}")))?;
    let graph = parse_graph(parse_json(&body)?)?;
    let code = codegen_response(&graph, dialect)?;
    Ok(Json(json!({ "target": dialect.name(), "code": code })).into_response())
}

async fn extract_figure(State(state): State<Arc<AppState>>, mut form: Multipart) -> ApiResult {
    let mut bytes = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::new(e.status(), e.body_text()))? {
        let data = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        bytes = Some(data);
        break;
    }
    let bytes = bytes.ok_or_else(|| ApiError::bad_request("multipart body has no file part"))?;
    let image = image::load_from_memory(&bytes).map_err(|e| ApiError::bad_request(format!("cannot decode image: {e}")))?;
    let config = state.extractor.clone();
    let result = tokio::task::spawn_blocking(move || extract(&image, &config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    Ok(Json(result.to_json_value()).into_response())
}

async fn list_designs(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "designs": state.store.list() }))
}

async fn create_design(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let mut v = parse_json(&body)?;
    let graph = parse_graph(v.get_mut("graph").map(Value::take).ok_or_else(|| ApiError::bad_request("missing field `graph`"))?)?;
    let provenance = parse_provenance(v.get("provenance"))?;
    let source_ref = parse_source_ref(v.get("source_ref"))?.flatten();
    let record = state.store.create(graph, provenance, source_ref)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn get_design(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(state.store.get(parse_id(&id)?)?).into_response())
}

async fn update_design(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let id = parse_id(&id)?;
    let mut v = parse_json(&body)?;
    let version = v
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ApiError::bad_request("missing integer field `version`"))?;
    let graph = parse_graph(v.get_mut("graph").map(Value::take).ok_or_else(|| ApiError::bad_request("missing field `graph`"))?)?;
    let provenance = parse_provenance(v.get("provenance"))?;
    let source_ref = parse_source_ref(v.get("source_ref"))?;
    Ok(Json(state.store.update(id, version, graph, provenance, source_ref)?).into_response())
}

async fn delete_design(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    state.store.delete(parse_id(&id)?)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn rate_design(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let id = parse_id(&id)?;
    let v = parse_json(&body)?;
    let stars = v
        .get("stars")
        .and_then(Value::as_i64)
        .ok_or_else(|| ApiError::bad_request("missing integer field `stars`"))?;
    let record = state.store.rate(id, stars)?;
    Ok(Json(json!({
        "id": id,
        "average": record.rating_average,
        "count": record.meta.ratings.len(),
        "ratings": record.meta.ratings,
    }))
    .into_response())
}

fn cors(origins: &[String]) -> anyhow::Result<CorsLayer> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE, Method::OPTIONS])
        .allow_headers(Any);
    if origins.is_empty() || origins.iter().any(|o| o == "*") {
        return Ok(layer.allow_origin(Any));
    }
    let values = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| anyhow::anyhow!("bad CORS origin {o:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(values)))
}

pub fn router(state: Arc<AppState>, config: &ServiceConfig) -> anyhow::Result<Router> {
    Ok(Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/validate", post(validate_graph))
        .route("/api/v1/codegen/{target}", post(codegen))
        .route("/api/v1/extract", post(extract_figure))
        .route("/api/v1/designs", get(list_designs).post(create_design))
        .route("/api/v1/designs/{id}", get(get_design).put(update_design).delete(delete_design))
        .route("/api/v1/designs/{id}/ratings", post(rate_design))
        .layer(DefaultBodyLimit::max(config.body_limit))
        .layer(cors(&config.cors_origins)?)
        .with_state(state))
}

/// Opens the store and builds the application.
pub fn app(config: &ServiceConfig) -> anyhow::Result<Router> {
    config.extractor.check()?;
    let state = Arc::new(AppState {
        store: Store::open(&config.store)?,
        extractor: config.extractor.clone(),
    });
    router(state, config)
}

/// Binds `addr` and serves until the future `shutdown` completes.
pub async fn serve(
    config: &ServiceConfig,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let app = app(config)?;
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

pub async fn bind(addr: SocketAddr) -> anyhow::Result<tokio::net::TcpListener> {
    Ok(tokio::net::TcpListener::bind(addr).await?)
}
