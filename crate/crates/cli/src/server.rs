//! The schema server.
//!
//! Schema documents are served byte-for-byte as stored, at the path of their
//! own `id`. Requests read an immutable snapshot; `/reload` swaps in a fresh
//! one atomically and is refused unless the server is writable.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use semschema_core::evolution::{transform_to_latest, EvolutionError, TransformSet};
use semschema_core::json::{parse_json, JsonValue, Map};
use semschema_core::registry::{Registry, RegistryError, SchemaKind};
use semschema_core::validator::{validate, ValidationTarget};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub registry_dir: PathBuf,
    pub read_only: bool,
}

/// A loaded registry and its transforms.
pub struct Snapshot {
    pub registry: Registry,
    pub transforms: TransformSet,
}

impl Snapshot {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let registry = Registry::load_repo(dir)?;
        let transforms = TransformSet::load(dir, &registry)?;
        Ok(Snapshot { registry, transforms })
    }
}

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    dir: PathBuf,
    read_only: bool,
}

impl AppState {
    pub fn new(snapshot: Snapshot, dir: PathBuf, read_only: bool) -> Arc<Self> {
        Arc::new(AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            dir,
            read_only,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/schemas/{kind}/{slug}/{version}", get(get_schema))
        .route("/validate", post(post_validate))
        .route("/transform", post(post_transform))
        .route("/health", get(health))
        .route("/reload", post(reload))
        .with_state(state)
}

pub async fn serve(cfg: ServerConfig) -> anyhow::Result<()> {
    let snapshot = Snapshot::load(&cfg.registry_dir)?;
    let state = AppState::new(snapshot, cfg.registry_dir.clone(), cfg.read_only);
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    log::info!("serving {} on {}", cfg.registry_dir.display(), listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn json(status: StatusCode, body: JsonValue) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    let mut m = Map::new();
    m.insert("error".into(), message.to_string().into());
    json(status, JsonValue::Object(m))
}

fn registry_status(e: &RegistryError) -> StatusCode {
    match e {
        RegistryError::UnknownTitle(_) | RegistryError::UnknownVersion { .. } | RegistryError::UnknownId(_) => {
            StatusCode::NOT_FOUND
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn get_schema(
    State(state): State<Arc<AppState>>,
    UrlPath((kind, slug, version)): UrlPath<(String, String, String)>,
) -> Response {
    let snap = state.snapshot();
    let r = &snap.registry;
    let not_found = || error(StatusCode::NOT_FOUND, format!("no schema at /schemas/{kind}/{slug}/{version}"));
    let (Some(kind), Some(title)) = (SchemaKind::parse(&kind), r.title_for_slug(&slug)) else {
        return not_found();
    };
    if r.kind_of(title) != Some(kind) {
        return not_found();
    }
    let doc = match version.as_str() {
        "latest" => r.latest(title).ok(),
        v => match v.parse::<u32>() {
            Ok(n) if n.to_string() == v => r.doc(title, n).ok(),
            _ => None,
        },
    };
    match doc {
        Some(doc) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            doc.raw().to_string(),
        )
            .into_response(),
        None => not_found(),
    }
}

fn body_object(body: &Bytes) -> Result<Map, Response> {
    let text = std::str::from_utf8(body).map_err(|e| error(StatusCode::BAD_REQUEST, e))?;
    match parse_json(text) {
        Ok(JsonValue::Object(m)) => Ok(m),
        Ok(_) => Err(error(StatusCode::BAD_REQUEST, "request body must be a JSON object")),
        Err(e) => Err(error(StatusCode::BAD_REQUEST, e)),
    }
}

/// `target` is `"self"` (the default), `"latest"`, `{"title"}` for the
/// latest version of a title, or `{"title", "version"}`.
pub fn parse_target(value: Option<&JsonValue>) -> Result<ValidationTarget, String> {
    match value {
        None | Some(JsonValue::Null) => Ok(ValidationTarget::SelfDeclared),
        Some(JsonValue::String(s)) if s == "self" => Ok(ValidationTarget::SelfDeclared),
        Some(JsonValue::String(s)) if s == "latest" => Ok(ValidationTarget::Latest(None)),
        Some(JsonValue::Object(m)) => {
            let title = m
                .get("title")
                .and_then(JsonValue::as_str)
                .ok_or("target.title must be a string")?
                .to_string();
            match m.get("version") {
                None => Ok(ValidationTarget::Latest(Some(title))),
                Some(v) => {
                    let version = v
                        .as_f64()
                        .filter(|n| n.fract() == 0.0 && *n >= 0.0 && *n <= u32::MAX as f64)
                        .ok_or("target.version must be a non-negative integer")?;
                    Ok(ValidationTarget::Explicit {
                        title,
                        version: version as u32,
                    })
                }
            }
        }
        Some(other) => Err(format!("unsupported target {other}")),
    }
}

async fn post_validate(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req = match body_object(&body) {
        Ok(m) => m,
        Err(resp) => return resp,
    };
    let Some(event) = req.get("event") else {
        return error(StatusCode::BAD_REQUEST, "missing 'event'");
    };
    let target = match parse_target(req.get("target")) {
        Ok(t) => t,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let snap = state.snapshot();
    match validate(&snap.registry, event, &target) {
        Ok(mismatches) => {
            let mut m = Map::new();
            m.insert("valid".into(), JsonValue::Bool(mismatches.is_empty()));
            m.insert(
                "mismatches".into(),
                JsonValue::Array(mismatches.iter().map(|x| x.to_json()).collect()),
            );
            json(StatusCode::OK, JsonValue::Object(m))
        }
        Err(e) => error(registry_status(&e), e),
    }
}

async fn post_transform(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let event = match body_object(&body) {
        Ok(m) => JsonValue::Object(m),
        Err(resp) => return resp,
    };
    let snap = state.snapshot();
    match transform_to_latest(&snap.registry, &snap.transforms, &event) {
        Ok(out) => json(StatusCode::OK, out),
        Err(EvolutionError::Undeclared(_)) => error(StatusCode::BAD_REQUEST, "event does not declare a registered schema"),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    let mut m = Map::new();
    m.insert("status".into(), "ok".into());
    m.insert("schemas".into(), JsonValue::number(snap.registry.titles().count() as f64));
    m.insert("readOnly".into(), JsonValue::Bool(state.read_only));
    json(StatusCode::OK, JsonValue::Object(m))
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    if state.read_only {
        return error(StatusCode::CONFLICT, "server is read-only");
    }
    let dir = state.dir.clone();
    let loaded = tokio::task::spawn_blocking(move || Snapshot::load(&dir)).await;
    match loaded {
        Ok(Ok(snap)) => {
            let count = snap.registry.titles().count();
            *state.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snap);
            let mut m = Map::new();
            m.insert("reloaded".into(), JsonValue::Bool(true));
            m.insert("schemas".into(), JsonValue::number(count as f64));
            json(StatusCode::OK, JsonValue::Object(m))
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed, keeping old registry: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}
