//! HTTP API for the parameter tuner.
//!
//! `GET /api/health`, `GET /api/images`, `GET /api/image/{id}`,
//! `POST /api/segment`, `GET /api/overlay/{id}?<params>`,
//! `GET|PUT /api/params`. Anything else falls through to the UI directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Serialize;
use serde_json::{json, Map, Value};
use tower_http::services::ServeDir;

use scriptorium_core::overlay::overlay_png;
use scriptorium_core::raster::{binarize_otsu, decode_image, encode_png, BinaryImage};
use scriptorium_core::segmentation::{segment_page, SegParams};

use crate::commands::ServeArgs;
use crate::config::SegArgs;
use crate::{to_json, CliError, CliResult};

pub struct AppState {
    pub images: PathBuf,
    /// Current tuner parameters; `PUT /api/params` is the only writer.
    pub params: RwLock<SegParams>,
}

pub type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: String,
    field: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl std::fmt::Display) -> ApiError {
        ApiError { status, error: error.to_string(), field: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.error });
        if let Some(f) = self.field {
            body["field"] = f.into();
        }
        (self.status, [(header::CONTENT_TYPE, "application/json")], to_json(&body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn json_response<T: Serialize>(value: &T) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], to_json(value)).into_response()
}

fn parse_params(value: &Value) -> ApiResult<SegParams> {
    SegParams::from_json(value).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        field: Some(e.field()),
        error: e.to_string(),
    })
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm")
    )
}

/// Image ids are file names in the image directory, sorted.
pub fn list_images(dir: &Path) -> std::io::Result<Vec<String>> {
    let mut ids: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_image(p))
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_owned))
        .collect();
    ids.sort();
    Ok(ids)
}

fn image_bytes(state: &AppState, id: &str) -> ApiResult<Vec<u8>> {
    let ids = list_images(&state.images).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    if !ids.iter().any(|i| i == id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown image `{id}`")));
    }
    std::fs::read(state.images.join(id)).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))
}

fn load_page(state: &AppState, id: &str) -> ApiResult<BinaryImage> {
    let bytes = image_bytes(state, id)?;
    let gray = decode_image(&bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{id}: {e}")))?;
    Ok(binarize_otsu(&gray).0)
}

fn current_params(state: &AppState) -> SegParams {
    state.params.read().expect("params lock").clone()
}

async fn health() -> Response {
    json_response(&json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn images(State(state): State<Shared>) -> ApiResult<Response> {
    let ids = list_images(&state.images).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    Ok(json_response(&json!({ "images": ids })))
}

async fn image(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let bytes = image_bytes(&state, &id)?;
    let png = if bytes.starts_with(b"\x89PNG") {
        bytes
    } else {
        let gray = decode_image(&bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
        encode_png(&gray)
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn segment(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("request body: {e}")))?;
    let id = req
        .get("image_id")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError { field: Some("image_id"), ..ApiError::new(StatusCode::BAD_REQUEST, "image_id: expected a string") })?;
    let params = match req.get("params") {
        Some(p) => parse_params(p)?,
        None => current_params(&state),
    };
    let page = load_page(&state, id)?;
    Ok(json_response(&segment_page(&page, &params)))
}

/// Query values arrive as strings; numeric ones are passed on as numbers so
/// that validation reports the same messages as a JSON body would.
fn query_to_params(base: &SegParams, query: &BTreeMap<String, String>) -> ApiResult<SegParams> {
    let mut doc = serde_json::to_value(base).expect("params serialize");
    let obj: &mut Map<String, Value> = doc.as_object_mut().expect("params are an object");
    for (k, v) in query {
        let value = match v.parse::<i64>() {
            Ok(n) => Value::from(n),
            Err(_) => Value::from(v.as_str()),
        };
        obj.insert(k.clone(), value);
    }
    parse_params(&doc)
}

async fn overlay(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<BTreeMap<String, String>>,
) -> ApiResult<Response> {
    let params = query_to_params(&current_params(&state), &query)?;
    let page = load_page(&state, &id)?;
    let seg = segment_page(&page, &params);
    Ok(([(header::CONTENT_TYPE, "image/png")], overlay_png(&page, &seg)).into_response())
}

async fn get_params(State(state): State<Shared>) -> Response {
    json_response(&current_params(&state))
}

async fn put_params(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("request body: {e}")))?;
    let params = parse_params(&value)?;
    *state.params.write().expect("params lock") = params.clone();
    Ok(json_response(&params))
}

pub fn router(state: Shared, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/images", get(images))
        .route("/api/image/{id}", get(image))
        .route("/api/segment", axum::routing::post(segment))
        .route("/api/overlay/{id}", get(overlay))
        .route("/api/params", get(get_params).put(put_params))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub fn serve(a: &ServeArgs) -> CliResult<()> {
    if !a.images.is_dir() {
        return Err(CliError::io(format!("{} is not a directory", a.images.display())));
    }
    let params = SegArgs { params: a.params.clone(), ..SegArgs::default() }.resolve(&SegParams::default())?;
    let state = Arc::new(AppState { images: a.images.clone(), params: RwLock::new(params) });
    let app = router(state, a.ui.as_deref());
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io)?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(CliError::io)?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(CliError::io)
    })
}
