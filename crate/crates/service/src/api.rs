//! HTTP API over an [`ApiSession`].
//!
//! | route | response |
//! |---|---|
//! | `GET /api/info` | session metadata and fingerprints |
//! | `GET /api/grid?cell_size_m=&bbox=` | non-empty cells intersecting the box |
//! | `GET /api/cell/{i}/{j}?cell_size_m=` | 12-month detail table |
//! | `GET /api/compare?cells=i1,j1;i2,j2&cell_size_m=` | mean feature profiles |
//! | `GET /api/glyph/{i}/{j}.svg?cell_size_m=&radius_px=` | glyph SVG |
//!
//! Errors are JSON `{"error": "..."}` with status 400 or 404.

use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use vinewatch_core::aggregate::CellIndex;
use vinewatch_core::geo::BoundingBox;

use crate::session::{parse_cells, ApiSession, SessionError};

pub const SVG_CONTENT_TYPE: &str = "image/svg+xml";

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = if e.is_not_found() { StatusCode::NOT_FOUND } else { StatusCode::BAD_REQUEST };
        Self { status, message: e.to_string() }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<ApiSession>>;

#[derive(Deserialize)]
struct GridQuery {
    cell_size_m: Option<f64>,
    bbox: Option<String>,
}

#[derive(Deserialize)]
struct SizeQuery {
    cell_size_m: Option<f64>,
}

#[derive(Deserialize)]
struct CompareQuery {
    cells: Option<String>,
    cell_size_m: Option<f64>,
}

#[derive(Deserialize)]
struct GlyphQuery {
    cell_size_m: Option<f64>,
    radius_px: Option<f64>,
}

pub fn router(session: Arc<ApiSession>) -> Router {
    Router::new()
        .route("/api/info", get(info))
        .route("/api/grid", get(grid))
        .route("/api/cell/{i}/{j}", get(cell))
        .route("/api/compare", get(compare))
        .route("/api/glyph/{i}/{file}", get(glyph))
        .with_state(session)
}

fn cell_index(i: &str, j: &str) -> ApiResult<CellIndex> {
    let parse = |s: &str| s.parse::<i64>().map_err(|_| ApiError::bad_request(format!("cell index `{s}` is not an integer")));
    Ok(CellIndex::new(parse(i)?, parse(j)?))
}

async fn info(State(s): Shared) -> Response {
    Json(s.info()).into_response()
}

async fn grid(State(s): Shared, q: Result<Query<GridQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = q?;
    let bbox = match q.bbox.as_deref() {
        Some(text) => Some(BoundingBox::parse(text).ok_or_else(|| ApiError::bad_request(format!("malformed bbox `{text}`")))?),
        None => None,
    };
    let size = q.cell_size_m.unwrap_or(s.config().default_cell_size_m);
    Ok(Json(s.grid(size, bbox)?).into_response())
}

async fn cell(State(s): Shared, Path((i, j)): Path<(String, String)>, q: Result<Query<SizeQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = q?;
    let size = q.cell_size_m.unwrap_or(s.config().default_cell_size_m);
    Ok(Json(s.cell(size, cell_index(&i, &j)?)?).into_response())
}

async fn compare(State(s): Shared, q: Result<Query<CompareQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = q?;
    let cells = parse_cells(q.cells.as_deref().ok_or_else(|| ApiError::bad_request("missing `cells` parameter"))?)?;
    let size = q.cell_size_m.unwrap_or(s.config().default_cell_size_m);
    Ok(Json(s.compare(size, &cells)?).into_response())
}

async fn glyph(State(s): Shared, Path((i, file)): Path<(String, String)>, q: Result<Query<GlyphQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = q?;
    let j = file.strip_suffix(".svg").ok_or_else(|| ApiError { status: StatusCode::NOT_FOUND, message: "glyphs are served as `{j}.svg`".into() })?;
    let size = q.cell_size_m.unwrap_or(s.config().default_cell_size_m);
    let radius = q.radius_px.unwrap_or(s.config().default_radius_px);
    let svg = s.glyph(size, cell_index(&i, j)?, radius)?;
    Ok(([(header::CONTENT_TYPE, SVG_CONTENT_TYPE)], svg).into_response())
}
