//! Read-only HTTP API over a QC record table.
//!
//! All payloads are JSON objects carrying `"schemaVersion": "v1"`. The
//! table is loaded once; handlers only read it.

pub mod query;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use segqc_core::cohort::{summary_by_structure, upset_counts_with, within_patient_sd, CohortTable};
use segqc_core::SegmentQCRecord;

pub use axum::http::HeaderValue;
pub use query::{ApiQuery, QueryError};

pub const SCHEMA_VERSION: &str = "v1";
pub const MAX_RECORDS: usize = 10_000;

#[derive(Clone)]
struct AppState {
    table: Arc<CohortTable>,
}

/// Error payload: `{"schemaVersion", "error": {"status", "field", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    field: Option<String>,
    message: String,
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            field: Some(e.field),
            message: e.message,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schemaVersion": SCHEMA_VERSION,
            "error": {
                "status": self.status.as_u16(),
                "field": self.field,
                "message": self.message,
            }
        });
        (self.status, Json(body)).into_response()
    }
}

fn payload<T: Serialize>(body: T) -> Json<Value> {
    let mut v = serde_json::to_value(body).expect("serializable payload");
    if let Value::Object(map) = &mut v {
        map.insert("schemaVersion".into(), Value::from(SCHEMA_VERSION));
    }
    Json(v)
}

/// Builds the router. `cors_origin` of `None` allows any origin.
pub fn router(table: CohortTable, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods([
        axum::http::Method::GET,
        axum::http::Method::HEAD,
    ]);
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/v1/structures", get(structures))
        .route("/api/v1/summary", get(summary))
        .route("/api/v1/upset", get(upset))
        .route("/api/v1/distribution", get(distribution))
        .route("/api/v1/records", get(records))
        .with_state(AppState { table: Arc::new(table) })
        .layer(cors)
}

pub fn load_table(path: &Path) -> segqc_core::Result<CohortTable> {
    CohortTable::from_csv_path(path)
}

/// Serves until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

/// Binds `addr` and returns the listener with its resolved address.
pub async fn bind(addr: SocketAddr) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

async fn structures(State(s): State<AppState>) -> Json<Value> {
    payload(json!({ "structures": s.table.structures() }))
}

async fn summary(State(s): State<AppState>, RawQuery(raw): RawQuery) -> Result<Json<Value>, ApiError> {
    let q = ApiQuery::parse(raw.as_deref())?;
    let table = s.table.apply_filters(&q.filter());
    Ok(payload(json!({ "rows": summary_by_structure(&table) })))
}

async fn upset(State(s): State<AppState>, RawQuery(raw): RawQuery) -> Result<Json<Value>, ApiError> {
    let q = ApiQuery::parse(raw.as_deref())?;
    let f = q.filter();
    let table = s.table.apply_filters(&f);
    let counts = upset_counts_with(&table, f.na_laterality_as_pass);
    Ok(payload(json!({
        "order": ["completeness", "connected", "laterality", "minVolume"],
        "total": counts.total(),
        "counts": counts.counts,
    })))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Distribution {
    structure: String,
    laterality: Option<segqc_core::Laterality>,
    feature: String,
    filters: String,
    before: Vec<f64>,
    after: Vec<f64>,
    before_patients: Vec<String>,
    after_patients: Vec<String>,
}

async fn distribution(State(s): State<AppState>, RawQuery(raw): RawQuery) -> Result<Json<Value>, ApiError> {
    let q = ApiQuery::parse(raw.as_deref())?;
    let Some(structure) = q.structure.clone() else {
        return Err(ApiError {
            status: StatusCode::BAD_REQUEST,
            field: Some("structure".into()),
            message: "required".into(),
        });
    };
    if !s.table.has_structure(&structure) {
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            field: Some("structure".into()),
            message: format!("unknown structure {structure:?}"),
        });
    }
    let before = within_patient_sd(&s.table, &structure, q.laterality, &q.heuristics.identity_only());
    let after = within_patient_sd(&s.table, &structure, q.laterality, &q.heuristics);
    Ok(payload(Distribution {
        structure,
        laterality: q.laterality,
        feature: q.feature.clone(),
        filters: q.heuristics.to_string(),
        before: before.iter().map(|p| p.sd).collect(),
        after: after.iter().map(|p| p.sd).collect(),
        before_patients: before.into_iter().map(|p| p.patient_id).collect(),
        after_patients: after.into_iter().map(|p| p.patient_id).collect(),
    }))
}

async fn records(State(s): State<AppState>, RawQuery(raw): RawQuery) -> Result<Json<Value>, ApiError> {
    let q = ApiQuery::parse(raw.as_deref())?;
    let f = q.filter();
    let matching: Vec<&SegmentQCRecord> = s.table.records().iter().filter(|r| f.matches(r)).collect();
    let total = matching.len();
    Ok(payload(json!({
        "total": total,
        "truncated": total > MAX_RECORDS,
        "records": &matching[..total.min(MAX_RECORDS)],
    })))
}
