//! HTTP facade over the `doseopt` solvers.
//!
//! Design solves answer synchronously. Simulations run as background jobs
//! held in an in-memory store and are polled through `GET /v1/jobs/{id}`.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use doseopt::api::{
    doptimal_document, evaluate, local_document, maximin_document, transform_document,
    DOptimalRequest, EvaluateRequest, LocalRequest, MaximinRequest, TransformRequest,
};
use doseopt::simulation::DesignSource;
use doseopt::{nesting_edges, run_simulation, ModelId, Param, SimulationReport, SimulationRequest};

pub use error::{ApiError, ErrorBody};

/// Seed used by simulations whose request carries none.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done { report: SimulationReport },
    Failed { error: ErrorBody },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    #[serde(flatten)]
    pub state: JobState,
}

/// Shared state: the job store and the default simulation seed.
#[derive(Debug)]
pub struct AppState {
    jobs: Mutex<HashMap<u64, JobState>>,
    next_id: AtomicU64,
    default_seed: u64,
}

impl AppState {
    pub fn new(default_seed: u64) -> Self {
        AppState {
            jobs: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            default_seed,
        }
    }

    fn set(&self, id: u64, state: JobState) {
        self.jobs
            .lock()
            .expect("job store poisoned")
            .insert(id, state);
    }

    fn get(&self, id: u64) -> Option<JobState> {
        self.jobs
            .lock()
            .expect("job store poisoned")
            .get(&id)
            .cloned()
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(DEFAULT_SEED)
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/designs/local", post(local))
        .route("/v1/designs/maximin", post(maximin))
        .route("/v1/designs/doptimal", post(doptimal))
        .route("/v1/designs/evaluate", post(evaluate_design))
        .route("/v1/designs/transform", post(transform))
        .route("/v1/simulate", post(simulate))
        .route("/v1/jobs/{id}", get(job))
        .route("/v1/models", get(models))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves on `0.0.0.0:port` until interrupted.
pub async fn serve(port: u16, default_seed: u64) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(default_seed))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking wrapper around [`serve`] with its own runtime.
pub fn serve_blocking(port: u16, default_seed: u64) -> std::io::Result<()> {
    tokio::runtime::Runtime::new()?.block_on(serve(port, default_seed))
}

/// Port from the `PORT` environment variable, else `fallback`.
pub fn port_from_env(fallback: u16) -> u16 {
    std::env::var("PORT")
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(fallback)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::malformed)
}

async fn solve<Req, Out>(
    body: Bytes,
    run: fn(&Req) -> doseopt::Result<Out>,
) -> Result<Json<Out>, ApiError>
where
    Req: DeserializeOwned + Send + 'static,
    Out: Send + 'static,
{
    let req: Req = parse(&body)?;
    let out = tokio::task::spawn_blocking(move || run(&req))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
        })??;
    Ok(Json(out))
}

async fn local(body: Bytes) -> Response {
    solve::<LocalRequest, _>(body, local_document)
        .await
        .into_response()
}

async fn maximin(body: Bytes) -> Response {
    solve::<MaximinRequest, _>(body, maximin_document)
        .await
        .into_response()
}

async fn doptimal(body: Bytes) -> Response {
    solve::<DOptimalRequest, _>(body, doptimal_document)
        .await
        .into_response()
}

async fn evaluate_design(body: Bytes) -> Response {
    solve::<EvaluateRequest, _>(body, evaluate)
        .await
        .into_response()
}

async fn transform(body: Bytes) -> Response {
    solve::<TransformRequest, _>(body, transform_document)
        .await
        .into_response()
}

/// `{spec, designs}` with the designs given separately, or a flat request.
#[derive(Deserialize)]
#[serde(untagged)]
enum SimulateBody {
    Nested {
        spec: SimulationRequest,
        #[serde(default)]
        designs: Option<Vec<DesignSource>>,
    },
    Flat(SimulationRequest),
}

impl SimulateBody {
    fn into_request(self) -> SimulationRequest {
        match self {
            SimulateBody::Nested { mut spec, designs } => {
                if let Some(d) = designs {
                    spec.designs = d;
                }
                spec
            }
            SimulateBody::Flat(r) => r,
        }
    }
}

async fn simulate(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let request = parse::<SimulateBody>(&body)?.into_request();
    request.validate()?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    state.set(id, JobState::Running);
    let worker = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        let outcome = match run_simulation(&request, worker.default_seed) {
            Ok(report) => JobState::Done { report },
            Err(e) => JobState::Failed {
                error: ApiError::from(e).body,
            },
        };
        worker.set(id, outcome);
    });
    let status = JobStatus {
        id,
        state: JobState::Running,
    };
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

async fn job(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<JobStatus>, ApiError> {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::not_found(format!("unknown job `{id}`")))?;
    let state = state
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown job `{id}`")))?;
    Ok(Json(JobStatus { id, state }))
}

fn constraint(p: Param) -> &'static str {
    match p {
        Param::A | Param::B => "> 0",
        Param::C => "[0, 1]",
        Param::D => ">= 1",
    }
}

/// Model metadata: parameters, constraints and nesting edges.
pub fn model_catalog() -> Value {
    let models: Vec<Value> = ModelId::ALL
        .iter()
        .map(|m| {
            let params: Vec<Value> = m
                .params()
                .iter()
                .map(|&p| json!({"name": p.name(), "constraint": constraint(p)}))
                .collect();
            json!({"id": m.label(), "name": m.name(), "formula": m.formula(), "params": params})
        })
        .collect();
    json!({"models": models, "nesting": nesting_edges()})
}

async fn models() -> Json<Value> {
    Json(model_catalog())
}
