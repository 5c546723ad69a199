//! HTTP API over a directory of scenario archives.
//!
//! | Route | |
//! |---|---|
//! | `GET /districts` | archived districts sorted by name, plus the landing notice |
//! | `GET /districts/{id}/scenario?config=k` | one scenario with freshly computed metrics |
//! | `POST /solve` | bounded local-search solve, not persisted |
//! | `POST /events`, `GET /events/export` | exploration log |
//! | `GET /analytics/explorations` | per-district counts joined with covariates |
//! | `POST /survey`, `GET /survey/schema`, `GET /survey/export` | feedback survey |

mod events;
mod index;
mod summary;
mod survey;

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use rezone_core::lab::table::write_exploration_table;
use rezone_core::lab::DistrictCovariates;
use rezone_core::metrics::{school_deltas, segregation_report, travel_deltas, SchoolDelta, SegregationReport, TravelDeltaReport};
use rezone_core::model::{Assignment, FOCAL_GROUP};
use rezone_core::solver::{solve, SolveStatus, SolverConfig, SolverMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

pub use events::{Action, EventStore, ExplorationCount, ExplorationEvent, NewEvent};
pub use index::{ArchiveIndex, DistrictListing, IndexedDistrict};
pub use summary::plain_summary;
pub use survey::{
    export_csv as export_survey_csv, import_csv as import_survey_csv, schema as survey_schema, ClosedAnswer,
    FieldError, SurveyAnswers, SurveyResponse, SurveySchema, SurveyStore, SurveySubmission,
};

pub const DEFAULT_LANDING_TEXT: &str = include_str!("../assets/landing.txt");
pub const SESSION_HEADER: &str = "x-session-token";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub archive_dir: PathBuf,
    /// Event and survey logs live here when set; memory only otherwise.
    pub data_dir: Option<PathBuf>,
    pub solve_time_cap_secs: f64,
    pub solves_per_minute: usize,
    pub solve_workers: usize,
    pub exploration_count: ExplorationCount,
    pub raw_enrollment: bool,
    pub landing_text: String,
    pub show_landing: bool,
}

impl ServiceConfig {
    pub fn new(archive_dir: impl Into<PathBuf>) -> Self {
        Self {
            archive_dir: archive_dir.into(),
            data_dir: None,
            solve_time_cap_secs: 10.0,
            solves_per_minute: 6,
            solve_workers: 2,
            exploration_count: ExplorationCount::default(),
            raw_enrollment: false,
            landing_text: DEFAULT_LANDING_TEXT.trim().to_owned(),
            show_landing: true,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    index: OnceLock<Arc<ArchiveIndex>>,
    events: Mutex<EventStore>,
    surveys: Mutex<SurveyStore>,
    limiter: Mutex<HashMap<String, VecDeque<Instant>>>,
    solve_slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let (events, surveys) = match &config.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                (
                    EventStore::open(&dir.join("events.jsonl"))?,
                    SurveyStore::open(&dir.join("survey.jsonl"))?,
                )
            }
            None => (EventStore::default(), SurveyStore::default()),
        };
        Ok(Arc::new(Self {
            solve_slots: Arc::new(Semaphore::new(config.solve_workers.max(1))),
            config,
            index: OnceLock::new(),
            events: Mutex::new(events),
            surveys: Mutex::new(surveys),
            limiter: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Installs the archive index; later calls are ignored.
    pub fn install_index(&self, index: ArchiveIndex) {
        let _ = self.index.set(Arc::new(index));
    }

    pub fn index(&self) -> Option<Arc<ArchiveIndex>> {
        self.index.get().cloned()
    }

    /// Builds the index from `archive_dir` on a blocking thread.
    pub async fn load_index(self: &Arc<Self>) -> std::io::Result<usize> {
        let dir = self.config.archive_dir.clone();
        let index = tokio::task::spawn_blocking(move || ArchiveIndex::load(&dir))
            .await
            .map_err(std::io::Error::other)??;
        let n = index.len();
        self.install_index(index);
        Ok(n)
    }

    fn allow_solve(&self, session: &str) -> bool {
        let mut limiter = self.limiter.lock().expect("limiter lock");
        let now = Instant::now();
        let window = limiter.entry(session.to_owned()).or_default();
        while window.front().is_some_and(|t| now.duration_since(*t) > Duration::from_secs(60)) {
            window.pop_front();
        }
        if window.len() >= self.config.solves_per_minute {
            return false;
        }
        window.push_back(now);
        true
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Unprocessable(Vec<FieldError>),
    RateLimited,
    Unavailable,
    Internal(String),
}

impl ApiError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ApiError::Unprocessable(vec![FieldError {
            field: field.into(),
            message: message.into(),
        }])
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, fields) = match self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, what, vec![]),
            ApiError::Unprocessable(fields) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                fields
                    .iter()
                    .map(|f| format!("{}: {}", f.field, f.message))
                    .collect::<Vec<_>>()
                    .join("; "),
                fields,
            ),
            ApiError::RateLimited => (StatusCode::TOO_MANY_REQUESTS, "too many solve requests".into(), vec![]),
            ApiError::Unavailable => (
                StatusCode::SERVICE_UNAVAILABLE,
                "archive index is still loading".into(),
                vec![],
            ),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, msg, vec![]),
        };
        (status, Json(ErrorBody { error, fields })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn ready(state: &AppState) -> ApiResult<Arc<ArchiveIndex>> {
    state.index().ok_or(ApiError::Unavailable)
}

/// JSON body parsing that names the offending field.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".to_owned() } else { path };
        ApiError::field(&field, e.inner().to_string())
    })
}

fn csv_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/districts", get(list_districts))
        .route("/districts/{id}/scenario", get(get_scenario))
        .route("/solve", post(post_solve))
        .route("/events", post(post_event))
        .route("/events/export", get(export_events))
        .route("/analytics/explorations", get(get_explorations))
        .route("/survey", post(post_survey))
        .route("/survey/schema", get(get_survey_schema))
        .route("/survey/export", get(export_survey))
        .with_state(state)
}

/// Binds, starts loading the index in the background and serves until
/// ctrl-c. Requests that need the index get 503 until it is ready.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(config)?;
    let loader = state.clone();
    tokio::spawn(async move {
        match loader.load_index().await {
            Ok(n) => tracing::info!(districts = n, "archive index ready"),
            Err(e) => tracing::error!(error = %e, "cannot build archive index"),
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Serialize, Deserialize)]
pub struct Landing {
    pub show: bool,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
pub struct DistrictList {
    pub landing: Landing,
    pub districts: Vec<DistrictListing>,
}

async fn list_districts(State(state): State<Arc<AppState>>) -> ApiResult<Json<DistrictList>> {
    let index = ready(&state)?;
    Ok(Json(DistrictList {
        landing: Landing {
            show: state.config.show_landing,
            text: state.config.landing_text.clone(),
        },
        districts: index.listings(),
    }))
}

#[derive(Deserialize)]
struct ScenarioQuery {
    config: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPayload {
    pub district_id: String,
    pub district_name: String,
    pub config_index: usize,
    pub config: SolverConfig,
    pub status: SolveStatus,
    pub status_quo_assignment: Assignment,
    pub proposed_assignment: Assignment,
    pub report: SegregationReport,
    pub school_deltas: Vec<SchoolDelta>,
    pub travel_deltas: TravelDeltaReport,
    pub summary: String,
}

async fn get_scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<ScenarioQuery>,
) -> ApiResult<Json<ScenarioPayload>> {
    let index = ready(&state)?;
    let entry = index
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown district {id}")))?;
    let archive = &entry.archive;
    let k = match query.config.as_deref() {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::field("config", format!("{raw:?} is not a config index")))?,
        None => archive
            .default_selection()
            .map(|(i, _)| i)
            .ok_or_else(|| ApiError::field("config", "no config of this district was solved"))?,
    };
    let scenario = archive.results.get(k).ok_or_else(|| {
        ApiError::field(
            "config",
            format!("unknown config {k}; this district has {}", archive.results.len()),
        )
    })?;
    let result = scenario
        .outcome
        .result()
        .ok_or_else(|| ApiError::field("config", format!("config {k} has no solution")))?;

    // Metrics are recomputed from the assignments on every request.
    let district = &entry.district;
    let assignment = &result.assignment;
    let internal = |e: rezone_core::Error| ApiError::Internal(e.to_string());
    let report = segregation_report(district, assignment, FOCAL_GROUP).map_err(internal)?;
    let schools = school_deltas(district, assignment).map_err(internal)?;
    let travel = travel_deltas(district, assignment, &result.config_echo.travel_model).map_err(internal)?;
    let status_quo = district.status_quo();
    let unchanged = result.status == SolveStatus::StatusQuoReturned || *assignment == status_quo;
    Ok(Json(ScenarioPayload {
        district_id: district.id.clone(),
        district_name: district.name.clone(),
        config_index: k,
        config: result.config_echo.clone(),
        status: result.status,
        summary: plain_summary(&report, &travel, unchanged),
        status_quo_assignment: status_quo,
        proposed_assignment: assignment.clone(),
        report,
        school_deltas: schools,
        travel_deltas: travel,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub district_id: String,
    pub tau: f64,
    pub sigma: f64,
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    #[serde(default)]
    pub session: Option<String>,
}

/// Seed for an on-demand solve: the first eight bytes of a SHA-256 over
/// the request's parameters.
pub fn request_seed(district_id: &str, tau: f64, sigma: f64, time_limit_secs: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(district_id.as_bytes());
    for v in [tau, sigma, time_limit_secs] {
        h.update(v.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

async fn post_solve(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let index = ready(&state)?;
    let req: SolveRequest = parse_body(&body)?;
    let entry = index
        .get(&req.district_id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown district {}", req.district_id)))?;
    let mut errors = Vec::new();
    for (name, v) in [("tau", req.tau), ("sigma", req.sigma)] {
        if !(v.is_finite() && v >= 1.0) {
            errors.push(FieldError {
                field: name.into(),
                message: format!("must be a number ≥ 1, got {v}"),
            });
        }
    }
    if let Some(t) = req.time_limit_secs {
        if !(t.is_finite() && t > 0.0) {
            errors.push(FieldError {
                field: "time_limit_secs".into(),
                message: format!("must be > 0, got {t}"),
            });
        }
    }
    if !errors.is_empty() {
        return Err(ApiError::Unprocessable(errors));
    }
    let session = headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
        .or(req.session.clone())
        .unwrap_or_else(|| "anonymous".into());
    if !state.allow_solve(&session) {
        return Err(ApiError::RateLimited);
    }

    let cap = state.config.solve_time_cap_secs;
    let time = req.time_limit_secs.map_or(cap, |t| t.min(cap));
    let config = SolverConfig::new(req.tau, req.sigma)
        .with_mode(SolverMode::LocalSearch)
        .with_time_limit(time)
        .with_seed(request_seed(&req.district_id, req.tau, req.sigma, time));
    let district = entry.district.clone();
    let permit = state
        .solve_slots
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let result = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        solve(&district, &config)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::field("district_id", e.to_string()))?;
    Ok(Json(result).into_response())
}

async fn post_event(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let index = ready(&state)?;
    let new: NewEvent = parse_body(&body)?;
    if index.get(&new.district_id).is_none() {
        return Err(ApiError::field("district_id", format!("unknown district {}", new.district_id)));
    }
    let event = state
        .events
        .lock()
        .expect("event lock")
        .append(new, Utc::now())
        .map_err(|m| ApiError::field("timestamp", m))?;
    Ok((StatusCode::CREATED, Json(event)).into_response())
}

async fn export_events(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let text = state
        .events
        .lock()
        .expect("event lock")
        .export_csv()
        .map_err(ApiError::Internal)?;
    Ok(csv_response(text))
}

/// Per-district exploration counts with the district covariates, in the
/// layout read by the negative binomial fit. Every indexed district appears,
/// with zero when never explored.
pub fn exploration_table(index: &ArchiveIndex, events: &EventStore, config: &ServiceConfig) -> Result<String, String> {
    let counts = events.counts(config.exploration_count);
    let mut rows = Vec::new();
    for entry in index.iter() {
        match DistrictCovariates::from_district(&entry.district) {
            Ok(cov) => {
                let n = counts.get(&cov.district_id).copied().unwrap_or(0);
                rows.push((cov, n));
            }
            Err(e) => tracing::warn!(district = %entry.district.id, error = %e, "no covariates"),
        }
    }
    let mut buf = Vec::new();
    write_exploration_table(&mut buf, &rows, config.raw_enrollment).map_err(|e| e.to_string())?;
    String::from_utf8(buf).map_err(|e| e.to_string())
}

async fn get_explorations(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let index = ready(&state)?;
    let events = state.events.lock().expect("event lock");
    let text = exploration_table(&index, &events, &state.config).map_err(ApiError::Internal)?;
    Ok(csv_response(text))
}

async fn post_survey(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let index = ready(&state)?;
    let submission: SurveySubmission = parse_body(&body)?;
    let mut errors = survey::validate_answers(&submission.answers);
    if index.get(&submission.district_id).is_none() {
        errors.insert(
            0,
            FieldError {
                field: "district_id".into(),
                message: format!("unknown district {}", submission.district_id),
            },
        );
    }
    if !errors.is_empty() {
        return Err(ApiError::Unprocessable(errors));
    }
    let response = state
        .surveys
        .lock()
        .expect("survey lock")
        .append(submission, Utc::now())
        .map_err(ApiError::Internal)?;
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

async fn get_survey_schema() -> Json<SurveySchema> {
    Json(survey::schema())
}

async fn export_survey(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let text = survey::export_csv(state.surveys.lock().expect("survey lock").responses()).map_err(ApiError::Internal)?;
    Ok(csv_response(text))
}
