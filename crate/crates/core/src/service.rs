//! Local HTTP API for the interactive split designer.
//!
//! One project per server: a dataset, the current region set and the split
//! derived from it. Every successful `PUT /api/regions` bumps the revision;
//! statistics for a revision are computed off the request path and a newer
//! revision cancels the older computation.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ingest::Dataset;
use crate::leakage::{audit_labels, LeakageError, SetLabel, SplitAssignment};
use crate::report::{sha256_hex, split_outputs, MANIFEST_LEAKAGE_THRESHOLD};
use crate::spatial::{cell_of, DEFAULT_INDEX_CELL};
use crate::split::balance::balance_from_labels;
use crate::split::{
    assign_by_regions, validate_split, AssignMode, BalanceReport, CutReport, Region, RegionSet, ValidationConfig,
    ValidationReport,
};

pub const DEFAULT_PORT: u16 = 8642;
pub const DEFAULT_MAX_POINTS: usize = 5000;

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub id: String,
    /// SHA-256 of the samples file, recorded in exported manifests.
    pub samples_sha256: String,
    pub mode: AssignMode,
    pub attribute_keys: Vec<String>,
    pub validation: ValidationConfig,
    /// Directory `POST /api/export` writes into.
    pub export_dir: PathBuf,
    /// Fixed `created` stamp for exported manifests.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub revision: u64,
    pub counts: BTreeMap<SetLabel, usize>,
    pub proportions: BTreeMap<SetLabel, Option<f64>>,
    pub leakage_threshold: f64,
    /// `None` when the split has no train sample.
    pub leakage: Option<BTreeMap<SetLabel, Option<f64>>>,
    pub balance: BalanceReport,
    pub cut_sequences: usize,
    pub validation: ValidationReport,
}

struct Derived {
    labels: Arc<Vec<SetLabel>>,
    split: SplitAssignment,
    cuts: CutReport,
}

struct Project {
    regions: RegionSet,
    revision: u64,
    derived: Derived,
    stats: Option<Arc<Stats>>,
    cancel: Arc<AtomicBool>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ProjectConfig,
    dataset: Arc<Dataset>,
    project: Mutex<Project>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn derive(ds: &Dataset, regions: &RegionSet, mode: AssignMode) -> ApiResult<Derived> {
    let (split, cuts) =
        assign_by_regions(ds, regions, mode).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let labels = split
        .resolve(ds)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Derived {
        labels: Arc::new(labels),
        split,
        cuts,
    })
}

/// Statistics for one revision; returns `None` once `cancel` is raised.
#[allow(clippy::too_many_arguments)]
fn compute_stats(
    ds: &Dataset,
    labels: &[SetLabel],
    split: &SplitAssignment,
    regions: &RegionSet,
    cuts_count: usize,
    revision: u64,
    config: &ProjectConfig,
    cancel: &AtomicBool,
) -> Option<Stats> {
    let cancelled = || cancel.load(Ordering::Relaxed);
    let balance = balance_from_labels(ds, labels, &config.attribute_keys);
    if cancelled() {
        return None;
    }
    let leakage = match audit_labels(ds, labels, &[MANIFEST_LEAKAGE_THRESHOLD], DEFAULT_INDEX_CELL) {
        Ok(r) => Some(
            [(SetLabel::Val, r.val.ratios[0]), (SetLabel::Test, r.test.ratios[0])]
                .into_iter()
                .collect(),
        ),
        Err(LeakageError::NoTrainSamples) => None,
        Err(e) => {
            log::error!("stats for revision {revision}: {e}");
            None
        }
    };
    if cancelled() {
        return None;
    }
    let validation = validate_split(ds, split, Some(regions), &config.validation);
    if cancelled() {
        return None;
    }
    Some(Stats {
        revision,
        counts: balance.counts.clone(),
        proportions: balance.proportions.clone(),
        leakage_threshold: MANIFEST_LEAKAGE_THRESHOLD,
        leakage,
        balance,
        cut_sequences: cuts_count,
        validation,
    })
}

impl AppState {
    pub fn new(dataset: Dataset, regions: RegionSet, config: ProjectConfig) -> Result<Self, String> {
        regions.validate().map_err(|e| e.to_string())?;
        let derived = derive(&dataset, &regions, config.mode).map_err(|e| e.message)?;
        let state = AppState {
            inner: Arc::new(Inner {
                config,
                dataset: Arc::new(dataset),
                project: Mutex::new(Project {
                    regions,
                    revision: 0,
                    derived,
                    stats: None,
                    cancel: Arc::new(AtomicBool::new(false)),
                }),
            }),
        };
        {
            let project = state.lock();
            state.spawn_stats(&project);
        }
        Ok(state)
    }

    fn lock(&self) -> MutexGuard<'_, Project> {
        self.inner.project.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    fn spawn_stats(&self, project: &Project) {
        let state = self.clone();
        let ds = Arc::clone(&self.inner.dataset);
        let labels = Arc::clone(&project.derived.labels);
        let split = project.derived.split.clone();
        let regions = project.regions.clone();
        let cuts = project.derived.cuts.cut_sequences;
        let revision = project.revision;
        let cancel = Arc::clone(&project.cancel);
        let job = move || {
            let stats = compute_stats(
                &ds,
                &labels,
                &split,
                &regions,
                cuts,
                revision,
                &state.inner.config,
                &cancel,
            );
            if let Some(stats) = stats {
                let mut p = state.lock();
                if p.revision == revision {
                    p.stats = Some(Arc::new(stats));
                }
            }
        };
        match tokio::runtime::Handle::try_current() {
            Ok(handle) => {
                handle.spawn_blocking(job);
            }
            Err(_) => {
                std::thread::spawn(job);
            }
        }
    }
}

#[derive(Serialize)]
struct ProjectSummary {
    id: String,
    revision: u64,
    samples: usize,
    samples_sha256: String,
    maps: BTreeMap<String, usize>,
    attribute_keys: Vec<String>,
    regions: usize,
    mode: String,
    counts: BTreeMap<SetLabel, usize>,
    targets: [f64; 3],
}

async fn get_project(State(state): State<AppState>) -> Json<ProjectSummary> {
    let p = state.lock();
    let cfg = &state.inner.config;
    Json(ProjectSummary {
        id: cfg.id.clone(),
        revision: p.revision,
        samples: state.inner.dataset.len(),
        samples_sha256: cfg.samples_sha256.clone(),
        maps: state.inner.dataset.map_counts(),
        attribute_keys: cfg.attribute_keys.clone(),
        regions: p.regions.regions.len(),
        mode: match cfg.mode {
            AssignMode::PerSample => "per_sample".into(),
            AssignMode::PerSequence => "per_sequence".into(),
        },
        counts: p.derived.split.counts(),
        targets: cfg.validation.targets,
    })
}

#[derive(Deserialize)]
struct SamplesQuery {
    map_id: String,
    max_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub set: SetLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesResponse {
    pub map_id: String,
    pub revision: u64,
    pub total: usize,
    /// Decimation grid size; 0 when every sample is returned.
    pub cell_size: f64,
    pub points: Vec<DisplayPoint>,
}

/// Keep the first sample (dataset order) of every occupied grid cell,
/// doubling the cell until at most `max_points` remain.
pub fn decimate(ds: &Dataset, members: &[usize], max_points: usize) -> (f64, Vec<usize>) {
    if members.len() <= max_points {
        return (0.0, members.to_vec());
    }
    let samples = ds.samples();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &i in members {
        x0 = x0.min(samples[i].x);
        x1 = x1.max(samples[i].x);
        y0 = y0.min(samples[i].y);
        y1 = y1.max(samples[i].y);
    }
    let extent = (x1 - x0).max(y1 - y0).max(1e-6);
    let mut cell = extent / (max_points as f64).sqrt();
    loop {
        let mut seen = std::collections::HashSet::new();
        let kept: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| seen.insert(cell_of(samples[i].x - x0, samples[i].y - y0, cell)))
            .collect();
        if kept.len() <= max_points {
            return (cell, kept);
        }
        cell *= 2.0;
    }
}

async fn get_samples(State(state): State<AppState>, Query(q): Query<SamplesQuery>) -> ApiResult<Json<SamplesResponse>> {
    let ds = &state.inner.dataset;
    if !ds.maps().contains(&q.map_id) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown map `{}`", q.map_id),
        ));
    }
    let max_points = q.max_points.unwrap_or(DEFAULT_MAX_POINTS);
    if max_points == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "max_points must be positive"));
    }
    let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].map_id == q.map_id).collect();
    let (cell_size, kept) = decimate(ds, &members, max_points);
    let p = state.lock();
    let points = kept
        .iter()
        .map(|&i| {
            let s = &ds.samples()[i];
            DisplayPoint {
                id: s.id.clone(),
                x: s.x,
                y: s.y,
                set: p.derived.labels[i],
            }
        })
        .collect();
    Ok(Json(SamplesResponse {
        map_id: q.map_id,
        revision: p.revision,
        total: members.len(),
        cell_size,
        points,
    }))
}

async fn get_regions(State(state): State<AppState>) -> Json<serde_json::Value> {
    let p = state.lock();
    Json(json!({ "revision": p.revision, "regions": p.regions.regions }))
}

#[derive(Deserialize)]
struct PutRegions {
    base_revision: u64,
    regions: Vec<Region>,
}

async fn put_regions(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: PutRegions = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))?;
    let regions = RegionSet::new(req.regions);
    regions
        .validate()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut p = state.lock();
    if req.base_revision != p.revision {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("stale revision {}; current is {}", req.base_revision, p.revision),
        ));
    }
    let derived = derive(&state.inner.dataset, &regions, state.inner.config.mode)?;
    p.cancel.store(true, Ordering::Relaxed);
    p.cancel = Arc::new(AtomicBool::new(false));
    p.regions = regions;
    p.derived = derived;
    p.revision += 1;
    p.stats = None;
    state.spawn_stats(&p);
    Ok(Json(json!({ "revision": p.revision })))
}

#[derive(Deserialize)]
struct StatsQuery {
    revision: Option<u64>,
}

async fn get_stats(State(state): State<AppState>, Query(q): Query<StatsQuery>) -> ApiResult<Json<serde_json::Value>> {
    let p = state.lock();
    let revision = q.revision.unwrap_or(p.revision);
    if revision > p.revision {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("revision {revision} does not exist yet"),
        ));
    }
    let body = if revision < p.revision {
        json!({ "revision": revision, "current_revision": p.revision, "status": "superseded" })
    } else {
        match &p.stats {
            Some(stats) => {
                json!({ "revision": revision, "current_revision": p.revision, "status": "done", "stats": &**stats })
            }
            None => json!({ "revision": revision, "current_revision": p.revision, "status": "pending" }),
        }
    };
    Ok(Json(body))
}

async fn post_export(State(state): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let cfg = &state.inner.config;
    let ds = &state.inner.dataset;
    let (regions, split, cuts, revision) = {
        let p = state.lock();
        (
            p.regions.clone(),
            p.derived.split.clone(),
            p.derived.cuts.clone(),
            p.revision,
        )
    };
    let regions_json = regions.to_json();
    let inputs: BTreeMap<String, String> = [
        ("regions".to_string(), sha256_hex(regions_json.as_bytes())),
        ("samples".to_string(), cfg.samples_sha256.clone()),
    ]
    .into_iter()
    .collect();
    let internal = |e: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e);
    let out = split_outputs(ds, &split, &cuts, inputs, &cfg.attribute_keys, cfg.timestamp.as_deref())
        .map_err(|e| internal(e.to_string()))?;
    out.write_to(&cfg.export_dir).map_err(|e| internal(e.to_string()))?;
    let regions_path = cfg.export_dir.join("regions.json");
    std::fs::write(&regions_path, &regions_json).map_err(|e| internal(e.to_string()))?;
    Ok(Json(json!({
        "revision": revision,
        "dir": cfg.export_dir.to_string_lossy(),
        "files": ["cuts.json", "manifest.json", "regions.json", "split.csv"],
        "split_sha256": out.manifest.split_sha256,
    })))
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/project", get(get_project))
        .route("/api/samples", get(get_samples))
        .route("/api/regions", get(get_regions).put(put_regions))
        .route("/api/stats", get(get_stats))
        .route("/api/export", post(post_export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
