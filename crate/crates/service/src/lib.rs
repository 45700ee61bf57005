//! JSON API over a directory of fitted pipeline artifacts.
//!
//! The artifact bundle is loaded once and shared read-only; every analysis
//! request builds its own ensemble from the request seed, so responses are
//! pure functions of the request and the bundle.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use elevate_cli::commands::{DAMAGE_CURVES, DISCOUNT_MODELS, POSTERIOR, POSTERIOR_META};
use elevate_cli::config::RunConfig;
use elevate_cli::manifest::{Manifest, MANIFEST_FILE};
use elevate_core::analysis::{Engine, HouseReport, PoolBounds, Strategy};
use elevate_core::discount::Ar3Model;
use elevate_core::exposure::{DamageCurves, DamageModel, House};
use elevate_core::hazard::{GevParams, GevPosterior, ReturnLevelSummary};
use elevate_core::objectives::{FemaRecommendation, ObjectiveSurface};
use elevate_core::robustness::{pareto_front, robustness_curve, AcceptableRanges, RobustnessResult, Sense};
use elevate_core::sow::{generate_sows, Scenario, SowMode, SowSpec};
use elevate_core::stats;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

pub const HAZARD_PERIODS: [f64; 4] = [10.0, 50.0, 100.0, 500.0];

/// Everything the handlers read, loaded once at startup.
pub struct Artifacts {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: Manifest,
    pub posterior: GevPosterior,
    pub models: Vec<Ar3Model>,
    pub curves: DamageCurves,
    pub hazard: HazardSummary,
}

impl Artifacts {
    /// Loads and hash-checks the artifacts written by `fit-hazard` and
    /// `fit-discount`; damage curves come from `analyze` when present.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_str(
            &std::fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
        )?;
        manifest.verify(dir, POSTERIOR, "fit-hazard")?;
        manifest.verify(dir, POSTERIOR_META, "fit-hazard")?;
        manifest.verify(dir, DISCOUNT_MODELS, "fit-discount")?;
        let mut config: RunConfig =
            serde_json::from_value(manifest.config.clone()).context("manifest holds no usable run config")?;
        config.base_dir = dir.to_path_buf();
        let posterior = GevPosterior::load(&dir.join(POSTERIOR))?;
        let models: Vec<Ar3Model> = serde_json::from_str(&std::fs::read_to_string(dir.join(DISCOUNT_MODELS))?)?;
        let curves = if manifest.verify(dir, DAMAGE_CURVES, "analyze").is_ok() {
            serde_json::from_str(&std::fs::read_to_string(dir.join(DAMAGE_CURVES))?)?
        } else {
            DamageCurves::default()
        };
        let hazard = HazardSummary::new(&posterior)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            manifest,
            posterior,
            models,
            curves,
            hazard,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSummary {
    pub bfe: f64,
    pub map: GevParams,
    pub n_samples: usize,
    pub return_levels: Vec<ReturnLevelSummary>,
}

impl HazardSummary {
    pub fn new(post: &GevPosterior) -> elevate_core::Result<Self> {
        Ok(Self {
            bfe: post.base_flood_elevation(),
            map: post.map_estimate(),
            n_samples: post.len(),
            return_levels: HAZARD_PERIODS
                .iter()
                .map(|&t| post.return_level_summary(t))
                .collect::<elevate_core::Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub default_sows: usize,
    pub max_sows: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            default_sows: 2000,
            max_sows: 10_000,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    artifacts: Arc<RwLock<Option<Arc<Artifacts>>>>,
    pub limits: Limits,
}

impl AppState {
    pub fn new(limits: Limits) -> Self {
        Self {
            artifacts: Arc::new(RwLock::new(None)),
            limits,
        }
    }

    pub fn install(&self, artifacts: Artifacts) {
        *self.artifacts.write().expect("artifact lock") = Some(Arc::new(artifacts));
    }

    fn get(&self) -> Result<Arc<Artifacts>, ApiError> {
        self.artifacts
            .read()
            .expect("artifact lock")
            .clone()
            .ok_or(ApiError::NotReady)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/analyze", post(analyze))
        .route("/api/hazard/summary", get(hazard_summary))
        .route("/api/meta", get(meta))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_error(field: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotReady,
    Invalid(Vec<FieldError>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotReady => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({"error": "artifacts are not loaded yet"}),
            ),
            ApiError::Invalid(errors) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "invalid request", "fields": errors}),
            ),
            ApiError::Internal(message) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": message})),
        };
        (status, axum::Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Considering,
    Ignoring,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRequest {
    pub house: House,
    pub mode: Mode,
    pub ensemble_size: Option<usize>,
    pub seed: u64,
    pub scenario: Option<Scenario>,
    pub ranges: Option<AcceptableRanges>,
}

fn number(obj: &Value, key: &str, path: &str, errors: &mut Vec<FieldError>) -> Option<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => {
            errors.push(field_error(path, "required"));
            None
        }
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errors.push(field_error(path, "must be a finite number"));
                None
            }
        },
    }
}

/// Parses and validates a request body, collecting every field problem.
pub fn parse_request(body: &[u8]) -> Result<AnalyzeRequest, Vec<FieldError>> {
    let root: Value = serde_json::from_slice(body).map_err(|e| vec![field_error("body", format!("invalid JSON: {e}"))])?;
    let mut errors = Vec::new();
    let Some(house_obj) = root.get("house").filter(|h| h.is_object()) else {
        return Err(vec![field_error("house", "required object with value, size and floor_rel_bfe")]);
    };
    let value = number(house_obj, "value", "house.value", &mut errors);
    let size = number(house_obj, "size", "house.size", &mut errors);
    let floor = number(house_obj, "floor_rel_bfe", "house.floor_rel_bfe", &mut errors);
    if value.is_some_and(|v| v <= 0.0) {
        errors.push(field_error("house.value", "must be positive"));
    }
    if size.is_some_and(|s| s <= 0.0) {
        errors.push(field_error("house.size", "must be positive"));
    }

    let empty = json!({});
    let opts = root.get("options").unwrap_or(&empty);
    if !opts.is_object() {
        errors.push(field_error("options", "must be an object"));
    }
    let mode = match opts.get("mode") {
        None | Some(Value::Null) => Some(Mode::Considering),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| errors.push(field_error("options.mode", "must be \"considering\" or \"ignoring\"")))
            .ok(),
    };
    let ensemble_size = match opts.get("ensemble_size") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 => Some(n as usize),
            _ => {
                errors.push(field_error("options.ensemble_size", "must be a positive integer"));
                None
            }
        },
    };
    let seed = match opts.get("seed") {
        None | Some(Value::Null) => {
            errors.push(field_error("options.seed", "required for reproducible results"));
            None
        }
        Some(v) => v
            .as_u64()
            .or_else(|| {
                errors.push(field_error("options.seed", "must be a non-negative integer"));
                None
            }),
    };
    let scenario = match opts.get("scenario") {
        None | Some(Value::Null) => None,
        Some(v) => serde_json::from_value::<Scenario>(v.clone())
            .map_err(|e| errors.push(field_error("options.scenario", format!("invalid scenario: {e}"))))
            .ok(),
    };
    let ranges = match opts.get("ranges") {
        None | Some(Value::Null) => None,
        Some(v) => match serde_json::from_value::<AcceptableRanges>(v.clone()) {
            Ok(r) => match r.validate() {
                Ok(()) => Some(r),
                Err(e) => {
                    errors.push(field_error("options.ranges", e.to_string()));
                    None
                }
            },
            Err(e) => {
                errors.push(field_error("options.ranges", format!("invalid ranges: {e}")));
                None
            }
        },
    };
    if !errors.is_empty() {
        return Err(errors);
    }
    let house = House::new(value.unwrap(), size.unwrap(), floor.unwrap()).map_err(|e| vec![field_error("house", e.to_string())])?;
    Ok(AnalyzeRequest {
        house,
        mode: mode.unwrap(),
        ensemble_size,
        seed: seed.unwrap(),
        scenario,
        ranges,
    })
}

/// Fields outside the exposure-study pool bounds (accepted, but flagged).
pub fn out_of_range(house: &House) -> Vec<String> {
    let b = PoolBounds::default();
    let mut out = Vec::new();
    let check = |x: f64, (lo, hi): (f64, f64)| x < lo || x > hi;
    if check(house.value, b.value) {
        out.push("house.value".to_string());
    }
    if check(house.size, b.size) {
        out.push("house.size".to_string());
    }
    if check(house.floor_rel_bfe, b.floor_rel_bfe) {
        out.push("house.floor_rel_bfe".to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSeries {
    pub upfront: Vec<f64>,
    pub total_mean: Vec<f64>,
    pub total_q05: Vec<f64>,
    pub total_q95: Vec<f64>,
    /// Half-width of the 95% Monte Carlo interval of `total_mean`.
    pub total_mc_halfwidth: Vec<f64>,
    pub damages_mean: Vec<f64>,
    pub bcr_mean: Vec<Option<f64>>,
    pub reliability_mean: Vec<f64>,
    pub reliability_q05: Vec<f64>,
    pub reliability_q95: Vec<f64>,
}

impl SurfaceSeries {
    fn from_surface(s: &ObjectiveSurface) -> Self {
        let n = s.n_sows() as f64;
        let mut out = Self {
            upfront: vec![],
            total_mean: vec![],
            total_q05: vec![],
            total_q95: vec![],
            total_mc_halfwidth: vec![],
            damages_mean: vec![],
            bcr_mean: vec![],
            reliability_mean: vec![],
            reliability_q05: vec![],
            reliability_q95: vec![],
        };
        for p in &s.policies {
            let total = p.total();
            out.upfront.push(p.upfront);
            out.total_mean.push(p.mean_total());
            out.total_q05.push(stats::quantile(&total, 0.05));
            out.total_q95.push(stats::quantile(&total, 0.95));
            out.total_mc_halfwidth
                .push(if n > 1.0 { 1.96 * (stats::variance(&total) / n).sqrt() } else { 0.0 });
            out.damages_mean.push(p.mean_led());
            out.bcr_mean.push(p.mean_bcr());
            out.reliability_mean.push(p.mean_reliability());
            out.reliability_q05.push(stats::quantile(&p.reliability, 0.05));
            out.reliability_q95.push(stats::quantile(&p.reliability, 0.95));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub h: f64,
    pub upfront: f64,
    pub reliability: f64,
    pub bcr: Option<f64>,
    pub passes_cb_test: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub house: House,
    pub out_of_range: Vec<String>,
    pub mode: Mode,
    pub seed: u64,
    pub scenario: Option<Scenario>,
    pub requested_sows: usize,
    pub n_sows: usize,
    pub capped: bool,
    pub bfe: f64,
    pub fema: FemaRecommendation,
    pub h_opt_ignoring: f64,
    pub h_opt_considering: f64,
    pub grid: Vec<f64>,
    pub considering: SurfaceSeries,
    pub ignoring: SurfaceSeries,
    pub strategies: Vec<Strategy>,
    pub robustness: Vec<RobustnessResult>,
    pub pareto_front: Vec<FrontPoint>,
}

/// Runs one analysis against a loaded bundle.
pub fn run_analysis(a: &Artifacts, limits: Limits, req: &AnalyzeRequest) -> anyhow::Result<AnalyzeResponse> {
    let requested = req.ensemble_size.unwrap_or(limits.default_sows);
    let n = requested.min(limits.max_sows);
    let s = &a.config.sow;
    let spec = SowSpec {
        n,
        seed: req.seed,
        mode: req.scenario.map(SowMode::fixed).unwrap_or_else(|| s.mode.clone()),
        lifetime: s.lifetime,
        error_halfwidth: s.error_halfwidth,
        horizon: s.horizon,
    };
    let ensemble = generate_sows(&a.posterior, &a.models, &spec)?;
    let mut options = a.config.analysis_options();
    if let Some(r) = req.ranges {
        options.ranges = r;
    }
    let cost = a.config.analysis.cost.clone();
    let engine = Engine::new(&a.posterior, &ensemble, a.curves.clone(), cost, options)?;
    let analysis = engine.analyze(&req.house)?;
    let HouseReport {
        fema,
        h_opt_ignoring,
        h_opt_considering,
        strategies,
        robustness,
        bfe,
        ..
    } = analysis.report;

    let (robustness, front) = match req.mode {
        Mode::Considering => (robustness, front_points(&analysis.considering)?),
        Mode::Ignoring => (
            robustness_curve(&analysis.ignoring, &engine.options.ranges)?,
            front_points(&analysis.ignoring)?,
        ),
    };
    Ok(AnalyzeResponse {
        out_of_range: out_of_range(&req.house),
        house: req.house.clone(),
        mode: req.mode,
        seed: req.seed,
        scenario: req.scenario,
        requested_sows: requested,
        n_sows: n,
        capped: n < requested,
        bfe,
        fema,
        h_opt_ignoring,
        h_opt_considering,
        grid: engine.grid.clone(),
        considering: SurfaceSeries::from_surface(&analysis.considering),
        ignoring: SurfaceSeries::from_surface(&analysis.ignoring),
        strategies,
        robustness,
        pareto_front: front,
    })
}

fn front_points(s: &ObjectiveSurface) -> anyhow::Result<Vec<FrontPoint>> {
    let pts: Vec<Vec<f64>> = s.policies.iter().map(|p| vec![p.upfront, p.mean_reliability()]).collect();
    Ok(pareto_front(&pts, &[Sense::Minimize, Sense::Maximize])?
        .into_iter()
        .map(|i| {
            let p = &s.policies[i];
            let bcr = p.mean_bcr();
            FrontPoint {
                h: p.h,
                upfront: p.upfront,
                reliability: p.mean_reliability(),
                bcr,
                passes_cb_test: bcr.is_some_and(|b| b >= 1.0),
            }
        })
        .collect())
}

async fn analyze(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let artifacts = state.get()?;
    let req = parse_request(&body).map_err(ApiError::Invalid)?;
    let limits = state.limits;
    let started = Instant::now();
    let result = tokio::task::spawn_blocking(move || run_analysis(&artifacts, limits, &req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(format!("{e:#}")))?;
    let mut resp = axum::Json(result).into_response();
    // timing goes in a header so bodies stay byte-identical across replays
    if let Ok(v) = HeaderValue::from_str(&started.elapsed().as_millis().to_string()) {
        resp.headers_mut().insert("x-elapsed-ms", v);
    }
    Ok(resp)
}

async fn hazard_summary(State(state): State<AppState>) -> Result<axum::Json<HazardSummary>, ApiError> {
    Ok(axum::Json(state.get()?.hazard.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub service_version: String,
    pub tool: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub stages: Vec<StageMeta>,
    pub seeds: Seeds,
    pub posterior_samples: usize,
    pub discount_models: Vec<String>,
    pub damage_models: Vec<String>,
    pub default_ensemble_size: usize,
    pub max_ensemble_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMeta {
    pub stage: String,
    pub config_sha256: String,
    pub outputs: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub hazard: u64,
    pub sow: u64,
    pub sweep: u64,
    pub sensitivity: u64,
}

pub fn meta_of(a: &Artifacts, limits: Limits) -> Meta {
    let c = &a.config;
    Meta {
        service_version: env!("CARGO_PKG_VERSION").into(),
        tool: a.manifest.tool.clone(),
        tool_version: a.manifest.version.clone(),
        config_sha256: a.manifest.config_sha256.clone(),
        stages: a
            .manifest
            .stages
            .iter()
            .map(|(k, v)| StageMeta {
                stage: k.clone(),
                config_sha256: v.config_sha256.clone(),
                outputs: v.outputs.clone(),
            })
            .collect(),
        seeds: Seeds {
            hazard: c.hazard.seed,
            sow: c.sow.seed,
            sweep: c.sweep.seed,
            sensitivity: c.sensitivity.seed,
        },
        posterior_samples: a.posterior.len(),
        discount_models: a.models.iter().map(|m| m.kind.to_string()).collect(),
        damage_models: DamageModel::ALL.iter().map(|m| m.to_string()).collect(),
        default_ensemble_size: limits.default_sows,
        max_ensemble_size: limits.max_sows,
    }
}

async fn meta(State(state): State<AppState>) -> Result<axum::Json<Meta>, ApiError> {
    let a = state.get()?;
    Ok(axum::Json(meta_of(&a, state.limits)))
}
