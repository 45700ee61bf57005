use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use elevate_cli::commands::{self, Ctx};
use elevate_cli::config::RunConfig;
use elevate_core::analysis::{HouseReport, StrategyKind};
use elevate_core::hazard::GevPosterior;
use elevate_service::{router, AppState, Artifacts, Limits};
use serde_json::{json, Value};
use tower::ServiceExt;

const SOWS: usize = 300;

/// A reduced pipeline run over the shipped data, shared by every test.
fn fixture() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
        let out = tempfile::tempdir().unwrap().keep();
        let toml = format!(
            r#"
output_dir = "{out}"
[data]
gage = "{root}/data/usgs_01554000_daily.rdb"
rating = "{root}/data/rating_curve.csv"
discount = "{root}/data/discount_rates.csv"
damage_manifest = "{root}/data/damage/manifest.json"
[hazard]
n_samples = 6000
burn_in = 2000
[sow]
n = {SOWS}
seed = 9
"#,
            out = out.display(),
            root = root.display()
        );
        let cfg = RunConfig::from_toml(&toml, &out).unwrap();
        let mut ctx = Ctx::new(cfg).unwrap();
        commands::cmd_ingest(&mut ctx).unwrap();
        commands::cmd_fit_hazard(&mut ctx).unwrap();
        commands::cmd_fit_discount(&mut ctx).unwrap();
        commands::cmd_analyze(&mut ctx, None).unwrap();
        out
    })
}

fn loaded(limits: Limits) -> AppState {
    let state = AppState::new(limits);
    state.install(Artifacts::load(fixture()).unwrap());
    state
}

async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, headers, body)
}

fn post(body: &Value) -> Request<Body> {
    Request::post("/api/analyze")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn sample_request(n: usize, seed: u64) -> Value {
    json!({
        "house": {"value": 300000.0, "size": 1500.0, "floor_rel_bfe": -4.0},
        "options": {"ensemble_size": n, "seed": seed}
    })
}

#[tokio::test]
async fn unavailable_until_artifacts_are_installed() {
    let state = AppState::new(Limits::default());
    for req in [get("/api/meta"), get("/api/hazard/summary"), post(&sample_request(10, 1))] {
        let (status, _, body) = call(&state, req).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        let v: Value = serde_json::from_slice(&body).unwrap();
        assert!(v["error"].as_str().unwrap().contains("not loaded"));
    }
}

#[tokio::test]
async fn analyze_matches_cli_report() {
    let state = loaded(Limits::default());
    let (status, _, body) = call(&state, post(&sample_request(SOWS, 9))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let v: Value = serde_json::from_slice(&body).unwrap();
    let cli: HouseReport =
        serde_json::from_str(&std::fs::read_to_string(fixture().join(commands::HOUSE_REPORT)).unwrap()).unwrap();
    let strategies: Vec<elevate_core::analysis::Strategy> = serde_json::from_value(v["strategies"].clone()).unwrap();
    assert_eq!(strategies, cli.strategies);
    assert_eq!(v["h_opt_considering"].as_f64().unwrap(), cli.h_opt_considering);
    assert_eq!(v["h_opt_ignoring"].as_f64().unwrap(), cli.h_opt_ignoring);
    assert_eq!(v["bfe"].as_f64().unwrap(), cli.bfe);
    assert_eq!(v["n_sows"], SOWS);
    assert_eq!(v["capped"], false);
    assert_eq!(v["out_of_range"], json!([]));
    let fema = strategies.iter().find(|s| s.kind == StrategyKind::Fema).unwrap();
    assert!((fema.upfront_usd - 144_495.0).abs() < 1e-6);
}

#[tokio::test]
async fn identical_requests_give_identical_bodies() {
    let state = loaded(Limits::default());
    let (_, h1, b1) = call(&state, post(&sample_request(150, 4))).await;
    let (_, _, b2) = call(&state, post(&sample_request(150, 4))).await;
    assert_eq!(b1, b2);
    assert!(h1.contains_key("x-elapsed-ms"));
    let (_, _, b3) = call(&state, post(&sample_request(150, 5))).await;
    assert_ne!(b1, b3);
}

#[tokio::test]
async fn surface_bands_contain_means() {
    let state = loaded(Limits::default());
    let (_, _, body) = call(&state, post(&sample_request(200, 2))).await;
    let v: Value = serde_json::from_slice(&body).unwrap();
    let grid = v["grid"].as_array().unwrap().len();
    let c = &v["considering"];
    for key in ["upfront", "total_mean", "total_q05", "total_q95", "reliability_mean", "bcr_mean"] {
        assert_eq!(c[key].as_array().unwrap().len(), grid, "{key}");
    }
    for i in 0..grid {
        let (lo, m, hi) = (c["total_q05"][i].as_f64().unwrap(), c["total_mean"][i].as_f64().unwrap(), c["total_q95"][i].as_f64().unwrap());
        assert!(lo <= m && m <= hi, "h index {i}: {lo} {m} {hi}");
        let (lo, m, hi) = (
            c["reliability_q05"][i].as_f64().unwrap(),
            c["reliability_mean"][i].as_f64().unwrap(),
            c["reliability_q95"][i].as_f64().unwrap(),
        );
        assert!(lo <= m + 1e-12 && m <= hi + 1e-12);
        assert!(c["total_mc_halfwidth"][i].as_f64().unwrap() >= 0.0);
    }
    let front = v["pareto_front"].as_array().unwrap();
    assert!(!front.is_empty());
    assert_eq!(front[0]["h"].as_f64().unwrap(), 0.0);
    assert_eq!(v["robustness"].as_array().unwrap().len(), grid);
}

#[tokio::test]
async fn ensemble_is_capped_and_flagged() {
    let state = loaded(Limits {
        default_sows: 50,
        max_sows: 120,
    });
    let (_, _, body) = call(&state, post(&sample_request(5000, 1))).await;
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["capped"], true);
    assert_eq!(v["requested_sows"], 5000);
    assert_eq!(v["n_sows"], 120);

    let req = json!({"house": {"value": 1e5, "size": 1000.0, "floor_rel_bfe": -2.0}, "options": {"seed": 3}});
    let (_, _, body) = call(&state, post(&req)).await;
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["n_sows"], 50);
    assert_eq!(v["capped"], false);
}

#[tokio::test]
async fn house_far_above_flood_levels_is_left_alone() {
    let state = loaded(Limits::default());
    let req = json!({"house": {"value": 2e5, "size": 1500.0, "floor_rel_bfe": 40.0}, "options": {"seed": 1, "ensemble_size": 100}});
    let (status, _, body) = call(&state, post(&req)).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["h_opt_considering"].as_f64().unwrap(), 0.0);
    assert_eq!(v["h_opt_ignoring"].as_f64().unwrap(), 0.0);
    assert_eq!(v["out_of_range"], json!(["house.floor_rel_bfe"]));
}

#[tokio::test]
async fn invalid_requests_name_each_field() {
    let state = loaded(Limits::default());
    let req = json!({
        "house": {"value": -5.0, "size": "big", "floor_rel_bfe": -4.0},
        "options": {"mode": "sideways", "ensemble_size": 0}
    });
    let (status, _, body) = call(&state, post(&req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&body).unwrap();
    let fields: Vec<&str> = v["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    for f in ["house.value", "house.size", "options.mode", "options.ensemble_size", "options.seed"] {
        assert!(fields.contains(&f), "{f} missing from {fields:?}");
    }

    let (status, _, body) = call(&state, post(&json!({"options": {"seed": 1}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(String::from_utf8_lossy(&body).contains("\"house\""));

    let bad = Request::post("/api/analyze").body(Body::from("{not json")).unwrap();
    let (status, _, _) = call(&state, bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let req = json!({"house": {"value": 1e5, "size": 900.0, "floor_rel_bfe": -1.0},
                     "options": {"seed": 1, "ranges": {"bcr": {"min": 2.0, "max": 1.0}}}});
    let (status, _, body) = call(&state, post(&req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&body));
    assert!(String::from_utf8_lossy(&body).contains("options.ranges"));
}

#[tokio::test]
async fn scenario_and_mode_options() {
    let state = loaded(Limits::default());
    let req = json!({
        "house": {"value": 300000.0, "size": 1500.0, "floor_rel_bfe": -4.0},
        "options": {"seed": 1, "ensemble_size": 100, "mode": "ignoring",
                    "scenario": {"damage_model": "jrc", "discount_model": "random_walk"}}
    });
    let (status, _, body) = call(&state, post(&req)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["mode"], "ignoring");
    assert_eq!(v["scenario"]["damage_model"], "jrc");
    // under point assumptions every SOW satisfies or fails together
    for r in v["robustness"].as_array().unwrap() {
        let j = r["joint"].as_f64().unwrap();
        assert!(j == 0.0 || j == 1.0, "{j}");
    }
}

#[tokio::test]
async fn hazard_summary_matches_posterior() {
    let state = loaded(Limits::default());
    let (status, _, body) = call(&state, get("/api/hazard/summary")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    let post = GevPosterior::load(&fixture().join(commands::POSTERIOR)).unwrap();
    let levels = v["return_levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    for (row, t) in levels.iter().zip([10.0, 50.0, 100.0, 500.0]) {
        let s = post.return_level_summary(t).unwrap();
        assert_eq!(row["return_period"].as_f64().unwrap(), t);
        assert_eq!(row["map_level"].as_f64().unwrap(), s.map_level);
        assert_eq!(row["mean_level"].as_f64().unwrap(), s.mean_level);
        assert!(row["q05"].as_f64().unwrap() <= row["q95"].as_f64().unwrap());
    }
    // the base flood elevation is the 100-yr MAP level
    assert!((v["bfe"].as_f64().unwrap() - levels[2]["map_level"].as_f64().unwrap()).abs() < 1e-9);
}

#[tokio::test]
async fn meta_echoes_manifest() {
    let state = loaded(Limits::default());
    let (status, _, body) = call(&state, get("/api/meta")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(v["config_sha256"], manifest["config_sha256"]);
    assert_eq!(v["seeds"]["sow"], 9);
    assert_eq!(v["seeds"]["hazard"], 1);
    assert_eq!(v["posterior_samples"], 6000);
    assert_eq!(v["default_ensemble_size"], 2000);
    let stages: Vec<&str> = v["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["analyze", "fit-discount", "fit-hazard", "ingest"]);
}

#[tokio::test]
async fn cors_headers_are_sent() {
    let state = loaded(Limits::default());
    let req = Request::get("/api/meta")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = call(&state, req).await;
    assert!(headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
}

#[test]
fn load_reports_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let err = Artifacts::load(dir.path()).err().unwrap().to_string();
    assert!(err.contains("manifest.json"), "{err}");
}
