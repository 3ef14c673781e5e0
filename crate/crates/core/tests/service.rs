mod common;

use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use geosplit::report::sha256_hex;
use geosplit::service::{router, AppState, ProjectConfig};
use geosplit::split::{AssignMode, Region, RegionSet};
use geosplit::SetLabel;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const TS: &str = "2024-01-01T00:00:00Z";

fn rect(name: &str, set: SetLabel, priority: i64, x0: f64, x1: f64) -> Region {
    Region {
        name: name.into(),
        map_id: "m".into(),
        set,
        priority,
        polygon: vec![[x0, -5.0], [x1, -5.0], [x1, 200.0], [x0, 200.0]],
    }
}

fn stripes() -> RegionSet {
    RegionSet::new(vec![
        rect("west", SetLabel::Train, 0, -5.0, 135.0),
        rect("mid", SetLabel::Val, 1, 135.0, 165.0),
        rect("east", SetLabel::Test, 2, 165.0, 200.0),
    ])
}

fn setup(dir: &Path) -> Router {
    let ds = common::grid_dataset(20, 10.0, "m");
    let samples = dir.join("samples.jsonl");
    common::write_dataset(&ds, &samples);
    let config = ProjectConfig {
        id: "samples".into(),
        samples_sha256: sha256_hex(&std::fs::read(&samples).unwrap()),
        mode: AssignMode::PerSample,
        attribute_keys: Vec::new(),
        validation: Default::default(),
        export_dir: dir.join("export"),
        timestamp: Some(TS.into()),
    };
    let state = AppState::new(ds, RegionSet::default(), config).unwrap();
    router(state, None)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn put(app: &Router, base: u64, regions: &RegionSet) -> (StatusCode, Value) {
    let body = json!({ "base_revision": base, "regions": regions.regions }).to_string();
    call(app, Method::PUT, "/api/regions", Some(body)).await
}

async fn wait_done(app: &Router, revision: u64) -> Value {
    for _ in 0..500 {
        let (status, v) = call(app, Method::GET, &format!("/api/stats?revision={revision}"), None).await;
        assert_eq!(status, StatusCode::OK);
        match v["status"].as_str().unwrap() {
            "done" => return v["stats"].clone(),
            "pending" => tokio::time::sleep(Duration::from_millis(10)).await,
            other => panic!("unexpected status {other}"),
        }
    }
    panic!("stats for revision {revision} never finished");
}

#[tokio::test(flavor = "multi_thread")]
async fn project_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let (status, p) = call(&app, Method::GET, "/api/project", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["samples"], 400);
    assert_eq!(p["revision"], 0);
    assert_eq!(p["maps"]["m"], 400);
    assert_eq!(p["counts"]["unassigned"], 400);

    let (status, s) = call(&app, Method::GET, "/api/samples?map_id=m", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["points"].as_array().unwrap().len(), 400);
    assert_eq!(s["cell_size"], 0.0);

    let (status, s) = call(&app, Method::GET, "/api/samples?map_id=m&max_points=37", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["total"], 400);
    let n = s["points"].as_array().unwrap().len();
    assert!(n > 0 && n <= 37, "{n}");

    let (status, _) = call(&app, Method::GET, "/api/samples?map_id=nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/api/samples?map_id=m&max_points=0", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn region_edits_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());

    let (status, _) = call(&app, Method::PUT, "/api/regions", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut bowtie = rect("bow", SetLabel::Train, 0, 0.0, 10.0);
    bowtie.polygon = vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
    let (status, e) = put(&app, 0, &RegionSet::new(vec![bowtie])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(e["error"].is_string());
    let (status, _) = put(&app, 3, &stripes()).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let all_train = RegionSet::new(vec![rect("all", SetLabel::Train, 0, -5.0, 200.0)]);
    let (status, v) = put(&app, 0, &all_train).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 1);
    let stats = wait_done(&app, 1).await;
    assert_eq!(stats["proportions"]["train"], 1.0);
    assert_eq!(stats["proportions"]["val"], 0.0);
    assert_eq!(stats["proportions"]["test"], 0.0);

    let (status, _) = put(&app, 0, &stripes()).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, v) = put(&app, 1, &stripes()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 2);

    let (_, old) = call(&app, Method::GET, "/api/stats?revision=1", None).await;
    assert_eq!(old["status"], "superseded");
    assert_eq!(old["current_revision"], 2);
    let (status, _) = call(&app, Method::GET, "/api/stats?revision=9", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let stats = wait_done(&app, 2).await;
    assert_eq!(stats["counts"]["train"], 280);
    assert_eq!(stats["counts"]["val"], 60);
    assert_eq!(stats["counts"]["test"], 60);
    assert_eq!(stats["cut_sequences"], 20);
    assert_eq!(stats["leakage"]["val"], 0.0);

    let (_, r) = call(&app, Method::GET, "/api/regions", None).await;
    assert_eq!(r["revision"], 2);
    assert_eq!(r["regions"].as_array().unwrap().len(), 3);
    let (_, s) = call(&app, Method::GET, "/api/samples?map_id=m", None).await;
    let east = s["points"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["x"].as_f64().unwrap() > 165.0);
    assert!(east.into_iter().all(|p| p["set"] == "test"));
}

#[tokio::test(flavor = "multi_thread")]
async fn export_matches_cli_assign() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let (status, _) = put(&app, 0, &stripes()).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = call(&app, Method::POST, "/api/export", None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["revision"], 1);

    let regions = dir.path().join("regions.json");
    std::fs::write(&regions, stripes().to_json()).unwrap();
    let out = common::run_cli(
        &[
            "--timestamp",
            TS,
            "assign",
            "--samples",
            "samples.jsonl",
            "--regions",
            "regions.json",
            "--out-dir",
            "cli",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["split.csv", "manifest.json", "cuts.json"] {
        let a = std::fs::read(dir.path().join("export").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("cli").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let exported = std::fs::read(dir.path().join("export/regions.json")).unwrap();
    assert_eq!(exported, std::fs::read(&regions).unwrap());
    let split = std::fs::read(dir.path().join("export/split.csv")).unwrap();
    assert_eq!(v["split_sha256"], sha256_hex(&split));
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_puts_one_wins() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let all_train = RegionSet::new(vec![rect("all", SetLabel::Train, 0, -5.0, 200.0)]);
    let stripes = stripes();
    let (a, b) = tokio::join!(put(&app, 0, &all_train), put(&app, 0, &stripes));
    let mut codes = [a.0, b.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    let (_, p) = call(&app, Method::GET, "/api/project", None).await;
    assert_eq!(p["revision"], 1);
}
