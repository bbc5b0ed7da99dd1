use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;
use uxprop::pipeline::{load_scene_input, SceneInput};
use uxprop::service::{router, AppState, DIGEST_HEADER};
use uxprop::RunConfig;
use uxprop_core::export::{read_grid, Sidecar};
use uxprop_core::geometry::Point2;
use uxprop_core::scene::{write_scene, Building, Scene};

struct Reply {
    status: StatusCode,
    digest: Option<String>,
    content_type: Option<String>,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).expect("json body")
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let (status, digest, content_type) = {
        let header = |k: &str| resp.headers().get(k).map(|v| v.to_str().unwrap().to_string());
        (resp.status(), header(DIGEST_HEADER), header("content-type"))
    };
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    Reply {
        status,
        digest,
        content_type,
        bytes,
    }
}

fn city(dir: &Path) -> std::path::PathBuf {
    let mut b = vec![
        Building::rectangle("a", Point2::new(20.0, -10.0), Point2::new(40.0, 10.0), 25.0),
        Building::rectangle("b", Point2::new(-60.0, 30.0), Point2::new(-30.0, 55.0), 18.0),
        Building::rectangle("c", Point2::new(-20.0, -70.0), Point2::new(10.0, -45.0), 40.0),
    ];
    b.push(Building::rectangle("sw", Point2::new(-200.0, -200.0), Point2::new(-198.0, -198.0), 3.0));
    b.push(Building::rectangle("ne", Point2::new(198.0, 198.0), Point2::new(200.0, 200.0), 3.0));
    let path = dir.join("city.geojson");
    write_scene(&Scene::new(b, None).unwrap(), &path, "height").unwrap();
    path
}

fn app_with(base: RunConfig) -> Router {
    let scene = load_scene_input(&base).unwrap();
    router(Arc::new(AppState::new(base, scene)))
}

fn city_app(dir: &Path) -> (Router, RunConfig) {
    let base = RunConfig {
        scene: Some(city(dir)),
        metric: true,
        ..RunConfig::default()
    };
    (app_with(base.clone()), base)
}

fn open_app() -> Router {
    router(Arc::new(AppState::new(RunConfig::default(), SceneInput::open())))
}

#[tokio::test]
async fn altitude_below_receiver_is_rejected_by_name() {
    let app = open_app();
    let r = call(&app, "POST", "/losmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 1.0}}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["field"], "altitude_m");
    let r = call(&app, "POST", "/losmap", Some(json!({"resolution_m": 1}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["field"], "tx");
    let r = call(&app, "POST", "/losmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 30}, "resolution_m": 0}))).await;
    assert_eq!(r.json()["error"]["field"], "resolution_m");
}

#[tokio::test]
async fn identical_chanmap_requests_share_an_artifact() {
    let app = open_app();
    let body = json!({"tx": {"x": 0, "y": 0, "altitude_m": 60}, "radius_m": 40, "seed": 7});
    let a = call(&app, "POST", "/chanmap", Some(body.clone())).await;
    let b = call(&app, "POST", "/chanmap", Some(body)).await;
    assert_eq!(a.status, StatusCode::OK);
    let (ja, jb) = (a.json(), b.json());
    assert_eq!(ja["artifact_id"], jb["artifact_id"]);
    assert_eq!((ja["cached"].as_bool(), jb["cached"].as_bool()), (Some(false), Some(true)));
    assert_eq!(a.digest.as_deref(), ja["config_digest"].as_str());
    assert_eq!(a.digest, b.digest);
    let c = call(&app, "POST", "/chanmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 60}, "radius_m": 40, "seed": 8}))).await;
    assert_ne!(c.json()["artifact_id"], ja["artifact_id"]);
}

#[tokio::test]
async fn default_params_document() {
    let r = call(&open_app(), "GET", "/params/default", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.digest.is_some());
    let p = &r.json()["params"];
    assert_eq!(p["los_beta"], 1.96);
    assert_eq!(p["nlos_ple"], json!({"p1": 2.91, "p2": 4.53, "p3": 26.4}));
    assert_eq!(p["nlos_sigma_db"], json!({"p1": 16.1, "p2": 20.0, "p3": 23.0}));
    assert_eq!(p["nlos_beta"], 1.91);
}

#[tokio::test]
async fn unknown_artifacts_are_404() {
    let app = open_app();
    for uri in ["/map/0123456789abcdef.png", "/map/nope/meta", "/map/nope/raw"] {
        let r = call(&app, "GET", uri, None).await;
        assert_eq!(r.status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(r.json()["error"]["code"], "not_found");
    }
    let r = call(&app, "POST", "/route", Some(json!({"artifact_id": "nope", "waypoints": [[0, 0], [1, 1]]}))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn oversized_grid_is_413() {
    let app = app_with(RunConfig {
        max_cells: 10_000,
        ..RunConfig::default()
    });
    let r = call(&app, "POST", "/losmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 30}, "radius_m": 100}))).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(r.json()["error"]["code"], "grid_too_large");
}

#[tokio::test]
async fn scene_summary_and_footprints() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = city_app(dir.path());
    let r = call(&app, "GET", "/scene/summary", None).await;
    let j = r.json();
    assert_eq!(j["buildings"], 5);
    assert_eq!(j["bounds"], json!({"min_x": -200.0, "min_y": -200.0, "max_x": 200.0, "max_y": 200.0}));
    assert!(j.get("footprints").is_none());
    let r = call(&app, "GET", "/scene/summary?include=footprints", None).await;
    assert_eq!(r.json()["footprints"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn map_images_and_route_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = city_app(dir.path());
    let l = call(&app, "POST", "/losmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 40}, "radius_m": 100}))).await;
    let lj = l.json();
    let lid = lj["artifact_id"].as_str().unwrap().to_string();
    let p_los = lj["summary"]["p_los"].as_f64().unwrap();
    assert!(p_los > 0.5 && p_los < 1.0);

    let png = call(&app, "GET", &format!("/map/{lid}.png"), None).await;
    assert_eq!(png.status, StatusCode::OK);
    assert_eq!(png.content_type.as_deref(), Some("image/png"));
    assert_eq!(&png.bytes[1..4], b"PNG");

    let waypoints = json!([[-90, 60], [90, 0], [0, -90]]);
    let r = call(&app, "POST", "/route", Some(json!({"artifact_id": lid, "waypoints": waypoints}))).await;
    assert_eq!(r.status, StatusCode::OK);
    let rj = r.json();
    assert!(rj["stats"]["outage"].as_array().unwrap().is_empty());
    assert!(rj["trace"].as_array().unwrap().len() > 100);
    let r = call(&app, "POST", "/route", Some(json!({"artifact_id": lid, "waypoints": waypoints, "eirp_dbm": 23}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["field"], "artifact_id");

    let c = call(&app, "POST", "/chanmap", Some(json!({"tx": {"x": 0, "y": 0, "altitude_m": 40}, "radius_m": 100, "seed": 2}))).await;
    let cid = c.json()["artifact_id"].as_str().unwrap().to_string();
    let r = call(
        &app,
        "POST",
        "/route",
        Some(json!({"artifact_id": cid, "waypoints": waypoints, "eirps_dbm": [13, 23], "sensitivity_dbm": -84.7})),
    )
    .await;
    let rj = r.json();
    assert_eq!(r.digest.as_deref(), rj["config_digest"].as_str());
    let o = rj["stats"]["outage"].as_array().unwrap();
    assert!(o[1]["p_outage"].as_f64().unwrap() <= o[0]["p_outage"].as_f64().unwrap());
    assert!(rj["trace"][0]["attenuation_db"].is_number());

    let outage = call(&app, "GET", &format!("/map/{cid}.png?layer=outage&eirp_dbm=13"), None).await;
    let total = call(&app, "GET", &format!("/map/{cid}.png?layer=total"), None).await;
    assert_eq!(outage.status, StatusCode::OK);
    assert_ne!(outage.bytes, total.bytes);
    let bad = call(&app, "GET", &format!("/map/{lid}.png?layer=outage"), None).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);

    let r = call(&app, "POST", "/route", Some(json!({"artifact_id": cid, "waypoints": [[0, 0], [500, 0]]}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["field"], "waypoints");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let app = open_app();
    let body = json!({"tx": {"x": 10, "y": 0, "altitude_m": 80}, "radius_m": 60, "seed": 1});
    let tasks: Vec<_> = (0..6)
        .map(|_| {
            let (app, body) = (app.clone(), body.clone());
            tokio::spawn(async move { call(&app, "POST", "/chanmap", Some(body)).await.json()["artifact_id"].clone() })
        })
        .collect();
    let mut ids = Vec::new();
    for t in tasks {
        ids.push(t.await.unwrap());
    }
    assert!(ids.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn service_and_cli_produce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (app, base) = city_app(dir.path());
    let r = call(
        &app,
        "POST",
        "/chanmap",
        Some(json!({"tx": {"x": 5, "y": -5, "altitude_m": 55}, "radius_m": 90, "seed": 31})),
    )
    .await;
    let rj = r.json();
    let id = rj["artifact_id"].as_str().unwrap();
    let meta = call(&app, "GET", &format!("/map/{id}/meta"), None).await.json();
    let sidecars: Vec<Sidecar> = serde_json::from_value(meta["sidecars"].clone()).unwrap();

    let out = dir.path().join("cli");
    let scene = base.scene.unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_uxprop"))
        .env_remove("UXPROP_SEED")
        .args(["chanmap", "--metric", "--tx", "5,-5,55", "--radius-m", "90", "--seed", "31", "--scene"])
        .arg(&scene)
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(report["config_digest"], rj["config_digest"]);
    assert_eq!(sidecars.len(), 5);
    for sc in &sidecars {
        let name = sc.layer.name();
        let cli = read_grid(&out.join(name)).unwrap();
        assert_eq!(&cli.sidecar, sc, "{name}");
        let raw = call(&app, "GET", &format!("/map/{id}/raw?layer={name}"), None).await;
        assert_eq!(raw.bytes, std::fs::read(out.join(format!("{name}.{}", sc.dtype.extension()))).unwrap());
        let png = call(&app, "GET", &format!("/map/{id}.png?layer={name}"), None).await;
        assert_eq!(png.bytes, std::fs::read(out.join(format!("{name}.png"))).unwrap());
    }
}
