//! HTTP interface used by the planner front end.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/scene/summary` | loaded scene (`?include=footprints`) |
//! | GET | `/params/default` | default channel parameters |
//! | POST | `/losmap` | compute a LOS map |
//! | POST | `/chanmap` | compute LOS + channel layers |
//! | GET | `/map/{id}.png` | PNG of a layer (`?layer=`, or `layer=outage&eirp_dbm=`) |
//! | GET | `/map/{id}/meta` | sidecars of every layer |
//! | GET | `/map/{id}/raw` | little-endian payload (`?layer=`) |
//! | POST | `/route` | route statistics on a computed map |
//!
//! A map id is `l` (LOS only) or `c` (with channel layers) followed by the
//! first 15 hex digits of the config digest, so repeating a request returns
//! the cached artifact.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uxprop_core::channel::{ChannelMap, ChannelParams};
use uxprop_core::export::{render_png_bytes, GridArtifact, LayerKind, Palette, RenderStyle, MASK_COLOR};
use uxprop_core::geometry::Point2;
use uxprop_core::route::{outage_threshold_db, Route, RouteError, RouteTrace, SegmentStats};
use uxprop_core::visibility::LosMap;

use crate::config::{config_from_value, serde_field, set_path, RunConfig, TxSpec};
use crate::error::CliError;
use crate::pipeline::{chanmap_artifacts, evaluate_route, run_chanmap, run_losmap, MapSummary, SceneInput};

pub const DIGEST_HEADER: &str = "x-config-digest";
pub const DEFAULT_CACHE_ENTRIES: usize = 16;

struct Entry {
    digest: String,
    summary: MapSummary,
    los: LosMap,
    chan: Option<ChannelMap>,
    artifacts: Vec<GridArtifact>,
}

/// Bounded artifact cache, least recently used evicted first.
struct Store {
    cap: usize,
    entries: IndexMap<String, Arc<Entry>>,
}

impl Store {
    fn get(&mut self, id: &str) -> Option<Arc<Entry>> {
        let i = self.entries.get_index_of(id)?;
        let last = self.entries.len() - 1;
        self.entries.move_index(i, last);
        self.entries.get(id).cloned()
    }

    fn insert(&mut self, id: String, e: Arc<Entry>) {
        self.entries.shift_remove(&id);
        while self.entries.len() >= self.cap {
            self.entries.shift_remove_index(0);
        }
        self.entries.insert(id, e);
    }
}

pub struct AppState {
    base: RunConfig,
    scene: SceneInput,
    store: Mutex<Store>,
}

impl AppState {
    pub fn new(base: RunConfig, scene: SceneInput) -> Self {
        Self::with_capacity(base, scene, DEFAULT_CACHE_ENTRIES)
    }

    pub fn with_capacity(base: RunConfig, scene: SceneInput, cap: usize) -> Self {
        Self {
            base,
            scene,
            store: Mutex::new(Store {
                cap: cap.max(1),
                entries: IndexMap::new(),
            }),
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Entry>, CliError> {
        let id = id.strip_suffix(".png").unwrap_or(id);
        self.store
            .lock()
            .expect("store lock")
            .get(id)
            .ok_or_else(|| CliError::NotFound(id.to_string()))
    }
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/scene/summary", get(scene_summary))
        .route("/params/default", get(params_default))
        .route("/losmap", post(losmap))
        .route("/chanmap", post(chanmap))
        .route("/map/{id}", get(map_png))
        .route("/map/{id}/meta", get(map_meta))
        .route("/map/{id}/raw", get(map_raw))
        .route("/route", post(route))
        .with_state(state)
}

pub async fn serve(addr: &str, state: Shared) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(crate::error::io_error(addr))?;
    eprintln!("listening on {}", listener.local_addr().map_err(crate::error::io_error(addr))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(crate::error::io_error(addr))
}

impl IntoResponse for CliError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(json!({ "error": self.body() }))).into_response()
    }
}

fn with_digest(mut r: Response, digest: &str) -> Response {
    if let Ok(v) = HeaderValue::from_str(digest) {
        r.headers_mut().insert(DIGEST_HEADER, v);
    }
    r
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, CliError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| CliError::config("body", e.to_string()))?;
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        CliError::config(serde_field(&msg), msg)
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, CliError> + Send + 'static) -> Result<T, CliError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(CliError::config("request", format!("worker failed: {e}"))))
}

#[derive(Debug, Deserialize)]
struct SummaryQuery {
    /// `footprints` adds the building polygons for map underlays.
    include: Option<String>,
}

async fn scene_summary(State(st): State<Shared>, Query(q): Query<SummaryQuery>) -> Response {
    let s = &st.scene.scene;
    let digest = st.base.digest(&st.scene.sha256);
    let mut body = json!({
        "buildings": s.buildings().len(),
        "bounds": (!s.is_empty()).then(|| s.bounds()),
        "max_building_height_m": s.max_building_height(),
        "projection": s.metadata.projection,
        "height_reference": s.metadata.height_reference,
        "scene_sha256": st.scene.sha256,
        "load_report": st.scene.report,
        "config_digest": digest,
    });
    if q.include.as_deref() == Some("footprints") {
        body["footprints"] = json!(s
            .buildings()
            .iter()
            .map(|b| json!({ "id": b.id, "height_m": b.height_m, "ring": b.footprint }))
            .collect::<Vec<_>>());
    }
    with_digest(Json(body).into_response(), &digest)
}

async fn params_default() -> Response {
    let p = ChannelParams::default();
    let digest = p.digest();
    with_digest(Json(json!({ "params": p, "params_digest": digest })).into_response(), &digest)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LosRequest {
    tx: TxSpec,
    resolution_m: Option<f64>,
    radius_m: Option<f64>,
    ue_height_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChanRequest {
    tx: TxSpec,
    resolution_m: Option<f64>,
    radius_m: Option<f64>,
    ue_height_m: Option<f64>,
    seed: Option<u64>,
    carrier_hz: Option<f64>,
    /// Partial parameter set merged over the defaults.
    params: Option<Value>,
    no_fading: Option<bool>,
}

/// Request fields laid over the service's base configuration.
fn request_config(base: &RunConfig, sets: Vec<(&str, Option<Value>)>) -> Result<RunConfig, CliError> {
    let mut v = serde_json::to_value(base).expect("config serializes");
    for (k, val) in sets {
        if let Some(val) = val {
            set_path(&mut v, k, val)?;
        }
    }
    config_from_value(v)
}

fn to_value<T: Serialize>(v: &T) -> Option<Value> {
    Some(serde_json::to_value(v).expect("serializes"))
}

#[derive(Debug, Serialize)]
struct MapResponse {
    artifact_id: String,
    config_digest: String,
    cached: bool,
    layers: Vec<LayerKind>,
    summary: MapSummary,
    seed: Option<u64>,
    params_digest: Option<String>,
}

fn map_response(id: &str, e: &Entry, cached: bool) -> Response {
    let body = MapResponse {
        artifact_id: id.to_string(),
        config_digest: e.digest.clone(),
        cached,
        layers: e.artifacts.iter().map(|a| a.sidecar.layer).collect(),
        summary: e.summary.clone(),
        seed: e.chan.as_ref().map(|c| c.seed),
        params_digest: e.chan.as_ref().map(|c| c.params.digest()),
    };
    with_digest(Json(body).into_response(), &e.digest)
}

async fn compute_map(st: Shared, cfg: RunConfig, with_channel: bool) -> Result<Response, CliError> {
    let digest = cfg.digest(&st.scene.sha256);
    let id = format!("{}{}", if with_channel { "c" } else { "l" }, &digest[..15]);
    if let Some(e) = st.store.lock().expect("store lock").get(&id) {
        return Ok(map_response(&id, &e, true));
    }
    let st2 = st.clone();
    let entry = blocking(move || {
        let (area, los) = run_losmap(&cfg, &st2.scene)?;
        let chan = if with_channel { Some(run_chanmap(&cfg, &los)?) } else { None };
        let artifacts = match &chan {
            Some(c) => chanmap_artifacts(&los, c),
            None => vec![GridArtifact::from_los_map(&los)],
        };
        Ok(Entry {
            digest,
            summary: MapSummary::new(&area, &los),
            los,
            chan,
            artifacts,
        })
    })
    .await?;
    let entry = Arc::new(entry);
    st.store.lock().expect("store lock").insert(id.clone(), entry.clone());
    Ok(map_response(&id, &entry, false))
}

async fn losmap(State(st): State<Shared>, body: Bytes) -> Result<Response, CliError> {
    let r: LosRequest = parse_body(&body)?;
    let cfg = request_config(
        &st.base,
        vec![
            ("tx", to_value(&r.tx)),
            ("resolution_m", r.resolution_m.map(Value::from)),
            ("coverage_radius_m", r.radius_m.map(Value::from)),
            ("ue_height_m", r.ue_height_m.map(Value::from)),
        ],
    )?;
    compute_map(st, cfg, false).await
}

async fn chanmap(State(st): State<Shared>, body: Bytes) -> Result<Response, CliError> {
    let r: ChanRequest = parse_body(&body)?;
    let mut sets = vec![
        ("tx", to_value(&r.tx)),
        ("resolution_m", r.resolution_m.map(Value::from)),
        ("coverage_radius_m", r.radius_m.map(Value::from)),
        ("ue_height_m", r.ue_height_m.map(Value::from)),
        ("seed", r.seed.map(Value::from)),
        ("carrier_hz", r.carrier_hz.map(Value::from)),
        ("no_fading", r.no_fading.map(Value::from)),
    ];
    let mut param_sets = Vec::new();
    if let Some(p) = r.params {
        let Value::Object(m) = p else {
            return Err(CliError::config("params", "must be an object"));
        };
        for (k, v) in m {
            param_sets.push((format!("params.{k}"), v));
        }
    }
    for (k, v) in &param_sets {
        sets.push((k.as_str(), Some(v.clone())));
    }
    let cfg = request_config(&st.base, sets)?;
    compute_map(st, cfg, true).await
}

#[derive(Debug, Deserialize)]
struct LayerQuery {
    layer: Option<String>,
    /// With `layer=outage`: EIRP and sensitivity for the threshold.
    eirp_dbm: Option<f64>,
    sensitivity_dbm: Option<f64>,
}

pub const OUTAGE_LAYER: &str = "outage";

fn pick_layer<'a>(e: &'a Entry, q: &LayerQuery) -> Result<&'a GridArtifact, CliError> {
    match &q.layer {
        None => Ok(e.artifacts.last().expect("entry has layers")),
        Some(name) => e
            .artifacts
            .iter()
            .find(|a| a.sidecar.layer.name() == name)
            .ok_or_else(|| CliError::NotFound(format!("layer {name}"))),
    }
}

async fn map_png(State(st): State<Shared>, Path(id): Path<String>, Query(q): Query<LayerQuery>) -> Result<Response, CliError> {
    let e = st.lookup(&id)?;
    let png = if q.layer.as_deref() == Some(OUTAGE_LAYER) {
        let total = e
            .artifacts
            .iter()
            .find(|a| a.sidecar.layer == LayerKind::Total)
            .ok_or(CliError::Route(RouteError::MissingChannelLayer))?;
        let eirp = q.eirp_dbm.or(st.base.eirps_dbm.first().copied()).ok_or(CliError::Missing("eirp_dbm"))?;
        let sens = q.sensitivity_dbm.unwrap_or(st.base.sensitivity_dbm);
        let style = RenderStyle {
            palette: Palette::Threshold {
                threshold_db: outage_threshold_db(eirp, sens),
            },
            mask_color: MASK_COLOR,
        };
        render_png_bytes(total, &style)?
    } else {
        let a = pick_layer(&e, &q)?;
        render_png_bytes(a, &RenderStyle::for_layer(a.sidecar.layer))?
    };
    let r = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
    Ok(with_digest(r, &e.digest))
}

async fn map_meta(State(st): State<Shared>, Path(id): Path<String>) -> Result<Response, CliError> {
    let e = st.lookup(&id)?;
    let body = json!({
        "artifact_id": id,
        "config_digest": e.digest,
        "summary": e.summary,
        "sidecars": e.artifacts.iter().map(|a| &a.sidecar).collect::<Vec<_>>(),
    });
    Ok(with_digest(Json(body).into_response(), &e.digest))
}

async fn map_raw(State(st): State<Shared>, Path(id): Path<String>, Query(q): Query<LayerQuery>) -> Result<Response, CliError> {
    let e = st.lookup(&id)?;
    let a = pick_layer(&e, &q)?;
    let r = ([(header::CONTENT_TYPE, "application/octet-stream")], a.data.to_le_bytes()).into_response();
    Ok(with_digest(r, &e.digest))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteRequest {
    artifact_id: String,
    waypoints: Vec<[f64; 2]>,
    eirp_dbm: Option<f64>,
    eirps_dbm: Option<Vec<f64>>,
    sensitivity_dbm: Option<f64>,
    step_m: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    s: f64,
    x: f64,
    y: f64,
    state: &'static str,
    attenuation_db: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RouteResponse {
    artifact_id: String,
    config_digest: String,
    length_m: f64,
    step_m: f64,
    stats: SegmentStats,
    warnings: Vec<String>,
    trace: Vec<TraceRow>,
}

fn trace_rows(t: &RouteTrace) -> Vec<TraceRow> {
    t.samples
        .iter()
        .map(|s| TraceRow {
            s: s.arc_s,
            x: s.position.x,
            y: s.position.y,
            state: s.state.label(),
            attenuation_db: s.attenuation_db,
        })
        .collect()
}

async fn route(State(st): State<Shared>, body: Bytes) -> Result<Response, CliError> {
    let r: RouteRequest = parse_body(&body)?;
    let e = st.lookup(&r.artifact_id)?;
    let explicit = r.eirp_dbm.is_some() || r.eirps_dbm.is_some();
    if explicit && e.chan.is_none() {
        return Err(CliError::Route(RouteError::MissingChannelLayer));
    }
    let eirps = match (r.eirp_dbm, r.eirps_dbm) {
        (Some(a), Some(mut v)) => {
            v.insert(0, a);
            v
        }
        (Some(a), None) => vec![a],
        (None, Some(v)) => v,
        (None, None) => st.base.eirps_dbm.clone(),
    };
    if eirps.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config("eirp_dbm", "must be finite"));
    }
    let sens = r.sensitivity_dbm.unwrap_or(st.base.sensitivity_dbm);
    if !sens.is_finite() {
        return Err(CliError::config("sensitivity_dbm", "must be finite"));
    }
    let step = r.step_m.unwrap_or(st.base.step_m);
    let pts: Vec<Point2> = r.waypoints.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let id = r.artifact_id.clone();
    let resp = blocking(move || {
        let route = Route::new(pts)?;
        let (trace, stats) = evaluate_route(&route, step, &e.los, e.chan.as_ref(), &eirps, sens)?;
        Ok(RouteResponse {
            artifact_id: id,
            config_digest: e.digest.clone(),
            length_m: trace.length_m,
            step_m: trace.step_m,
            stats,
            warnings: trace.warnings.clone(),
            trace: trace_rows(&trace),
        })
    })
    .await?;
    let digest = resp.config_digest.clone();
    Ok(with_digest(Json(resp).into_response(), &digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tag: &str) -> Arc<Entry> {
        let scene = uxprop_core::Scene::open_terrain(uxprop_core::Rect::new(0.0, 0.0, 4.0, 4.0));
        let tx = uxprop_core::TxConfig::new(Point2::new(2.0, 2.0), 10.0, 1.5);
        let los = uxprop_core::visibility::compute_los_map(&scene, &tx, 1.0, &scene.bounds()).unwrap();
        Arc::new(Entry {
            digest: tag.into(),
            summary: MapSummary::new(&scene, &los),
            artifacts: vec![GridArtifact::from_los_map(&los)],
            los,
            chan: None,
        })
    }

    #[test]
    fn store_evicts_least_recently_used() {
        let mut s = Store {
            cap: 2,
            entries: IndexMap::new(),
        };
        s.insert("a".into(), entry("a"));
        s.insert("b".into(), entry("b"));
        assert!(s.get("a").is_some());
        s.insert("c".into(), entry("c"));
        assert!(s.get("b").is_none());
        assert!(s.get("a").is_some() && s.get("c").is_some());
    }
}
