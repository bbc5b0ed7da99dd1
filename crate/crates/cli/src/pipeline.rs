//! Shared compute path behind both the command line and the service.

use std::path::Path;

use serde::Serialize;
use uxprop_core::campaign::{batch_campaign, CampaignReport};
use uxprop_core::channel::{compose_channel_map_with, ChannelMap, ChannelOptions, ChannelWarning};
use uxprop_core::export::{
    render_png, write_cdf_csv, write_csv_file, write_grid, write_json, write_segments_csv, write_trace_csv,
    GridArtifact, RenderStyle,
};
use uxprop_core::geometry::Rect;
use uxprop_core::route::{
    route_from_csv, route_from_geojson, sample_route, segment_stats, Route, RouteTrace, SegmentStats,
};
use uxprop_core::scene::{crop_scene, parse_scene, CropInfo, LoadOptions, LoadReport, Projection, Scene};
use uxprop_core::visibility::{compute_los_map_with, LosMap, LosOptions, TxConfig};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{io_error, CliError};

/// A loaded scene plus the content hash that enters config digests.
#[derive(Debug, Clone)]
pub struct SceneInput {
    pub scene: Scene,
    pub sha256: String,
    pub report: Option<LoadReport>,
}

impl SceneInput {
    /// No buildings anywhere.
    pub fn open() -> Self {
        Self {
            scene: Scene::open_terrain(Rect::new(0.0, 0.0, 0.0, 0.0)),
            sha256: sha256_hex(b""),
            report: None,
        }
    }
}

pub fn load_scene_input(cfg: &RunConfig) -> Result<SceneInput, CliError> {
    let Some(path) = &cfg.scene else {
        return Ok(SceneInput::open());
    };
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Scene(uxprop_core::scene::SceneError::FileNotFound { path: path.clone() })
        } else {
            io_error(path.display())(e)
        }
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let opts = LoadOptions {
        height_attr: cfg.height_attr.clone(),
        metric: cfg.metric,
        origin: None,
        allow_empty: true,
    };
    let (scene, report) = parse_scene(&text, &path.display().to_string(), &opts)?;
    Ok(SceneInput {
        scene,
        sha256: sha256_hex(&bytes),
        report: Some(report),
    })
}

/// The area a single-transmitter run covers: the scene cropped to the
/// coverage square around the transmitter, or open terrain when the scene
/// has no buildings.
pub fn prepare_area(scene: &Scene, tx: &TxConfig, radius_m: f64) -> Result<Scene, CliError> {
    if scene.is_empty() {
        let mut s = Scene::open_terrain(Rect::around(tx.position, radius_m));
        s.metadata.crop = Some(CropInfo {
            center: tx.position,
            radius_m,
            retained: 0,
            dropped: 0,
        });
        return Ok(s);
    }
    Ok(crop_scene(scene, tx.position, radius_m)?)
}

pub fn run_losmap(cfg: &RunConfig, input: &SceneInput) -> Result<(Scene, LosMap), CliError> {
    let tx = cfg.tx_config()?;
    tx.validate()?;
    let area = prepare_area(&input.scene, &tx, cfg.coverage_radius_m)?;
    let opts = LosOptions {
        max_cells: cfg.max_cells,
    };
    let map = compute_los_map_with(&area, &tx, cfg.resolution_m, &area.bounds(), &opts)?;
    Ok((area, map))
}

pub fn run_chanmap(cfg: &RunConfig, los: &LosMap) -> Result<ChannelMap, CliError> {
    let opts = ChannelOptions {
        no_fading: cfg.no_fading,
    };
    Ok(compose_channel_map_with(los, &cfg.effective_params(), cfg.seed, opts)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary {
    pub width: usize,
    pub height: usize,
    pub resolution_m: f64,
    pub extent: Rect,
    pub tx: TxConfig,
    pub los_cells: usize,
    pub nlos_cells: usize,
    pub building_cells: usize,
    /// LOS share of accessible (non-building) cells.
    pub p_los: Option<f64>,
    pub p_nlos: Option<f64>,
    pub buildings_in_area: usize,
}

impl MapSummary {
    pub fn new(area: &Scene, map: &LosMap) -> Self {
        let (l, n, b) = map.counts();
        let acc = l + n;
        let frac = |k: usize| (acc > 0).then(|| k as f64 / acc as f64);
        Self {
            width: map.width,
            height: map.height,
            resolution_m: map.resolution_m,
            extent: map.extent(),
            tx: map.tx,
            los_cells: l,
            nlos_cells: n,
            building_cells: b,
            p_los: frac(l),
            p_nlos: frac(n),
            buildings_in_area: area.buildings().len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactFiles {
    pub layer: String,
    pub payload: String,
    pub sidecar: String,
    pub png: String,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapReport {
    pub command: &'static str,
    pub config_digest: String,
    pub scene_sha256: String,
    pub seed: Option<u64>,
    pub params_digest: Option<String>,
    pub summary: MapSummary,
    pub artifacts: Vec<ArtifactFiles>,
    pub scene_load: Option<LoadReport>,
    pub scene_warnings: Vec<String>,
    pub channel_warnings: Vec<ChannelWarning>,
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir.display()))
}

/// Write each grid as payload + sidecar + PNG into `dir`.
pub fn write_artifacts(dir: &Path, artifacts: &[GridArtifact]) -> Result<Vec<ArtifactFiles>, CliError> {
    create_dir(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let name = a.sidecar.layer.name();
            let (payload, sidecar) = write_grid(a, dir, name)?;
            let png = dir.join(format!("{name}.png"));
            render_png(a, &RenderStyle::for_layer(a.sidecar.layer), &png)?;
            Ok(ArtifactFiles {
                layer: name.to_string(),
                payload: file_name(&payload),
                sidecar: file_name(&sidecar),
                png: file_name(&png),
                payload_sha256: a.sidecar.payload_sha256.clone(),
            })
        })
        .collect()
}

pub fn cmd_losmap(cfg: &RunConfig, input: &SceneInput) -> Result<MapReport, CliError> {
    let (area, map) = run_losmap(cfg, input)?;
    let artifacts = write_artifacts(&cfg.output_dir, &[GridArtifact::from_los_map(&map)])?;
    let report = MapReport {
        command: "losmap",
        config_digest: cfg.digest(&input.sha256),
        scene_sha256: input.sha256.clone(),
        seed: None,
        params_digest: None,
        summary: MapSummary::new(&area, &map),
        artifacts,
        scene_load: input.report.clone(),
        scene_warnings: area.metadata.warnings.clone(),
        channel_warnings: Vec::new(),
    };
    write_json(&cfg.output_dir.join("losmap_report.json"), &report)?;
    Ok(report)
}

/// The state layer plus the four attenuation layers. Every sidecar carries
/// the seed and parameter digest of the channel run.
pub fn chanmap_artifacts(los: &LosMap, chan: &ChannelMap) -> Vec<GridArtifact> {
    let mut states = GridArtifact::from_los_map(los);
    states.sidecar.seed = Some(chan.seed);
    states.sidecar.params_digest = Some(chan.params.digest());
    states.sidecar.params = Some(chan.params.clone());
    let mut v = vec![states];
    v.extend(GridArtifact::from_channel_map(chan));
    v
}

pub fn cmd_chanmap(cfg: &RunConfig, input: &SceneInput) -> Result<MapReport, CliError> {
    let (area, los) = run_losmap(cfg, input)?;
    let chan = run_chanmap(cfg, &los)?;
    let artifacts = write_artifacts(&cfg.output_dir, &chanmap_artifacts(&los, &chan))?;
    let report = MapReport {
        command: "chanmap",
        config_digest: cfg.digest(&input.sha256),
        scene_sha256: input.sha256.clone(),
        seed: Some(cfg.seed),
        params_digest: Some(chan.params.digest()),
        summary: MapSummary::new(&area, &los),
        artifacts,
        scene_load: input.report.clone(),
        scene_warnings: area.metadata.warnings.clone(),
        channel_warnings: chan.warnings.clone(),
    };
    write_json(&cfg.output_dir.join("chanmap_report.json"), &report)?;
    Ok(report)
}

/// Route file by extension: `.csv` holds `x,y` rows, anything else is
/// GeoJSON in the scene's coordinate frame.
pub fn load_route(path: &Path, projection: &Projection) -> Result<Route, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::config("route", format!("{} not found", path.display()))
        } else {
            io_error(path.display())(e)
        }
    })?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        route_from_csv(&text)?
    } else {
        route_from_geojson(&text, projection)?
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteReport {
    pub config_digest: String,
    pub length_m: f64,
    pub step_m: f64,
    pub samples: usize,
    pub stats: SegmentStats,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

/// Sample `route` over a freshly composed channel map.
pub fn evaluate_route(
    route: &Route,
    step_m: f64,
    los: &LosMap,
    chan: Option<&ChannelMap>,
    eirps_dbm: &[f64],
    sensitivity_dbm: f64,
) -> Result<(RouteTrace, SegmentStats), CliError> {
    let trace = sample_route(route, step_m, los, chan)?;
    let eirps = if chan.is_some() { eirps_dbm } else { &[] };
    let stats = segment_stats(&trace, eirps, sensitivity_dbm)?;
    Ok((trace, stats))
}

pub fn cmd_route(cfg: &RunConfig, input: &SceneInput) -> Result<RouteReport, CliError> {
    let path = cfg.route.as_ref().ok_or(CliError::Missing("route"))?;
    let route = load_route(path, &input.scene.metadata.projection)?;
    let (_, los) = run_losmap(cfg, input)?;
    let chan = run_chanmap(cfg, &los)?;
    let (trace, stats) = evaluate_route(&route, cfg.step_m, &los, Some(&chan), &cfg.eirps_dbm, cfg.sensitivity_dbm)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_csv_file(&dir.join("trace.csv"), |w| write_trace_csv(w, &trace))?;
    write_csv_file(&dir.join("segments.csv"), |w| write_segments_csv(w, &stats))?;
    let report = RouteReport {
        config_digest: cfg.digest(&input.sha256),
        length_m: trace.length_m,
        step_m: trace.step_m,
        samples: trace.samples.len(),
        stats,
        warnings: trace.warnings.clone(),
        files: vec!["trace.csv".into(), "segments.csv".into()],
    };
    write_json(&dir.join("route_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignOutput {
    pub config_digest: String,
    pub scene_sha256: String,
    pub report: CampaignReport,
    pub cdf_files: Vec<String>,
}

pub fn cdf_file_name(height_m: f64) -> String {
    format!("campaign_cdf_h{height_m}.csv")
}

pub fn cmd_campaign(cfg: &RunConfig, input: &SceneInput) -> Result<CampaignOutput, CliError> {
    if input.scene.is_empty() {
        return Err(CliError::config("scene", "a campaign needs a scene with buildings"));
    }
    let report = batch_campaign(&input.scene, &cfg.campaign_config(), &cfg.effective_params())?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut cdf_files = Vec::new();
    for h in &report.per_height {
        let name = cdf_file_name(h.height_m);
        let series = vec![("los_run_m".to_string(), h.los_cdf()), ("nlos_run_m".to_string(), h.nlos_cdf())];
        write_csv_file(&dir.join(&name), |w| write_cdf_csv(w, &series))?;
        cdf_files.push(name);
    }
    let out = CampaignOutput {
        config_digest: cfg.digest(&input.sha256),
        scene_sha256: input.sha256.clone(),
        report,
        cdf_files,
    };
    write_json(&dir.join("campaign_report.json"), &out)?;
    Ok(out)
}

