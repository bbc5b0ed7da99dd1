//! Multi-realization campaigns: random transmitters per height, random
//! chord routes through the coverage disk, statistics aggregated per height.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{compose_channel_map, ChannelError, ChannelParams};
use crate::geometry::{point_in_polygon, segment_hits_polygon, Point2, Rect};
use crate::rng::{Layer, Stream};
use crate::route::{
    empirical_cdf, sample_route, segment_stats, Route, RouteError, SegmentStats,
    DEFAULT_EIRPS_DBM, DEFAULT_SENSITIVITY_DBM,
};
use crate::scene::{crop_scene, Scene, SceneError};
use crate::visibility::{compute_los_map, los_probability, TxConfig, VisibilityError};

/// Upper bound on transmitter placement retries before accepting a point.
const MAX_TX_TRIES: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("campaign needs at least one height")]
    NoHeights,
    #[error("n_tx must be at least 1")]
    NoTransmitters,
    #[error("invalid campaign setting `{field}`: {detail}")]
    InvalidConfig { field: &'static str, detail: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Route(#[from] RouteError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub heights_m: Vec<f64>,
    pub n_tx: usize,
    pub coverage_radius_m: f64,
    pub routes_per_tx: usize,
    pub resolution_m: f64,
    pub step_m: f64,
    pub ue_height_m: f64,
    pub eirps_dbm: Vec<f64>,
    pub sensitivity_dbm: f64,
    pub seed: u64,
    pub route_mode: RouteMode,
}

/// How campaign routes are drawn inside the coverage disk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMode {
    /// Chords with uniform direction and uniform offset.
    #[default]
    Chord,
    /// Axis-aligned chords that do not enter any footprint, i.e. routes
    /// running along the streets of a grid city. Falls back to an
    /// unconstrained axis-aligned chord after repeated misses.
    Streets,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            heights_m: vec![30.0, 150.0],
            n_tx: 20,
            coverage_radius_m: 250.0,
            routes_per_tx: 10,
            resolution_m: 1.0,
            step_m: 1.0,
            ue_height_m: 1.5,
            eirps_dbm: DEFAULT_EIRPS_DBM.to_vec(),
            sensitivity_dbm: DEFAULT_SENSITIVITY_DBM,
            seed: 0,
            route_mode: RouteMode::Chord,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.heights_m.is_empty() {
            return Err(CampaignError::NoHeights);
        }
        if self.n_tx == 0 {
            return Err(CampaignError::NoTransmitters);
        }
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CampaignError::InvalidConfig {
                    field,
                    detail: format!("{v} must be positive"),
                })
            }
        };
        positive("coverage_radius_m", self.coverage_radius_m)?;
        positive("resolution_m", self.resolution_m)?;
        positive("step_m", self.step_m)?;
        if !(self.ue_height_m >= 0.0) {
            return Err(CampaignError::InvalidConfig {
                field: "ue_height_m",
                detail: "must be non-negative".into(),
            });
        }
        for &h in &self.heights_m {
            if !(h > self.ue_height_m) || !h.is_finite() {
                return Err(CampaignError::InvalidConfig {
                    field: "heights_m",
                    detail: format!("height {h} must exceed the UE height"),
                });
            }
        }
        if self.step_m >= self.coverage_radius_m {
            return Err(CampaignError::InvalidConfig {
                field: "step_m",
                detail: "must be smaller than the coverage radius".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageSummary {
    pub eirp_dbm: f64,
    pub threshold_db: f64,
    pub outage_m: f64,
    pub p_outage: f64,
    pub outage_segments_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSummary {
    pub height_m: f64,
    pub realizations: usize,
    pub routes: usize,
    /// Mean over realizations of the map-level LOS fraction.
    pub p_los_map: f64,
    pub p_nlos_map: f64,
    /// Route-length-weighted fractions over all campaign routes.
    pub p_los_route: f64,
    pub p_nlos_route: f64,
    pub p_building_route: f64,
    pub total_route_m: f64,
    pub los_runs_m: Vec<f64>,
    pub nlos_runs_m: Vec<f64>,
    pub outage: Vec<OutageSummary>,
}

impl HeightSummary {
    pub fn los_cdf(&self) -> Vec<(f64, f64)> {
        empirical_cdf(&self.los_runs_m).unwrap_or_default()
    }

    pub fn nlos_cdf(&self) -> Vec<(f64, f64)> {
        empirical_cdf(&self.nlos_runs_m).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub params_digest: String,
    pub per_height: Vec<HeightSummary>,
}

/// One transmitter draw: its position, the map LOS fraction and the stats of
/// every route.
struct Realization {
    p_los_map: f64,
    routes: Vec<SegmentStats>,
}

/// Uniform point in the scene bounds, redrawn while it falls on a roof the
/// transmitter could not hover above.
fn draw_tx(scene: &Scene, altitude: f64, stream: &mut Stream) -> Point2 {
    let b = scene.bounds();
    let mut p = b.center();
    for _ in 0..MAX_TX_TRIES {
        p = Point2::new(stream.uniform_in(b.min_x, b.max_x), stream.uniform_in(b.min_y, b.max_y));
        let blocked = scene
            .buildings()
            .iter()
            .any(|bd| bd.height_m >= altitude && bd.bbox().contains(p) && point_in_polygon(p, &bd.footprint));
        if !blocked {
            break;
        }
    }
    p
}

/// Random chord of the disk: uniform direction and uniform signed offset of
/// the chord from the center. Chords shorter than `min_len` are redrawn.
pub fn random_chord(center: Point2, radius: f64, min_len: f64, stream: &mut Stream) -> (Point2, Point2) {
    loop {
        let theta = stream.uniform_in(0.0, std::f64::consts::TAU);
        let offset = stream.uniform_in(-radius, radius);
        let half = (radius * radius - offset * offset).max(0.0).sqrt();
        if 2.0 * half < min_len {
            continue;
        }
        let t = Point2::new(theta.cos(), theta.sin());
        let n = Point2::new(-t.y, t.x);
        let mid = center + n * offset;
        return (mid - t * half, mid + t * half);
    }
}

/// Axis-aligned chord clear of every footprint, drawn by rejection.
pub fn street_chord(scene: &Scene, center: Point2, radius: f64, min_len: f64, stream: &mut Stream) -> (Point2, Point2) {
    let mut last = None;
    for _ in 0..MAX_TX_TRIES {
        let horizontal = stream.next_f64() < 0.5;
        let offset = stream.uniform_in(-radius, radius);
        let half = (radius * radius - offset * offset).max(0.0).sqrt();
        if 2.0 * half < min_len {
            continue;
        }
        let (a, b) = if horizontal {
            (Point2::new(center.x - half, center.y + offset), Point2::new(center.x + half, center.y + offset))
        } else {
            (Point2::new(center.x + offset, center.y - half), Point2::new(center.x + offset, center.y + half))
        };
        let seg_box = Rect::new(a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y));
        let blocked = scene
            .buildings()
            .iter()
            .any(|bd| bd.bbox().intersects(&seg_box) && segment_hits_polygon(a, b, &bd.footprint));
        if !blocked {
            return (a, b);
        }
        last = Some((a, b));
    }
    last.unwrap_or_else(|| random_chord(center, radius, min_len, stream))
}

fn run_realization(
    scene: &Scene,
    cfg: &CampaignConfig,
    params: &ChannelParams,
    height: f64,
    mut stream: Stream,
) -> Result<Realization, CampaignError> {
    let pos = draw_tx(scene, height, &mut stream);
    let cropped = crop_scene(scene, pos, cfg.coverage_radius_m)?;
    let tx = TxConfig::new(pos, height, cfg.ue_height_m);
    let extent = cropped.bounds();
    let los_map = compute_los_map(&cropped, &tx, cfg.resolution_m, &extent)?;
    let p_los_map = los_probability(&los_map).map(|p| p.0).unwrap_or(0.0);
    let chan = compose_channel_map(&los_map, params, stream.next_seed())?;
    // Chords stay a hair inside the disk so endpoints sit inside the grid.
    let r = cfg.coverage_radius_m * (1.0 - 1e-9);
    let mut routes = Vec::with_capacity(cfg.routes_per_tx);
    for _ in 0..cfg.routes_per_tx {
        let (a, b) = match cfg.route_mode {
            RouteMode::Chord => random_chord(pos, r, cfg.step_m, &mut stream),
            RouteMode::Streets => street_chord(&cropped, pos, r, cfg.step_m, &mut stream),
        };
        let route = Route::new(vec![a, b])?;
        let trace = sample_route(&route, cfg.step_m, &los_map, Some(&chan))?;
        routes.push(segment_stats(&trace, &cfg.eirps_dbm, cfg.sensitivity_dbm)?);
    }
    Ok(Realization { p_los_map, routes })
}

fn summarize(height: f64, cfg: &CampaignConfig, reals: Vec<Realization>) -> HeightSummary {
    let n_real = reals.len();
    let mut s = HeightSummary {
        height_m: height,
        realizations: n_real,
        routes: 0,
        p_los_map: reals.iter().map(|r| r.p_los_map).sum::<f64>() / n_real.max(1) as f64,
        p_nlos_map: 0.0,
        p_los_route: 0.0,
        p_nlos_route: 0.0,
        p_building_route: 0.0,
        total_route_m: 0.0,
        los_runs_m: Vec::new(),
        nlos_runs_m: Vec::new(),
        outage: cfg
            .eirps_dbm
            .iter()
            .map(|&e| OutageSummary {
                eirp_dbm: e,
                threshold_db: e - cfg.sensitivity_dbm,
                outage_m: 0.0,
                p_outage: 0.0,
                outage_segments_m: Vec::new(),
            })
            .collect(),
    };
    s.p_nlos_map = 1.0 - s.p_los_map;
    let (mut los_m, mut nlos_m, mut bld_m) = (0.0, 0.0, 0.0);
    for stats in reals.into_iter().flat_map(|r| r.routes) {
        s.routes += 1;
        s.total_route_m += stats.runs.total_m;
        los_m += stats.runs.los_m;
        nlos_m += stats.runs.nlos_m;
        bld_m += stats.runs.building_m;
        s.los_runs_m.extend(&stats.runs.los_runs_m);
        s.nlos_runs_m.extend(&stats.runs.nlos_runs_m);
        for (agg, o) in s.outage.iter_mut().zip(&stats.outage) {
            agg.outage_m += o.outage_m;
            agg.outage_segments_m.extend(o.segments.iter().map(|g| g.length_m));
        }
    }
    let total = los_m + nlos_m + bld_m;
    if total > 0.0 {
        s.p_los_route = los_m / total;
        s.p_nlos_route = nlos_m / total;
        s.p_building_route = bld_m / total;
    }
    for o in &mut s.outage {
        if s.total_route_m > 0.0 {
            o.p_outage = o.outage_m / s.total_route_m;
        }
    }
    s
}

/// Run the campaign. Realization `(i, j)` (height `i`, transmitter `j`) uses
/// its own stream derived from `(seed, i, j)`, so the report does not depend
/// on scheduling.
pub fn batch_campaign(
    scene: &Scene,
    cfg: &CampaignConfig,
    params: &ChannelParams,
) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    params.validate()?;
    let root = Stream::new(cfg.seed, Layer::Campaign);
    let jobs: Vec<(usize, usize)> = (0..cfg.heights_m.len())
        .flat_map(|hi| (0..cfg.n_tx).map(move |ti| (hi, ti)))
        .collect();
    let results: Vec<Realization> = jobs
        .par_iter()
        .map(|&(hi, ti)| {
            let stream = root.derive(hi as u64).derive(ti as u64);
            run_realization(scene, cfg, params, cfg.heights_m[hi], stream)
        })
        .collect::<Result<_, _>>()?;
    let mut results = results.into_iter();
    let per_height = cfg
        .heights_m
        .iter()
        .map(|&h| summarize(h, cfg, results.by_ref().take(cfg.n_tx).collect()))
        .collect();
    Ok(CampaignReport {
        config: cfg.clone(),
        params_digest: params.digest(),
        per_height,
    })
}
