//! Route sampling over LOS and channel maps, run-length segmentation,
//! threshold outage segments and empirical CDFs.
//!
//! Segment bookkeeping uses a half-step convention: sample `i` stands for
//! the arc interval between the midpoints to its neighbours, clipped to
//! `[0, L]`. A run of samples therefore spans from the midpoint before its
//! first sample to the midpoint after its last one, so an interior run of
//! `c` samples at spacing `h` is `(c - 1) h + h/2 + h/2` long, a run touching
//! either route end loses that end's half step, and the lengths of all runs
//! add up to the route length.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMap;
use crate::geometry::Point2;
use crate::scene::Projection;
use crate::visibility::{CellState, LosMap};

/// Receiver sensitivity used for outage thresholds, dBm.
pub const DEFAULT_SENSITIVITY_DBM: f64 = -84.7;
/// Transmit EIRP levels considered by default, dBm.
pub const DEFAULT_EIRPS_DBM: [f64; 2] = [13.0, 23.0];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RouteError {
    #[error("route needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    RepeatedWaypoint(usize, usize),
    #[error("waypoint {index} at ({x}, {y}) lies outside the map")]
    RouteOutsideMap { index: usize, x: f64, y: f64 },
    #[error("sampling step {0} m must be positive")]
    InvalidStep(f64),
    #[error("channel map does not match the LOS map grid")]
    LayerMismatch,
    #[error("trace carries no channel attenuation")]
    MissingChannelLayer,
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("cannot parse route: {0}")]
    Parse(String),
}

/// Polyline through waypoints in local meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    waypoints: Vec<Point2>,
    cumulative: Vec<f64>,
}

impl Route {
    pub fn new(waypoints: Vec<Point2>) -> Result<Self, RouteError> {
        if waypoints.len() < 2 {
            return Err(RouteError::TooFewWaypoints(waypoints.len()));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for (i, w) in waypoints.windows(2).enumerate() {
            let d = w[0].distance(w[1]);
            if !(d > 0.0) {
                return Err(RouteError::RepeatedWaypoint(i, i + 1));
            }
            cumulative.push(cumulative[i] + d);
        }
        Ok(Self {
            waypoints,
            cumulative,
        })
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Position at arc length `s`, clamped to the route.
    pub fn point_at(&self, s: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        let seg = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.waypoints[i],
            Err(i) => i.clamp(1, self.waypoints.len() - 1) - 1,
        };
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let t = (s - self.cumulative[seg]) / (self.cumulative[seg + 1] - self.cumulative[seg]);
        a + (b - a) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSample {
    pub arc_s: f64,
    pub position: Point2,
    pub state: CellState,
    /// Total attenuation in dB; `None` on building cells or without a
    /// channel map.
    pub attenuation_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub samples: Vec<RouteSample>,
    pub step_m: f64,
    pub length_m: f64,
    pub warnings: Vec<String>,
}

impl RouteTrace {
    /// Arc interval `[start, end]` represented by sample `i`.
    pub fn sample_span(&self, i: usize) -> (f64, f64) {
        let s = &self.samples;
        let start = if i == 0 { 0.0 } else { 0.5 * (s[i - 1].arc_s + s[i].arc_s) };
        let end = if i + 1 == s.len() {
            self.length_m
        } else {
            0.5 * (s[i].arc_s + s[i + 1].arc_s)
        };
        (start, end)
    }

    /// Maximal runs of samples where `key` is constant, as
    /// `(key, first, last)` index triples.
    fn runs_by<K: PartialEq + Copy>(&self, key: impl Fn(&RouteSample) -> K) -> Vec<(K, usize, usize)> {
        let mut out: Vec<(K, usize, usize)> = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let k = key(s);
            match out.last_mut() {
                Some(last) if last.0 == k => last.2 = i,
                _ => out.push((k, i, i)),
            }
        }
        out
    }
}

fn lookup_cell(map: &LosMap, p: Point2) -> Option<(usize, usize)> {
    if !map.extent().contains(p) {
        return None;
    }
    let c = ((p.x - map.origin.x) / map.resolution_m).round().clamp(0.0, (map.width - 1) as f64);
    let r = ((p.y - map.origin.y) / map.resolution_m).round().clamp(0.0, (map.height - 1) as f64);
    Some((c as usize, r as usize))
}

/// Sample the route every `step_m` (endpoint always included) and read the
/// nearest cell of each map.
pub fn sample_route(
    route: &Route,
    step_m: f64,
    los_map: &LosMap,
    chan_map: Option<&ChannelMap>,
) -> Result<RouteTrace, RouteError> {
    if !(step_m > 0.0) || !step_m.is_finite() {
        return Err(RouteError::InvalidStep(step_m));
    }
    if let Some(c) = chan_map {
        if c.width != los_map.width || c.height != los_map.height {
            return Err(RouteError::LayerMismatch);
        }
    }
    for (index, w) in route.waypoints().iter().enumerate() {
        if lookup_cell(los_map, *w).is_none() {
            return Err(RouteError::RouteOutsideMap {
                index,
                x: w.x,
                y: w.y,
            });
        }
    }
    let mut warnings = Vec::new();
    if step_m > los_map.resolution_m {
        warnings.push(format!(
            "step {step_m} m exceeds map resolution {} m",
            los_map.resolution_m
        ));
    }
    let length = route.length();
    let n = (length / step_m + 1e-9).floor() as usize;
    let mut arcs: Vec<f64> = (0..=n).map(|k| k as f64 * step_m).collect();
    if let Some(last) = arcs.last_mut() {
        if *last > length {
            *last = length;
        }
    }
    if length - arcs[arcs.len() - 1] > 1e-9 * length.max(1.0) {
        arcs.push(length);
    }
    let samples = arcs
        .into_iter()
        .map(|s| {
            let position = route.point_at(s);
            // Waypoints are inside the rectangular extent, so every point of
            // the polyline is too.
            let (col, row) = lookup_cell(los_map, position).unwrap_or((0, 0));
            let state = los_map.get(col, row);
            let attenuation_db = chan_map
                .map(|c| c.total_at(col, row))
                .filter(|a| a.is_finite())
                .map(f64::from);
            RouteSample {
                arc_s: s,
                position,
                state,
                attenuation_db,
            }
        })
        .collect();
    Ok(RouteTrace {
        samples,
        step_m,
        length_m: length,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub state: CellState,
    pub start_s: f64,
    pub end_s: f64,
    pub length_m: f64,
}

/// Run-length part of the segment statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: Vec<Run>,
    pub los_runs_m: Vec<f64>,
    pub nlos_runs_m: Vec<f64>,
    /// Lengths of building crossings, excluded from LOS/NLOS statistics.
    pub building_runs_m: Vec<f64>,
    pub los_m: f64,
    pub nlos_m: f64,
    pub building_m: f64,
    pub total_m: f64,
    pub p_los: f64,
    pub p_nlos: f64,
    pub p_building: f64,
}

pub fn segment_runs(trace: &RouteTrace) -> Result<RunStats, RouteError> {
    if trace.samples.is_empty() {
        return Err(RouteError::EmptyInput);
    }
    let mut stats = RunStats {
        runs: Vec::new(),
        los_runs_m: Vec::new(),
        nlos_runs_m: Vec::new(),
        building_runs_m: Vec::new(),
        los_m: 0.0,
        nlos_m: 0.0,
        building_m: 0.0,
        total_m: trace.length_m,
        p_los: 0.0,
        p_nlos: 0.0,
        p_building: 0.0,
    };
    for (state, first, last) in trace.runs_by(|s| s.state) {
        let start_s = trace.sample_span(first).0;
        let end_s = trace.sample_span(last).1;
        let length_m = end_s - start_s;
        let (bucket, sum) = match state {
            CellState::Los => (&mut stats.los_runs_m, &mut stats.los_m),
            CellState::Nlos => (&mut stats.nlos_runs_m, &mut stats.nlos_m),
            CellState::Building => (&mut stats.building_runs_m, &mut stats.building_m),
        };
        bucket.push(length_m);
        *sum += length_m;
        stats.runs.push(Run {
            state,
            start_s,
            end_s,
            length_m,
        });
    }
    let total = stats.los_m + stats.nlos_m + stats.building_m;
    if total > 0.0 {
        stats.p_los = stats.los_m / total;
        stats.p_nlos = stats.nlos_m / total;
        stats.p_building = stats.building_m / total;
    } else if let Some(s) = trace.samples.first() {
        // zero-length route: all weight on the single state
        match s.state {
            CellState::Los => stats.p_los = 1.0,
            CellState::Nlos => stats.p_nlos = 1.0,
            CellState::Building => stats.p_building = 1.0,
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub length_m: f64,
}

/// Outage part of the segment statistics for one link budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageStats {
    pub eirp_dbm: f64,
    pub sensitivity_dbm: f64,
    pub threshold_db: f64,
    pub segments: Vec<OutageSegment>,
    pub outage_m: f64,
    pub total_m: f64,
    pub p_outage: f64,
}

pub fn outage_threshold_db(eirp_dbm: f64, sensitivity_dbm: f64) -> f64 {
    eirp_dbm - sensitivity_dbm
}

/// A sample is in outage when its attenuation exceeds
/// `eirp_dbm - sensitivity_dbm`. Building samples are masked and never in
/// outage; `p_outage` is taken over the full route length.
pub fn outage_segments(
    trace: &RouteTrace,
    eirp_dbm: f64,
    sensitivity_dbm: f64,
) -> Result<OutageStats, RouteError> {
    if trace.samples.is_empty() {
        return Err(RouteError::EmptyInput);
    }
    let accessible_without_channel = trace
        .samples
        .iter()
        .any(|s| s.state != CellState::Building && s.attenuation_db.is_none());
    if accessible_without_channel {
        return Err(RouteError::MissingChannelLayer);
    }
    let threshold_db = outage_threshold_db(eirp_dbm, sensitivity_dbm);
    let mut segments = Vec::new();
    let mut outage_m = 0.0;
    for (in_outage, first, last) in trace.runs_by(|s| s.attenuation_db.is_some_and(|a| a > threshold_db)) {
        if !in_outage {
            continue;
        }
        let start_s = trace.sample_span(first).0;
        let end_s = trace.sample_span(last).1;
        outage_m += end_s - start_s;
        segments.push(OutageSegment {
            start_s,
            end_s,
            length_m: end_s - start_s,
        });
    }
    let p_outage = if trace.length_m > 0.0 {
        (outage_m / trace.length_m).clamp(0.0, 1.0)
    } else if segments.is_empty() {
        0.0
    } else {
        1.0
    };
    Ok(OutageStats {
        eirp_dbm,
        sensitivity_dbm,
        threshold_db,
        segments,
        outage_m,
        total_m: trace.length_m,
        p_outage,
    })
}

/// Run-length and outage statistics of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub runs: RunStats,
    pub outage: Vec<OutageStats>,
}

pub fn segment_stats(
    trace: &RouteTrace,
    eirps_dbm: &[f64],
    sensitivity_dbm: f64,
) -> Result<SegmentStats, RouteError> {
    Ok(SegmentStats {
        runs: segment_runs(trace)?,
        outage: eirps_dbm
            .iter()
            .map(|&e| outage_segments(trace, e, sensitivity_dbm))
            .collect::<Result<_, _>>()?,
    })
}

/// Step-function empirical CDF: sorted values with `P(X <= x_k) = k / N`.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>, RouteError> {
    if values.is_empty() {
        return Err(RouteError::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(RouteError::NonFinite(i));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, (k + 1) as f64 / n))
        .collect())
}

/// Waypoints from CSV with `x,y` columns (header optional), in meters.
pub fn route_from_csv(text: &str) -> Result<Route, RouteError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| RouteError::Parse(e.to_string()))?;
        let parse = |k: usize| rec.get(k).and_then(|v| v.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(x), Some(y)) => points.push(Point2::new(x, y)),
            _ if i == 0 => continue, // header row
            _ => return Err(RouteError::Parse(format!("row {} is not `x,y`", i + 1))),
        }
    }
    Route::new(points)
}

/// Route from a GeoJSON LineString (bare geometry, Feature, or the first
/// feature of a FeatureCollection), mapped through the scene projection.
pub fn route_from_geojson(text: &str, projection: &Projection) -> Result<Route, RouteError> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| RouteError::Parse(e.to_string()))?;
    let geometry = match doc.get("type").and_then(|t| t.as_str()) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(|f| f.get(0))
            .and_then(|f| f.get("geometry")),
        Some("Feature") => doc.get("geometry"),
        _ => Some(&doc),
    }
    .ok_or_else(|| RouteError::Parse("no geometry".into()))?;
    if geometry.get("type").and_then(|t| t.as_str()) != Some("LineString") {
        return Err(RouteError::Parse("geometry is not a LineString".into()));
    }
    let coords = geometry
        .get("coordinates")
        .and_then(|c| c.as_array())
        .ok_or_else(|| RouteError::Parse("missing coordinates".into()))?;
    let points = coords
        .iter()
        .map(|c| {
            let a = c.get(0).and_then(|v| v.as_f64());
            let b = c.get(1).and_then(|v| v.as_f64());
            match (a, b) {
                (Some(a), Some(b)) => Ok(match projection {
                    Projection::Metric => Point2::new(a, b),
                    Projection::Equirectangular(p) => p.forward(a, b),
                }),
                _ => Err(RouteError::Parse("position needs two numbers".into())),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Route::new(points)
}
