//! Building footprints: GeoJSON ingestion, local projection, validation and
//! cropping around an aerial base station.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::geometry::{signed_area2, segments_intersect, Point2, Rect};

/// Consecutive vertices closer than this are treated as duplicates.
pub const VERTEX_EPS_M: f64 = 1e-9;

pub const DEFAULT_HEIGHT_ATTR: &str = "height";

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("scene file not found: {}", path.display())]
    FileNotFound { path: PathBuf },
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed GeoJSON in {source_name}: {detail}")]
    MalformedGeoJson { source_name: String, detail: String },
    #[error("no valid buildings in {source_name} ({} features skipped)", report.skipped)]
    EmptyScene {
        source_name: String,
        report: Box<LoadReport>,
    },
    #[error("duplicate building id `{0}`")]
    DuplicateId(String),
    #[error("invalid crop: {0}")]
    InvalidCrop(String),
}

/// Extruded flat-roof building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    /// Counterclockwise ring without a repeated closing vertex.
    pub footprint: Vec<Point2>,
    pub height_m: f64,
}

impl Building {
    pub fn new(id: impl Into<String>, footprint: Vec<Point2>, height_m: f64) -> Self {
        Self {
            id: id.into(),
            footprint,
            height_m,
        }
    }

    /// Axis-aligned rectangle footprint, counterclockwise.
    pub fn rectangle(id: impl Into<String>, min: Point2, max: Point2, height_m: f64) -> Self {
        Self::new(
            id,
            vec![
                min,
                Point2::new(max.x, min.y),
                max,
                Point2::new(min.x, max.y),
            ],
            height_m,
        )
    }

    pub fn bbox(&self) -> Rect {
        Rect::from_points(&self.footprint).unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0))
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_building(self)
    }
}

/// A broken [`Building`] invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    TooFewVertices { count: usize },
    NonFiniteVertex { index: usize },
    DuplicateVertex { index: usize },
    SelfIntersection { edge_a: usize, edge_b: usize },
    NotCounterClockwise,
    NonPositiveHeight { height_m: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewVertices { count } => write!(f, "footprint has {count} vertices (< 3)"),
            Violation::NonFiniteVertex { index } => write!(f, "vertex {index} is not finite"),
            Violation::DuplicateVertex { index } => {
                write!(f, "vertex {index} coincides with its successor")
            }
            Violation::SelfIntersection { edge_a, edge_b } => {
                write!(f, "edges {edge_a} and {edge_b} intersect")
            }
            Violation::NotCounterClockwise => write!(f, "footprint is not counterclockwise"),
            Violation::NonPositiveHeight { height_m } => write!(f, "height {height_m} is not positive"),
        }
    }
}

/// Check every [`Building`] invariant; empty when the building is valid.
pub fn validate_building(b: &Building) -> Vec<Violation> {
    let mut out = Vec::new();
    let ring = &b.footprint;
    let n = ring.len();
    if !(b.height_m > 0.0) || !b.height_m.is_finite() {
        out.push(Violation::NonPositiveHeight { height_m: b.height_m });
    }
    if n < 3 {
        out.push(Violation::TooFewVertices { count: n });
        return out;
    }
    let mut finite = true;
    for (i, p) in ring.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::NonFiniteVertex { index: i });
            finite = false;
        }
    }
    if !finite {
        return out;
    }
    for i in 0..n {
        if ring[i].distance(ring[(i + 1) % n]) <= VERTEX_EPS_M {
            out.push(Violation::DuplicateVertex { index: i });
        }
    }
    // Non-adjacent edges must not touch; adjacent edges may only share
    // their common vertex (no fold-back).
    for i in 0..n {
        let (a0, a1) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let (b0, b1) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                let (shared, a_other, b_other) = if j == i + 1 { (a1, a0, b1) } else { (a0, a1, b0) };
                let collinear = (a_other - shared).cross(b_other - shared) == 0.0;
                let folds = collinear && (a_other - shared).dot(b_other - shared) > 0.0;
                if folds {
                    out.push(Violation::SelfIntersection { edge_a: i, edge_b: j });
                }
            } else if segments_intersect(a0, a1, b0, b1) {
                out.push(Violation::SelfIntersection { edge_a: i, edge_b: j });
            }
        }
    }
    let simple = !out.iter().any(|v| matches!(v, Violation::SelfIntersection { .. }));
    if simple && signed_area2(ring) <= 0.0 {
        out.push(Violation::NotCounterClockwise);
    }
    out
}

/// Drop a repeated closing vertex and consecutive duplicates, then orient
/// counterclockwise.
pub fn normalize_ring(mut ring: Vec<Point2>) -> Vec<Point2> {
    ring.dedup_by(|b, a| a.distance(*b) <= VERTEX_EPS_M);
    while ring.len() > 1 && ring[0].distance(ring[ring.len() - 1]) <= VERTEX_EPS_M {
        ring.pop();
    }
    if signed_area2(&ring) < 0.0 {
        ring.reverse();
    }
    ring
}

/// Equirectangular projection about a reference point, with meridional and
/// parallel arc lengths per degree evaluated on the WGS84 ellipsoid at the
/// reference latitude (110,574 m / 111,320 m at the equator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin_lon: f64,
    pub origin_lat: f64,
}

impl LocalProjection {
    pub fn new(origin_lon: f64, origin_lat: f64) -> Self {
        Self {
            origin_lon,
            origin_lat,
        }
    }

    pub fn meters_per_degree_lat(&self) -> f64 {
        let phi = self.origin_lat.to_radians();
        111_132.92 - 559.82 * (2.0 * phi).cos() + 1.175 * (4.0 * phi).cos()
            - 0.0023 * (6.0 * phi).cos()
    }

    pub fn meters_per_degree_lon(&self) -> f64 {
        let phi = self.origin_lat.to_radians();
        111_412.84 * phi.cos() - 93.5 * (3.0 * phi).cos() + 0.118 * (5.0 * phi).cos()
    }

    pub fn forward(&self, lon: f64, lat: f64) -> Point2 {
        Point2::new(
            (lon - self.origin_lon) * self.meters_per_degree_lon(),
            (lat - self.origin_lat) * self.meters_per_degree_lat(),
        )
    }

    pub fn inverse(&self, p: Point2) -> (f64, f64) {
        (
            self.origin_lon + p.x / self.meters_per_degree_lon(),
            self.origin_lat + p.y / self.meters_per_degree_lat(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// Input coordinates were already metric.
    Metric,
    Equirectangular(LocalProjection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropInfo {
    pub center: Point2,
    pub radius_m: f64,
    pub retained: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub source: Option<String>,
    pub projection: Projection,
    /// Heights are taken as above local ground.
    pub height_reference: String,
    pub crop: Option<CropInfo>,
    pub warnings: Vec<String>,
}

impl Default for SceneMetadata {
    fn default() -> Self {
        Self {
            source: None,
            projection: Projection::Metric,
            height_reference: "above_local_ground".to_string(),
            crop: None,
            warnings: Vec::new(),
        }
    }
}

/// Validated building set over a planar domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    buildings: Vec<Building>,
    bounds: Rect,
    pub metadata: SceneMetadata,
}

impl Scene {
    /// Build a scene from already-metric buildings. Bounds default to the
    /// footprint bounding box and are otherwise widened to cover it.
    pub fn new(buildings: Vec<Building>, bounds: Option<Rect>) -> Result<Self, SceneError> {
        let mut seen = HashSet::new();
        for b in &buildings {
            if !seen.insert(b.id.as_str()) {
                return Err(SceneError::DuplicateId(b.id.clone()));
            }
        }
        let fp = footprint_bounds(&buildings);
        let bounds = match (bounds, fp) {
            (Some(b), Some(f)) => b.union(&f),
            (Some(b), None) => b,
            (None, Some(f)) => f,
            (None, None) => Rect::new(0.0, 0.0, 0.0, 0.0),
        };
        Ok(Self {
            buildings,
            bounds,
            metadata: SceneMetadata::default(),
        })
    }

    /// Scene with no buildings.
    pub fn open_terrain(bounds: Rect) -> Self {
        Self {
            buildings: Vec::new(),
            bounds,
            metadata: SceneMetadata::default(),
        }
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.buildings.is_empty()
    }

    pub fn max_building_height(&self) -> f64 {
        self.buildings.iter().map(|b| b.height_m).fold(0.0, f64::max)
    }
}

fn footprint_bounds(buildings: &[Building]) -> Option<Rect> {
    Rect::from_points(buildings.iter().flat_map(|b| b.footprint.iter()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feature_index: usize,
    pub id: Option<String>,
    pub reason: String,
}

/// Per-file ingestion summary, serialized as JSON next to outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub source: String,
    pub features_total: usize,
    pub buildings_loaded: usize,
    pub skipped: usize,
    pub skipped_features: Vec<SkippedFeature>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub height_attr: String,
    /// Coordinates are already in a metric CRS; skip projection.
    pub metric: bool,
    /// Projection origin as (lon, lat). Defaults to the origin recorded in
    /// the file, then to the vertex centroid.
    pub origin: Option<(f64, f64)>,
    /// Return an empty scene instead of [`SceneError::EmptyScene`].
    pub allow_empty: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            height_attr: DEFAULT_HEIGHT_ATTR.to_string(),
            metric: false,
            origin: None,
            allow_empty: false,
        }
    }
}

/// Load a GeoJSON FeatureCollection of (Multi)Polygon buildings.
pub fn load_scene(path: &Path, height_attr: &str) -> Result<(Scene, LoadReport), SceneError> {
    load_scene_with(
        path,
        &LoadOptions {
            height_attr: height_attr.to_string(),
            ..LoadOptions::default()
        },
    )
}

pub fn load_scene_with(path: &Path, opts: &LoadOptions) -> Result<(Scene, LoadReport), SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SceneError::FileNotFound {
                path: path.to_path_buf(),
            }
        } else {
            SceneError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    parse_scene(&text, &path.display().to_string(), opts)
}

struct RawPolygon {
    feature_index: usize,
    id: String,
    height: f64,
    ring: Vec<[f64; 2]>,
}

/// Parse GeoJSON text. `source_name` is used for error context and metadata.
pub fn parse_scene(
    text: &str,
    source_name: &str,
    opts: &LoadOptions,
) -> Result<(Scene, LoadReport), SceneError> {
    let malformed = |detail: String| SceneError::MalformedGeoJson {
        source_name: source_name.to_string(),
        detail,
    };
    let doc: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(malformed("top-level object is not a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing `features` array".into()))?;

    let mut report = LoadReport {
        source: source_name.to_string(),
        features_total: features.len(),
        ..LoadReport::default()
    };
    let mut raw = Vec::new();
    for (idx, feature) in features.iter().enumerate() {
        let id = feature_id(feature, idx);
        let mut skip = |reason: String| {
            report.skipped_features.push(SkippedFeature {
                feature_index: idx,
                id: Some(id.clone()),
                reason,
            })
        };
        let Some(geometry) = feature.get("geometry").filter(|g| !g.is_null()) else {
            skip("feature has no geometry".into());
            continue;
        };
        let height = match feature
            .get("properties")
            .and_then(|p| p.get(&opts.height_attr))
            .and_then(numeric)
        {
            Some(h) if h.is_finite() && h > 0.0 => h,
            Some(h) => {
                skip(format!("non-positive height {h}"));
                continue;
            }
            None => {
                skip(format!("missing numeric `{}` attribute", opts.height_attr));
                continue;
            }
        };
        let polygons = match polygons_of(geometry) {
            Ok(p) => p,
            Err(reason) => {
                skip(reason);
                continue;
            }
        };
        let multi = polygons.len() > 1
            || geometry.get("type").and_then(Value::as_str) == Some("MultiPolygon");
        let mut holes = false;
        for (k, rings) in polygons.into_iter().enumerate() {
            holes |= rings.len() > 1;
            let Some(exterior) = rings.into_iter().next() else {
                continue;
            };
            raw.push(RawPolygon {
                feature_index: idx,
                id: if multi { format!("{id}#{k}") } else { id.clone() },
                height,
                ring: exterior,
            });
        }
        if holes {
            report
                .warnings
                .push(format!("feature {idx} (`{id}`): interior rings ignored"));
        }
    }

    let projection = if opts.metric || file_says_metric(&doc) {
        Projection::Metric
    } else {
        let origin = opts
            .origin
            .or_else(|| file_origin(&doc))
            .or_else(|| centroid(&raw));
        match origin {
            Some((lon, lat)) => Projection::Equirectangular(LocalProjection::new(lon, lat)),
            None => Projection::Metric,
        }
    };

    let mut buildings: Vec<Building> = Vec::with_capacity(raw.len());
    let mut ids = HashSet::new();
    for rp in raw {
        let ring: Vec<Point2> = rp
            .ring
            .iter()
            .map(|&[a, b]| match projection {
                Projection::Metric => Point2::new(a, b),
                Projection::Equirectangular(p) => p.forward(a, b),
            })
            .collect();
        let mut building = Building::new(rp.id, normalize_ring(ring), rp.height);
        let violations = validate_building(&building);
        if !violations.is_empty() {
            let reasons: Vec<String> = violations.iter().map(ToString::to_string).collect();
            report.skipped_features.push(SkippedFeature {
                feature_index: rp.feature_index,
                id: Some(building.id.clone()),
                reason: format!("invalid footprint: {}", reasons.join("; ")),
            });
            continue;
        }
        if !ids.insert(building.id.clone()) {
            let mut n = 1;
            while ids.contains(&format!("{}~{n}", building.id)) {
                n += 1;
            }
            let renamed = format!("{}~{n}", building.id);
            report
                .warnings
                .push(format!("duplicate id `{}` renamed to `{renamed}`", building.id));
            building.id = renamed.clone();
            ids.insert(renamed);
        }
        buildings.push(building);
    }

    report.skipped = report.skipped_features.len();
    report.buildings_loaded = buildings.len();
    if buildings.is_empty() && !opts.allow_empty {
        return Err(SceneError::EmptyScene {
            source_name: source_name.to_string(),
            report: Box::new(report),
        });
    }
    let mut scene = Scene::new(buildings, None)?;
    scene.metadata = SceneMetadata {
        source: Some(source_name.to_string()),
        projection,
        warnings: report.warnings.clone(),
        ..SceneMetadata::default()
    };
    Ok((scene, report))
}

fn feature_id(feature: &Value, idx: usize) -> String {
    let from = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    };
    feature
        .get("id")
        .and_then(from)
        .or_else(|| feature.get("properties").and_then(|p| p.get("id")).and_then(from))
        .unwrap_or_else(|| format!("feature-{idx}"))
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

type Rings = Vec<Vec<[f64; 2]>>;

fn polygons_of(geometry: &Value) -> Result<Vec<Rings>, String> {
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| format!("{kind} geometry without coordinates"))?;
    match kind {
        "Polygon" => Ok(vec![rings_of(coords)?]),
        "MultiPolygon" => coords
            .as_array()
            .ok_or("MultiPolygon coordinates are not an array")?
            .iter()
            .map(rings_of)
            .collect(),
        other => Err(format!("unsupported geometry type `{other}`")),
    }
}

fn rings_of(v: &Value) -> Result<Rings, String> {
    let rings = v.as_array().ok_or("polygon coordinates are not an array")?;
    rings
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| "ring is not an array".to_string())?
                .iter()
                .map(|pos| {
                    let p = pos.as_array().ok_or("position is not an array")?;
                    match (p.first().and_then(Value::as_f64), p.get(1).and_then(Value::as_f64)) {
                        (Some(a), Some(b)) => Ok([a, b]),
                        _ => Err("position needs two numbers".to_string()),
                    }
                })
                .collect()
        })
        .collect()
}

fn file_projection(doc: &Value) -> Option<&Value> {
    doc.get("properties").and_then(|p| p.get("projection"))
}

fn file_says_metric(doc: &Value) -> bool {
    file_projection(doc)
        .and_then(|p| p.get("kind"))
        .and_then(Value::as_str)
        == Some("metric")
}

fn file_origin(doc: &Value) -> Option<(f64, f64)> {
    let p = file_projection(doc)?;
    Some((p.get("origin_lon")?.as_f64()?, p.get("origin_lat")?.as_f64()?))
}

fn centroid(raw: &[RawPolygon]) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in raw {
        for &[a, b] in &p.ring {
            sx += a;
            sy += b;
            n += 1;
        }
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

/// Serialize a scene as a GeoJSON FeatureCollection. Projected scenes are
/// written back in lon/lat with the projection origin recorded in the
/// top-level `properties`, so reloading reproduces the metric coordinates.
pub fn scene_to_geojson(scene: &Scene, height_attr: &str) -> Value {
    let to_pos = |p: &Point2| -> Value {
        match scene.metadata.projection {
            Projection::Metric => json!([p.x, p.y]),
            Projection::Equirectangular(proj) => {
                let (lon, lat) = proj.inverse(*p);
                json!([lon, lat])
            }
        }
    };
    let features: Vec<Value> = scene
        .buildings()
        .iter()
        .map(|b| {
            let mut ring: Vec<Value> = b.footprint.iter().map(to_pos).collect();
            if let Some(first) = ring.first().cloned() {
                ring.push(first);
            }
            let mut props = Map::new();
            props.insert(height_attr.to_string(), json!(b.height_m));
            json!({
                "type": "Feature",
                "id": b.id,
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            })
        })
        .collect();
    let projection = match scene.metadata.projection {
        Projection::Metric => json!({"kind": "metric"}),
        Projection::Equirectangular(p) => json!({
            "kind": "equirectangular",
            "origin_lon": p.origin_lon,
            "origin_lat": p.origin_lat,
        }),
    };
    let mut props = json!({
        "projection": projection,
        "height_reference": scene.metadata.height_reference,
    });
    if let Some(src) = &scene.metadata.source {
        props["source"] = json!(src);
    }
    if let Some(crop) = &scene.metadata.crop {
        props["crop"] = json!(crop);
    }
    json!({"type": "FeatureCollection", "properties": props, "features": features})
}

pub fn write_scene(scene: &Scene, path: &Path, height_attr: &str) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&scene_to_geojson(scene, height_attr))?;
    std::fs::write(path, text)
}

/// Crop around `center`. The result's bounds are the square circumscribing
/// the disk; a building is kept whole iff its bounding box meets that
/// square. Shadows point away from the transmitter, so for any transmitter
/// inside the square a building outside it cannot shade a point inside it,
/// and visibility within the crop matches the full scene.
pub fn crop_scene(scene: &Scene, center: Point2, radius: f64) -> Result<Scene, SceneError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(SceneError::InvalidCrop(format!("radius {radius} must be positive")));
    }
    if !center.is_finite() || !scene.bounds().contains(center) {
        return Err(SceneError::InvalidCrop(format!(
            "center ({}, {}) outside scene bounds",
            center.x, center.y
        )));
    }
    let bounds = Rect::around(center, radius);
    let buildings: Vec<Building> = scene
        .buildings()
        .iter()
        .filter(|b| b.bbox().intersects(&bounds))
        .cloned()
        .collect();
    let retained = buildings.len();
    let mut metadata = scene.metadata.clone();
    metadata.crop = Some(CropInfo {
        center,
        radius_m: radius,
        retained,
        dropped: scene.buildings().len() - retained,
    });
    if retained == 0 {
        metadata
            .warnings
            .push("crop retained no buildings (open terrain)".to_string());
    }
    Ok(Scene {
        buildings,
        bounds,
        metadata,
    })
}
