//! Deterministic LOS/NLOS classification of the ground plane.
//!
//! Each building blocks the union of its footprint and one quadrilateral per
//! wall: the wall's base edge together with the ground projection of its
//! roof edge as seen from the transmitter. Those polygons are painted onto a
//! raster at cell centers; the union over buildings is implicit in the
//! raster. [`los_raycast`] answers the same question for a single point by
//! intersecting the 3D sight line with the extruded prisms, and serves as
//! the reference the raster is checked against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{distance_to_segment, point_in_polygon, scanline_spans, segment_hits_polygon, Point2, Rect};
use crate::scene::{Building, Scene};

pub const DEFAULT_RESOLUTION_M: f64 = 1.0;
pub const DEFAULT_MAX_CELLS: usize = 100_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VisibilityError {
    #[error("invalid transmitter: `{field}` {detail}")]
    InvalidTx { field: &'static str, detail: String },
    #[error("degenerate geometry: transmitter altitude {altitude_m} m does not exceed roof height {roof_m} m")]
    DegenerateGeometry { altitude_m: f64, roof_m: f64 },
    #[error("resolution {0} m must be positive")]
    InvalidResolution(f64),
    #[error("invalid map extent")]
    InvalidExtent,
    #[error("grid of {cells} cells exceeds cap of {cap}; coarsen the resolution")]
    GridTooLarge { cells: u128, cap: usize },
    #[error("map has no accessible (non-building) cells")]
    NoAccessibleArea,
}

/// Aerial transmitter placement plus receiver height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    pub position: Point2,
    pub altitude_m: f64,
    pub ue_height_m: f64,
}

impl TxConfig {
    pub fn new(position: Point2, altitude_m: f64, ue_height_m: f64) -> Self {
        Self {
            position,
            altitude_m,
            ue_height_m,
        }
    }

    pub fn validate(&self) -> Result<(), VisibilityError> {
        if !self.position.is_finite() {
            return Err(VisibilityError::InvalidTx {
                field: "position",
                detail: "must be finite".into(),
            });
        }
        if !(self.ue_height_m >= 0.0) || !self.ue_height_m.is_finite() {
            return Err(VisibilityError::InvalidTx {
                field: "ue_height_m",
                detail: format!("{} must be non-negative", self.ue_height_m),
            });
        }
        if !(self.altitude_m > 0.0) || !self.altitude_m.is_finite() {
            return Err(VisibilityError::InvalidTx {
                field: "altitude_m",
                detail: format!("{} must be positive", self.altitude_m),
            });
        }
        if self.altitude_m <= self.ue_height_m {
            return Err(VisibilityError::InvalidTx {
                field: "altitude_m",
                detail: format!(
                    "{} must exceed ue_height_m {}",
                    self.altitude_m, self.ue_height_m
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Los = 0,
    Nlos = 1,
    Building = 2,
}

impl CellState {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CellState::Los),
            1 => Some(CellState::Nlos),
            2 => Some(CellState::Building),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CellState::Los => "LOS",
            CellState::Nlos => "NLOS",
            CellState::Building => "BUILDING",
        }
    }
}

/// Ground projection of a roof vertex as seen from the transmitter.
///
/// Requires `tx.altitude_m > building_height_m`; otherwise the roof is not
/// below the transmitter and the shadow is unbounded.
pub fn project_roof_vertex(
    vertex: Point2,
    building_height_m: f64,
    tx: &TxConfig,
) -> Result<Point2, VisibilityError> {
    if tx.altitude_m <= building_height_m {
        return Err(VisibilityError::DegenerateGeometry {
            altitude_m: tx.altitude_m,
            roof_m: building_height_m,
        });
    }
    let scale = (tx.altitude_m - tx.ue_height_m) / (tx.altitude_m - building_height_m);
    Ok((vertex - tx.position) * scale + tx.position)
}

/// Blocked ground region of one building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowRegion {
    pub building_id: String,
    /// Footprint first, then one polygon per casting wall.
    pub polygons: Vec<Vec<Point2>>,
    /// The roof reaches the transmitter altitude and wall shadows were
    /// clipped at the clip bounds.
    pub unbounded: bool,
}

/// Footprint plus per-wall shadow polygons. Buildings no taller than the
/// receiver cast no shadow. For walls whose shadow is unbounded (roof at or
/// above the transmitter) or whose projected far edge lies entirely beyond
/// `clip_bounds`, the shadow is the angular wedge behind the wall cut at the
/// clip rectangle, which is exact inside it.
pub fn building_shadow(b: &Building, tx: &TxConfig, clip_bounds: &Rect) -> ShadowRegion {
    let mut region = ShadowRegion {
        building_id: b.id.clone(),
        polygons: vec![b.footprint.clone()],
        unbounded: false,
    };
    if b.height_m <= tx.ue_height_m {
        return region;
    }
    let tall = b.height_m >= tx.altitude_m;
    region.unbounded = tall;
    let mut clip = clip_bounds.union(&b.bbox());
    clip.include(tx.position);
    let reach = clip
        .corners()
        .iter()
        .map(|c| c.distance(tx.position))
        .fold(0.0, f64::max);

    let ring = &b.footprint;
    let n = ring.len();
    for i in 0..n {
        let (vi, vj) = (ring[i], ring[(i + 1) % n]);
        if !tall {
            // Both projections exist since altitude > roof.
            let si = project_roof_vertex(vi, b.height_m, tx).unwrap_or(vi);
            let sj = project_roof_vertex(vj, b.height_m, tx).unwrap_or(vj);
            if distance_to_segment(tx.position, si, sj) <= reach {
                region.polygons.push(vec![vi, vj, sj, si]);
                continue;
            }
        }
        if let Some(wedge) = wedge_polygon(vi, vj, tx.position, &clip) {
            region.polygons.push(wedge);
        }
    }
    region
}

/// Region behind edge `vi-vj` as seen from `eye`, bounded by `clip`.
fn wedge_polygon(vi: Point2, vj: Point2, eye: Point2, clip: &Rect) -> Option<Vec<Point2>> {
    let di = vi - eye;
    let dj = vj - eye;
    let cross = dj.cross(di);
    // Edges seen end-on (or containing the eye) enclose no area.
    if cross == 0.0 || di.norm() == 0.0 || dj.norm() == 0.0 {
        return None;
    }
    let si = eye + di * clip.ray_exit(eye, di);
    let sj = eye + dj * clip.ray_exit(eye, dj);
    let sweep = cross.atan2(dj.dot(di));
    let mut corners: Vec<(f64, Point2)> = clip
        .corners()
        .iter()
        .filter_map(|&c| {
            let dc = c - eye;
            let phi = dj.cross(dc).atan2(dj.dot(dc));
            let inside = if sweep > 0.0 {
                phi > 0.0 && phi < sweep
            } else {
                phi < 0.0 && phi > sweep
            };
            inside.then_some((phi.abs(), c))
        })
        .collect();
    corners.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut poly = vec![vi, vj, sj];
    poly.extend(corners.into_iter().map(|(_, c)| c));
    poly.push(si);
    Some(poly)
}

/// Rectangle used to cut unbounded shadows for a map over `extent`: the
/// extent, every building and the transmitter, inflated by the extent size
/// on each side.
pub fn shadow_clip_bounds(extent: &Rect, scene: &Scene, tx: &TxConfig) -> Rect {
    let mut r = *extent;
    for b in scene.buildings() {
        r = r.union(&b.bbox());
    }
    r.include(tx.position);
    r.inflate(extent.width().max(extent.height()).max(1.0))
}

/// Rasterized LOS/NLOS/BUILDING states on a regular ground grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LosMap {
    pub width: usize,
    pub height: usize,
    /// Center of the lower-left cell.
    pub origin: Point2,
    pub resolution_m: f64,
    pub tx: TxConfig,
    /// Row-major from the bottom row.
    pub states: Vec<CellState>,
}

impl LosMap {
    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            self.origin.x + col as f64 * self.resolution_m,
            self.origin.y + row as f64 * self.resolution_m,
        )
    }

    pub fn get(&self, col: usize, row: usize) -> CellState {
        self.states[row * self.width + col]
    }

    /// Nearest cell to `p`, if `p` falls within the grid.
    pub fn cell_at(&self, p: Point2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.resolution_m).round();
        let r = ((p.y - self.origin.y) / self.resolution_m).round();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height)
            .then_some((c as usize, r as usize))
    }

    pub fn extent(&self) -> Rect {
        let h = 0.5 * self.resolution_m;
        Rect::new(
            self.origin.x - h,
            self.origin.y - h,
            self.origin.x + (self.width as f64 - 0.5) * self.resolution_m,
            self.origin.y + (self.height as f64 - 0.5) * self.resolution_m,
        )
    }

    /// (LOS, NLOS, BUILDING) cell counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        self.states.iter().fold((0, 0, 0), |(l, n, b), s| match s {
            CellState::Los => (l + 1, n, b),
            CellState::Nlos => (l, n + 1, b),
            CellState::Building => (l, n, b + 1),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LosOptions {
    pub max_cells: usize,
}

impl Default for LosOptions {
    fn default() -> Self {
        Self {
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

pub fn grid_dims(extent: &Rect, resolution_m: f64) -> (usize, usize) {
    let n = |len: f64| ((len / resolution_m) - 1e-9).ceil().max(1.0) as usize;
    (n(extent.width()), n(extent.height()))
}

pub fn compute_los_map(
    scene: &Scene,
    tx: &TxConfig,
    resolution_m: f64,
    extent: &Rect,
) -> Result<LosMap, VisibilityError> {
    compute_los_map_with(scene, tx, resolution_m, extent, &LosOptions::default())
}

struct Paint<'a> {
    ring: std::borrow::Cow<'a, [Point2]>,
    bbox: Rect,
    state: CellState,
}

pub fn compute_los_map_with(
    scene: &Scene,
    tx: &TxConfig,
    resolution_m: f64,
    extent: &Rect,
    opts: &LosOptions,
) -> Result<LosMap, VisibilityError> {
    tx.validate()?;
    if !(resolution_m > 0.0) || !resolution_m.is_finite() {
        return Err(VisibilityError::InvalidResolution(resolution_m));
    }
    if !extent.is_valid() {
        return Err(VisibilityError::InvalidExtent);
    }
    let (width, height) = grid_dims(extent, resolution_m);
    let cells = width as u128 * height as u128;
    if cells > opts.max_cells as u128 {
        return Err(VisibilityError::GridTooLarge {
            cells,
            cap: opts.max_cells,
        });
    }
    let origin = Point2::new(
        extent.min_x + 0.5 * resolution_m,
        extent.min_y + 0.5 * resolution_m,
    );
    let clip = shadow_clip_bounds(extent, scene, tx);
    let shadows: Vec<ShadowRegion> = scene
        .buildings()
        .par_iter()
        .map(|b| building_shadow(b, tx, &clip))
        .collect();

    let mut paints: Vec<Paint> = Vec::new();
    for (b, shadow) in scene.buildings().iter().zip(&shadows) {
        paints.push(Paint {
            ring: std::borrow::Cow::Borrowed(&b.footprint),
            bbox: b.bbox(),
            state: CellState::Building,
        });
        for poly in shadow.polygons.iter().skip(1) {
            if let Some(bbox) = Rect::from_points(poly) {
                paints.push(Paint {
                    ring: std::borrow::Cow::Borrowed(poly),
                    bbox,
                    state: CellState::Nlos,
                });
            }
        }
    }
    let grid_box = Rect::new(
        origin.x,
        origin.y,
        origin.x + (width - 1) as f64 * resolution_m,
        origin.y + (height - 1) as f64 * resolution_m,
    );
    paints.retain(|p| p.bbox.intersects(&grid_box));

    let mut states = vec![CellState::Los; width * height];
    let center_x = |c: usize| origin.x + c as f64 * resolution_m;
    states
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, cells)| {
            let y = origin.y + row as f64 * resolution_m;
            let mut spans = Vec::new();
            for p in paints.iter().filter(|p| p.bbox.min_y <= y && y <= p.bbox.max_y) {
                scanline_spans(&p.ring, y, &mut spans);
                for &(x0, x1) in &spans {
                    let Some((c0, c1)) = column_range(x0, x1, origin.x, resolution_m, width, &center_x) else {
                        continue;
                    };
                    for cell in &mut cells[c0..=c1] {
                        if p.state > *cell {
                            *cell = p.state;
                        }
                    }
                }
            }
        });

    Ok(LosMap {
        width,
        height,
        origin,
        resolution_m,
        tx: *tx,
        states,
    })
}

/// Columns whose centers lie in `[x0, x1]`, using the exact center formula so
/// the raster agrees with [`point_in_polygon`] at every cell center.
fn column_range(
    x0: f64,
    x1: f64,
    origin_x: f64,
    res: f64,
    width: usize,
    center_x: &impl Fn(usize) -> f64,
) -> Option<(usize, usize)> {
    let last = width - 1;
    let guess = |x: f64| ((x - origin_x) / res).clamp(0.0, last as f64);
    let mut c0 = guess(x0).floor() as usize;
    while c0 > 0 && center_x(c0 - 1) >= x0 {
        c0 -= 1;
    }
    while c0 <= last && center_x(c0) < x0 {
        c0 += 1;
    }
    let mut c1 = guess(x1).ceil() as usize;
    while c1 < last && center_x(c1 + 1) <= x1 {
        c1 += 1;
    }
    while center_x(c1) > x1 {
        if c1 == 0 {
            return None;
        }
        c1 -= 1;
    }
    (c0 <= c1 && c0 <= last).then_some((c0, c1))
}

/// Fractions of accessible (non-building) cells in LOS and NLOS.
pub fn los_probability(map: &LosMap) -> Result<(f64, f64), VisibilityError> {
    let (los, nlos, _) = map.counts();
    let accessible = los + nlos;
    if accessible == 0 {
        return Err(VisibilityError::NoAccessibleArea);
    }
    let p_nlos = nlos as f64 / accessible as f64;
    Ok((1.0 - p_nlos, p_nlos))
}

/// Exact state of a single ground point: BUILDING inside a footprint, NLOS
/// when the segment from the transmitter to the receiver meets any extruded
/// prism, LOS otherwise.
pub fn los_raycast(scene: &Scene, tx: &TxConfig, ue: Point2) -> CellState {
    let buildings = scene.buildings();
    if buildings.iter().any(|b| point_in_polygon(ue, &b.footprint)) {
        return CellState::Building;
    }
    let drop = tx.altitude_m - tx.ue_height_m;
    for b in buildings {
        if b.height_m <= tx.ue_height_m {
            continue;
        }
        // The sight line's height falls linearly from the transmitter to the
        // receiver; it is at or below the roof for parameters t >= t_roof.
        let t_roof = ((tx.altitude_m - b.height_m) / drop).max(0.0);
        let start = tx.position + (ue - tx.position) * t_roof;
        let bbox = b.bbox();
        let seg_box = Rect::new(
            start.x.min(ue.x),
            start.y.min(ue.y),
            start.x.max(ue.x),
            start.y.max(ue.y),
        );
        if seg_box.intersects(&bbox) && segment_hits_polygon(start, ue, &b.footprint) {
            return CellState::Nlos;
        }
    }
    CellState::Los
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(x: f64, y: f64, h: f64, ue: f64) -> TxConfig {
        TxConfig::new(Point2::new(x, y), h, ue)
    }

    #[test]
    fn vertex_below_transmitter_projects_to_itself() {
        let s = project_roof_vertex(Point2::new(0.0, 0.0), 30.0, &tx(0.0, 0.0, 100.0, 1.5)).unwrap();
        assert_eq!(s, Point2::new(0.0, 0.0));
    }

    #[test]
    fn similar_triangle_projections() {
        // scale (100 - 0) / (100 - 50) = 2
        let s = project_roof_vertex(Point2::new(10.0, 0.0), 50.0, &tx(0.0, 0.0, 100.0, 0.0)).unwrap();
        assert!((s.x - 20.0).abs() < 1e-12 && s.y == 0.0);
        // scale 98.5 / 50 = 1.97
        let s = project_roof_vertex(Point2::new(10.0, 0.0), 50.0, &tx(0.0, 0.0, 100.0, 1.5)).unwrap();
        assert!((s.x - 19.7).abs() < 1e-12 && s.y == 0.0);
    }

    #[test]
    fn roof_at_or_above_transmitter_is_degenerate() {
        let t = tx(0.0, 0.0, 100.0, 1.5);
        assert!(matches!(
            project_roof_vertex(Point2::new(1.0, 0.0), 100.0, &t),
            Err(VisibilityError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn tx_invariants_name_the_field() {
        let err = tx(0.0, 0.0, 1.0, 1.5).validate().unwrap_err();
        assert!(matches!(err, VisibilityError::InvalidTx { field: "altitude_m", .. }));
        let err = tx(0.0, 0.0, 10.0, -1.0).validate().unwrap_err();
        assert!(matches!(err, VisibilityError::InvalidTx { field: "ue_height_m", .. }));
    }

    #[test]
    fn square_far_edge_projects_with_scale_two() {
        let b = Building::rectangle("b", Point2::new(20.0, -5.0), Point2::new(30.0, 5.0), 50.0);
        let t = tx(0.0, 0.0, 100.0, 0.0);
        let clip = Rect::new(-200.0, -200.0, 200.0, 200.0);
        let s = building_shadow(&b, &t, &clip);
        assert!(!s.unbounded);
        assert_eq!(s.polygons.len(), 5);
        let xs: Vec<f64> = s.polygons[1..]
            .iter()
            .flat_map(|p| p[2..].iter().map(|q| q.x))
            .collect();
        let max = xs.iter().cloned().fold(f64::MIN, f64::max);
        let min = xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 60.0).abs() < 1e-12 && (min - 40.0).abs() < 1e-12);
    }

    #[test]
    fn low_building_shadow_is_footprint_only() {
        let b = Building::rectangle("b", Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0), 1.5);
        let s = building_shadow(&b, &tx(0.0, 0.0, 100.0, 1.5), &Rect::new(-50.0, -50.0, 50.0, 50.0));
        assert_eq!(s.polygons, vec![b.footprint.clone()]);
        // barely taller: wall shadows collapse toward the footprint
        let b = Building::rectangle("b", Point2::new(-5.0, -5.0), Point2::new(5.0, 5.0), 1.5 + 1e-9);
        let s = building_shadow(&b, &tx(0.0, 0.0, 100.0, 1.5), &Rect::new(-50.0, -50.0, 50.0, 50.0));
        for poly in &s.polygons[1..] {
            for p in poly {
                assert!(p.x.abs() <= 5.0 + 1e-9 && p.y.abs() <= 5.0 + 1e-9);
            }
        }
    }

    #[test]
    fn tall_building_shadow_reaches_clip_bounds() {
        let b = Building::rectangle("t", Point2::new(20.0, -5.0), Point2::new(30.0, 5.0), 120.0);
        let clip = Rect::new(-100.0, -100.0, 100.0, 100.0);
        let s = building_shadow(&b, &tx(0.0, 0.0, 100.0, 1.5), &clip);
        assert!(s.unbounded);
        let reaches = s.polygons[1..]
            .iter()
            .flatten()
            .any(|p| (p.x - 100.0).abs() < 1e-9);
        assert!(reaches);
        let scene = Scene::new(vec![b], Some(clip)).unwrap();
        assert_eq!(los_raycast(&scene, &tx(0.0, 0.0, 100.0, 1.5), Point2::new(99.0, 0.0)), CellState::Nlos);
    }

    #[test]
    fn wide_wedge_includes_clip_corners() {
        // Transmitter right next to a long tall wall: the shadow wedge spans
        // almost a half plane and must include the clip corners behind it.
        let b = Building::rectangle("w", Point2::new(-40.0, 1.0), Point2::new(40.0, 2.0), 50.0);
        let t = tx(0.0, 0.0, 30.0, 1.5);
        let extent = Rect::new(-60.0, -60.0, 60.0, 60.0);
        let scene = Scene::new(vec![b], Some(extent)).unwrap();
        let map = compute_los_map(&scene, &t, 1.0, &extent).unwrap();
        for (col, row) in [(0, 119), (119, 119), (60, 119)] {
            let p = map.cell_center(col, row);
            assert_eq!(los_raycast(&scene, &t, p), CellState::Nlos);
            assert_eq!(map.get(col, row), CellState::Nlos, "{p:?}");
        }
    }

    #[test]
    fn empty_scene_is_all_los() {
        let extent = Rect::new(0.0, 0.0, 20.0, 10.0);
        let scene = Scene::open_terrain(extent);
        let map = compute_los_map(&scene, &tx(5.0, 5.0, 50.0, 1.5), 1.0, &extent).unwrap();
        assert_eq!((map.width, map.height), (20, 10));
        assert!(map.states.iter().all(|s| *s == CellState::Los));
        assert_eq!(los_probability(&map).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn footprint_cells_are_building() {
        let b = Building::rectangle("b", Point2::new(10.0, 10.0), Point2::new(20.0, 20.0), 10.0);
        let extent = Rect::new(0.0, 0.0, 40.0, 40.0);
        let scene = Scene::new(vec![b.clone()], Some(extent)).unwrap();
        let map = compute_los_map(&scene, &tx(0.0, 0.0, 50.0, 1.5), 1.0, &extent).unwrap();
        for row in 0..map.height {
            for col in 0..map.width {
                let inside = point_in_polygon(map.cell_center(col, row), &b.footprint);
                assert_eq!(map.get(col, row) == CellState::Building, inside);
            }
        }
    }

    #[test]
    fn probability_counts_cells() {
        let mut states = vec![CellState::Los; 60];
        states.extend(vec![CellState::Nlos; 40]);
        let map = LosMap {
            width: 10,
            height: 10,
            origin: Point2::new(0.5, 0.5),
            resolution_m: 1.0,
            tx: tx(0.0, 0.0, 10.0, 1.5),
            states,
        };
        let (pl, pn) = los_probability(&map).unwrap();
        assert!((pl - 0.6).abs() < 1e-15 && (pn - 0.4).abs() < 1e-15);
        let all_b = LosMap {
            states: vec![CellState::Building; 100],
            ..map
        };
        assert_eq!(los_probability(&all_b), Err(VisibilityError::NoAccessibleArea));
    }

    #[test]
    fn grid_cap_is_enforced() {
        let extent = Rect::new(0.0, 0.0, 1000.0, 1000.0);
        let scene = Scene::open_terrain(extent);
        let err = compute_los_map_with(
            &scene,
            &tx(0.0, 0.0, 50.0, 1.5),
            1.0,
            &extent,
            &LosOptions { max_cells: 1000 },
        )
        .unwrap_err();
        assert!(matches!(err, VisibilityError::GridTooLarge { cells: 1_000_000, .. }));
    }

    #[test]
    fn raycast_basic_cases() {
        let wall = Building::rectangle("w", Point2::new(10.0, -50.0), Point2::new(11.0, 50.0), 40.0);
        let scene = Scene::new(vec![wall], None).unwrap();
        let t = tx(0.0, 0.0, 30.0, 1.5);
        assert_eq!(los_raycast(&scene, &t, Point2::new(0.0, 0.0)), CellState::Los);
        assert_eq!(los_raycast(&scene, &t, Point2::new(12.0, 0.0)), CellState::Nlos);
        assert_eq!(los_raycast(&scene, &t, Point2::new(10.5, 0.0)), CellState::Building);
        assert_eq!(los_raycast(&scene, &t, Point2::new(-12.0, 0.0)), CellState::Los);
    }
}
