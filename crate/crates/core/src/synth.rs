//! Synthetic scenes: Manhattan-grid cities and random convex layouts.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Rect};
use crate::rng::{Layer, Stream};
use crate::scene::{normalize_ring, Building, Scene};

/// Square blocks separated by streets, each block a single building.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManhattanConfig {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_m: f64,
    pub street_m: f64,
    pub min_height_m: f64,
    pub max_height_m: f64,
    pub seed: u64,
}

impl ManhattanConfig {
    pub fn period_m(&self) -> f64 {
        self.block_m + self.street_m
    }
}

impl Default for ManhattanConfig {
    fn default() -> Self {
        Self {
            blocks_x: 20,
            blocks_y: 20,
            block_m: 40.0,
            street_m: 15.0,
            min_height_m: 12.0,
            max_height_m: 30.0,
            seed: 1,
        }
    }
}

/// City whose lower-left street corner sits at the origin. Bounds include a
/// half street around the outermost blocks.
pub fn manhattan_grid(cfg: &ManhattanConfig) -> Scene {
    let mut stream = Stream::new(cfg.seed, Layer::Other(0x6d61_6e68));
    let period = cfg.period_m();
    let half = 0.5 * cfg.street_m;
    let mut buildings = Vec::with_capacity(cfg.blocks_x * cfg.blocks_y);
    for j in 0..cfg.blocks_y {
        for i in 0..cfg.blocks_x {
            let x0 = half + i as f64 * period;
            let y0 = half + j as f64 * period;
            let h = stream.uniform_in(cfg.min_height_m, cfg.max_height_m);
            buildings.push(Building::rectangle(
                format!("blk-{i}-{j}"),
                Point2::new(x0, y0),
                Point2::new(x0 + cfg.block_m, y0 + cfg.block_m),
                h,
            ));
        }
    }
    let bounds = Rect::new(
        0.0,
        0.0,
        cfg.blocks_x as f64 * period,
        cfg.blocks_y as f64 * period,
    );
    Scene::new(buildings, Some(bounds)).expect("generated ids are unique")
}

/// Convex hull (counterclockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a - o).cross(b - o);
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// `n` random convex buildings (hulls of 3..=8 points, radius 3..20 m) with
/// heights in `heights` inside `domain`.
pub fn random_convex_scene(stream: &mut Stream, n: usize, domain: Rect, heights: (f64, f64)) -> Scene {
    let mut buildings = Vec::with_capacity(n);
    while buildings.len() < n {
        let c = Point2::new(
            stream.uniform_in(domain.min_x + 20.0, domain.max_x - 20.0),
            stream.uniform_in(domain.min_y + 20.0, domain.max_y - 20.0),
        );
        let r = stream.uniform_in(3.0, 20.0);
        let k = 3 + (stream.next_u64() % 6) as usize;
        let pts: Vec<Point2> = (0..k)
            .map(|_| {
                let a = stream.uniform_in(0.0, std::f64::consts::TAU);
                let rr = r * stream.uniform_in(0.4, 1.0);
                c + Point2::new(a.cos(), a.sin()) * rr
            })
            .collect();
        let hull = normalize_ring(convex_hull(&pts));
        let b = Building::new(
            format!("b{}", buildings.len()),
            hull,
            stream.uniform_in(heights.0, heights.1),
        );
        if b.validate().is_empty() {
            buildings.push(b);
        }
    }
    Scene::new(buildings, Some(domain)).expect("generated ids are unique")
}
