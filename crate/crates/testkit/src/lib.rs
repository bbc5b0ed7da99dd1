//! Reference computations for tests. Everything here is written from first
//! principles and shares no code with the crates under test.

use statrs::distribution::{ContinuousCDF, Normal};

pub type Pt = (f64, f64);

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// Asymptotic critical value of the one-sample KS statistic.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Median of the unit-mean log-logistic law with shape `beta`.
pub fn log_logistic_median(beta: f64) -> f64 {
    let a = std::f64::consts::PI / beta;
    a.sin() / a
}

pub fn log_logistic_cdf(g: f64, beta: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + (g / log_logistic_median(beta)).powf(-beta))
}

pub fn log_logistic_quantile(u: f64, beta: f64) -> f64 {
    log_logistic_median(beta) * (u / (1.0 - u)).powf(1.0 / beta)
}

/// CDF of `N(0, sigma^2) + 10 log10(G)` with `G` log-logistic, integrated
/// over the quantile function of `G` with `nodes` midpoint nodes.
pub fn shadow_plus_fading_cdf(x: f64, sigma_db: f64, beta: f64, nodes: usize) -> f64 {
    let n = nodes as f64;
    (0..nodes)
        .map(|k| {
            let u = (k as f64 + 0.5) / n;
            let z = 10.0 * log_logistic_quantile(u, beta).log10();
            if sigma_db > 0.0 {
                normal_cdf((x - z) / sigma_db)
            } else if x >= z {
                1.0
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n
}

/// Sample mean and (population) variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

/// Normalized autocorrelation of a row-major `w x h` field at integer lag
/// `k` along x and along y, with the number of pairs used for each.
pub fn autocorrelation_int(field: &[f64], w: usize, h: usize, k: usize) -> ((f64, usize), (f64, usize)) {
    let (m, var) = mean_var(field);
    let mut sx = 0.0;
    let mut nx = 0;
    let mut sy = 0.0;
    let mut ny = 0;
    for r in 0..h {
        for c in 0..w {
            let a = field[r * w + c] - m;
            if c + k < w {
                sx += a * (field[r * w + c + k] - m);
                nx += 1;
            }
            if r + k < h {
                sy += a * (field[(r + k) * w + c] - m);
                ny += 1;
            }
        }
    }
    ((sx / nx as f64 / var, nx), (sy / ny as f64 / var, ny))
}

/// Autocorrelation along x and y at a fractional lag in cells, linearly
/// interpolated between the neighbouring integer lags.
pub fn autocorrelation(field: &[f64], w: usize, h: usize, lag_cells: f64) -> (f64, f64, usize) {
    let k0 = lag_cells.floor() as usize;
    let f = lag_cells - k0 as f64;
    let ((x0, n0), (y0, _)) = autocorrelation_int(field, w, h, k0);
    let ((x1, n1), (y1, _)) = autocorrelation_int(field, w, h, k0 + 1);
    (x0 + (x1 - x0) * f, y0 + (y1 - y0) * f, n0.min(n1))
}

/// Geodesic distance on the WGS84 ellipsoid by Vincenty's inverse method.
pub fn vincenty_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let a = 6_378_137.0;
    let f = 1.0 / 298.257_223_563;
    let b = a * (1.0 - f);
    let l = (lon2 - lon1).to_radians();
    let u1 = ((1.0 - f) * lat1.to_radians().tan()).atan();
    let u2 = ((1.0 - f) * lat2.to_radians().tan()).atan();
    let (su1, cu1) = u1.sin_cos();
    let (su2, cu2) = u2.sin_cos();
    let mut lambda = l;
    for _ in 0..200 {
        let (sl, cl) = lambda.sin_cos();
        let sin_sigma = ((cu2 * sl).powi(2) + (cu1 * su2 - su1 * cu2 * cl).powi(2)).sqrt();
        if sin_sigma == 0.0 {
            return 0.0;
        }
        let cos_sigma = su1 * su2 + cu1 * cu2 * cl;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cu1 * cu2 * sl / sin_sigma;
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sm = if cos2_alpha != 0.0 {
            cos_sigma - 2.0 * su1 * su2 / cos2_alpha
        } else {
            0.0
        };
        let c = f / 16.0 * cos2_alpha * (4.0 + f * (4.0 - 3.0 * cos2_alpha));
        let prev = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
        if (lambda - prev).abs() < 1e-13 {
            let u_sq = cos2_alpha * (a * a - b * b) / (b * b);
            let aa = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let bb = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let ds = bb
                * sin_sigma
                * (cos_2sm
                    + bb / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                            - bb / 6.0 * cos_2sm * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
            return b * aa * (sigma - ds);
        }
    }
    f64::NAN
}

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counterclockwise convex hull.
pub fn hull(points: &[Pt]) -> Vec<Pt> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut out: Vec<Pt> = Vec::new();
    for pass in 0..2 {
        let start = out.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while out.len() >= start + 2 && cross(out[out.len() - 2], out[out.len() - 1], q) <= 0.0 {
                out.pop();
            }
            out.push(q);
        }
        out.pop();
    }
    out
}

/// Parameter interval of segment `a -> b` inside a convex counterclockwise
/// polygon (Cyrus-Beck), if any.
pub fn clip_segment_convex(a: Pt, b: Pt, poly: &[Pt]) -> Option<(f64, f64)> {
    let d = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        // inward normal of a ccw edge
        let n = (-(q.1 - p.1), q.0 - p.0);
        let num = n.0 * (a.0 - p.0) + n.1 * (a.1 - p.1);
        let den = n.0 * d.0 + n.1 * d.1;
        if den == 0.0 {
            if num < 0.0 {
                return None;
            }
        } else {
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Length of segment `a -> b` inside a convex polygon.
pub fn chord_length(a: Pt, b: Pt, poly: &[Pt]) -> f64 {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    clip_segment_convex(a, b, poly).map_or(0.0, |(t0, t1)| (t1 - t0) * len)
}

/// Ground-cell state seen from an aerial transmitter over convex prisms:
/// 0 LOS, 1 NLOS, 2 inside a footprint. The sight line runs from
/// `(tx, h_tx)` to `(ue, h_ue)`; a prism `(ccw footprint, height)` blocks it
/// when the line is below the roof anywhere over the footprint.
pub fn sight_line_state(tx: Pt, h_tx: f64, ue: Pt, h_ue: f64, prisms: &[(Vec<Pt>, f64)]) -> u8 {
    if prisms.iter().any(|(poly, _)| clip_segment_convex(ue, ue, poly).is_some()) {
        return 2;
    }
    let blocked = prisms.iter().any(|(poly, hb)| match clip_segment_convex(tx, ue, poly) {
        // The line descends, so its lowest point over the footprint is at exit.
        Some((t0, t1)) if t1 > t0 => h_tx + (h_ue - h_tx) * t1 < *hb,
        _ => false,
    });
    u8::from(blocked)
}
