//! Per-cell channel attenuation: altitude-dependent path loss, spatially
//! correlated shadow fading and log-logistic small-scale fading, summed in dB.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::Point2;
use crate::rng::{self, Layer, Stream};
use crate::visibility::{CellState, LosMap, TxConfig};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
pub const DEFAULT_CARRIER_HZ: f64 = 16.95e9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChannelError {
    #[error("3D distance {0} m must be positive")]
    InvalidDistance(f64),
    #[error("invalid channel parameter `{field}`: {detail}")]
    InvalidParams { field: &'static str, detail: String },
}

/// Exponential transition between a ground-level value `p2` and a
/// high-altitude asymptote `p1` with decay height `p3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightParam {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl HeightParam {
    pub const fn new(p1: f64, p2: f64, p3: f64) -> Self {
        Self { p1, p2, p3 }
    }

    pub fn eval(&self, h: f64) -> f64 {
        eval_height_param(self, h)
    }
}

pub fn eval_height_param(p: &HeightParam, h: f64) -> f64 {
    p.p1 + (p.p2 - p.p1) * (-h / p.p3).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

impl LinkState {
    pub fn from_cell(state: CellState) -> Option<Self> {
        match state {
            CellState::Los => Some(LinkState::Los),
            CellState::Nlos => Some(LinkState::Nlos),
            CellState::Building => None,
        }
    }
}

/// Channel model parameters; the defaults are the FR3 fit at 16.95 GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub los_ple: f64,
    pub nlos_ple: HeightParam,
    pub los_sigma_db: HeightParam,
    pub nlos_sigma_db: HeightParam,
    pub los_ddcr_m: HeightParam,
    pub nlos_ddcr_m: HeightParam,
    pub los_beta: f64,
    pub nlos_beta: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_hz: DEFAULT_CARRIER_HZ,
            los_ple: 2.0,
            nlos_ple: HeightParam::new(2.91, 4.53, 26.4),
            los_sigma_db: HeightParam::new(4.34, 5.24, 30.8),
            nlos_sigma_db: HeightParam::new(16.1, 20.0, 23.0),
            los_ddcr_m: HeightParam::new(7.0, 14.64, 27.0),
            nlos_ddcr_m: HeightParam::new(8.28, 15.43, 36.0),
            los_beta: 1.96,
            nlos_beta: 1.91,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |field: &'static str, detail: String| Err(ChannelError::InvalidParams { field, detail });
        if !(self.carrier_hz > 0.0) || !self.carrier_hz.is_finite() {
            return bad("carrier_hz", format!("{} must be positive", self.carrier_hz));
        }
        if !self.los_ple.is_finite() {
            return bad("los_ple", "must be finite".into());
        }
        let height_params = [
            ("nlos_ple", &self.nlos_ple),
            ("los_sigma_db", &self.los_sigma_db),
            ("nlos_sigma_db", &self.nlos_sigma_db),
            ("los_ddcr_m", &self.los_ddcr_m),
            ("nlos_ddcr_m", &self.nlos_ddcr_m),
        ];
        for (field, p) in height_params {
            if !(p.p3 > 0.0) || !p.p1.is_finite() || !p.p2.is_finite() || !p.p3.is_finite() {
                return bad(field, format!("needs finite values and p3 > 0, got {p:?}"));
            }
        }
        for (field, p) in [("los_sigma_db", &self.los_sigma_db), ("nlos_sigma_db", &self.nlos_sigma_db)] {
            if p.p1 < 0.0 || p.p2 < 0.0 {
                return bad(field, "standard deviations must be non-negative".into());
            }
        }
        for (field, p) in [("los_ddcr_m", &self.los_ddcr_m), ("nlos_ddcr_m", &self.nlos_ddcr_m)] {
            if !(p.p1 > 0.0) || !(p.p2 > 0.0) {
                return bad(field, "decorrelation distances must be positive".into());
            }
        }
        for (field, b) in [("los_beta", self.los_beta), ("nlos_beta", self.nlos_beta)] {
            if !(b > 1.0) || !b.is_finite() {
                return bad(field, format!("{b} must exceed 1 for a finite mean"));
            }
        }
        Ok(())
    }

    pub fn ple(&self, state: LinkState, h_tx: f64) -> f64 {
        match state {
            LinkState::Los => self.los_ple,
            LinkState::Nlos => self.nlos_ple.eval(h_tx),
        }
    }

    pub fn sigma_db(&self, state: LinkState, h_tx: f64) -> f64 {
        match state {
            LinkState::Los => self.los_sigma_db.eval(h_tx),
            LinkState::Nlos => self.nlos_sigma_db.eval(h_tx),
        }
    }

    pub fn ddcr_m(&self, state: LinkState, h_tx: f64) -> f64 {
        match state {
            LinkState::Los => self.los_ddcr_m.eval(h_tx),
            LinkState::Nlos => self.nlos_ddcr_m.eval(h_tx),
        }
    }

    pub fn beta(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.los_beta,
            LinkState::Nlos => self.nlos_beta,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("params serialize");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// `20 log10(4 pi f / c)`, the 1 m free-space intercept.
pub fn fspl_intercept_db(carrier_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * carrier_hz / SPEED_OF_LIGHT_M_S).log10()
}

pub fn path_loss(
    d3d_m: f64,
    state: LinkState,
    h_tx: f64,
    params: &ChannelParams,
) -> Result<f64, ChannelError> {
    if !(d3d_m > 0.0) || !d3d_m.is_finite() {
        return Err(ChannelError::InvalidDistance(d3d_m));
    }
    Ok(fspl_intercept_db(params.carrier_hz) + 10.0 * params.ple(state, h_tx) * d3d_m.log10())
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Log-logistic CDF with unit mean SNR and shape `beta`.
pub fn ssf_cdf(gamma: f64, beta: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let g = gamma.powf(beta);
    g / (sinc(1.0 / beta).powf(beta) + g)
}

/// Inverse CDF at `u` in (0, 1): returns linear gain and its dB value.
pub fn ssf_from_uniform(beta: f64, u: f64) -> (f64, f64) {
    let gamma = sinc(1.0 / beta) * (u / (1.0 - u)).powf(1.0 / beta);
    (gamma, 10.0 * gamma.log10())
}

/// One small-scale fading draw from `stream`.
pub fn sample_ssf(state: LinkState, params: &ChannelParams, stream: &mut Stream) -> (f64, f64) {
    ssf_from_uniform(params.beta(state), stream.next_f64())
}

/// Gaussian kernel standard deviation (cells) giving normalized
/// autocorrelation `exp(-r^2 / ddcr^2)`, i.e. `1/e` at lag `ddcr`.
pub fn kernel_sigma_cells(ddcr_m: f64, resolution_m: f64) -> f64 {
    0.5 * ddcr_m / resolution_m
}

/// Zero-mean, unit-variance correlated Gaussian field on a `width x height`
/// grid: white noise filtered by a separable Gaussian kernel truncated at
/// four standard deviations, then standardized by its sample moments.
pub fn correlated_gaussian_field(
    width: usize,
    height: usize,
    ddcr_m: f64,
    resolution_m: f64,
    seed: u64,
    layer: Layer,
) -> Vec<f64> {
    let sigma = kernel_sigma_cells(ddcr_m, resolution_m);
    let radius = if sigma > 0.0 { (4.0 * sigma).ceil() as usize } else { 0 };
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let d = k as f64 - radius as f64;
            if radius == 0 { 1.0 } else { (-d * d / (2.0 * sigma * sigma)).exp() }
        })
        .collect();
    let pw = width + 2 * radius;
    let ph = height + 2 * radius;

    // Horizontal pass over padded rows.
    let mut rows = vec![0.0f64; width * ph];
    rows.par_chunks_mut(width).enumerate().for_each(|(r, out)| {
        let noise: Vec<f64> = (0..pw)
            .map(|c| rng::standard_normal(seed, layer, (r * pw + c) as u64))
            .collect();
        for (c, o) in out.iter_mut().enumerate() {
            *o = kernel.iter().zip(&noise[c..c + kernel.len()]).map(|(k, n)| k * n).sum();
        }
    });
    // Vertical pass.
    let mut field = vec![0.0f64; width * height];
    field.par_chunks_mut(width).enumerate().for_each(|(r, out)| {
        for (k, w) in kernel.iter().enumerate() {
            let src = &rows[(r + k) * width..(r + k + 1) * width];
            for (o, s) in out.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    });

    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    field.par_iter_mut().for_each(|v| *v = (*v - mean) * inv_std);
    field
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelWarning {
    /// The grid is shorter than three decorrelation distances; shadowing
    /// statistics over it are unreliable.
    GridTooSmall {
        state: LinkState,
        ddcr_m: f64,
        width_m: f64,
        height_m: f64,
    },
}

/// Shadow-fading layer aligned with a [`LosMap`]; building cells are NaN.
#[derive(Debug, Clone)]
pub struct LsfField {
    pub xi_db: Vec<f64>,
    pub warnings: Vec<ChannelWarning>,
}

pub fn generate_lsf_field(
    los_map: &LosMap,
    h_tx: f64,
    params: &ChannelParams,
    seed: u64,
) -> LsfField {
    let (w, h) = (los_map.width, los_map.height);
    let mut warnings = Vec::new();
    let mut field_for = |state: LinkState, layer: Layer| -> Option<Vec<f64>> {
        let wanted = match state {
            LinkState::Los => CellState::Los,
            LinkState::Nlos => CellState::Nlos,
        };
        if !los_map.states.contains(&wanted) {
            return None;
        }
        let ddcr = params.ddcr_m(state, h_tx);
        let (wm, hm) = (w as f64 * los_map.resolution_m, h as f64 * los_map.resolution_m);
        if wm < 3.0 * ddcr || hm < 3.0 * ddcr {
            warnings.push(ChannelWarning::GridTooSmall {
                state,
                ddcr_m: ddcr,
                width_m: wm,
                height_m: hm,
            });
        }
        Some(correlated_gaussian_field(w, h, ddcr, los_map.resolution_m, seed, layer))
    };
    let s_los = field_for(LinkState::Los, Layer::LsfLos);
    let s_nlos = field_for(LinkState::Nlos, Layer::LsfNlos);
    let sigma_los = params.sigma_db(LinkState::Los, h_tx);
    let sigma_nlos = params.sigma_db(LinkState::Nlos, h_tx);
    let xi_db = los_map
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            CellState::Los => sigma_los * s_los.as_ref().map_or(0.0, |f| f[i]),
            CellState::Nlos => sigma_nlos * s_nlos.as_ref().map_or(0.0, |f| f[i]),
            CellState::Building => f64::NAN,
        })
        .collect();
    LsfField { xi_db, warnings }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelOptions {
    /// Zero both fading layers so the total equals the path loss.
    pub no_fading: bool,
}

/// Attenuation layers in dB, aligned with the source [`LosMap`]. Building
/// cells hold NaN in every layer.
#[derive(Debug, Clone)]
pub struct ChannelMap {
    pub width: usize,
    pub height: usize,
    pub origin: Point2,
    pub resolution_m: f64,
    pub tx: TxConfig,
    pub seed: u64,
    pub params: ChannelParams,
    pub options: ChannelOptions,
    pub pathloss_db: Vec<f32>,
    pub lsf_db: Vec<f32>,
    pub ssf_db: Vec<f32>,
    pub total_db: Vec<f32>,
    pub warnings: Vec<ChannelWarning>,
}

impl ChannelMap {
    pub fn total_at(&self, col: usize, row: usize) -> f32 {
        self.total_db[row * self.width + col]
    }
}

pub fn compose_channel_map(
    los_map: &LosMap,
    params: &ChannelParams,
    seed: u64,
) -> Result<ChannelMap, ChannelError> {
    compose_channel_map_with(los_map, params, seed, ChannelOptions::default())
}

pub fn compose_channel_map_with(
    los_map: &LosMap,
    params: &ChannelParams,
    seed: u64,
    options: ChannelOptions,
) -> Result<ChannelMap, ChannelError> {
    params.validate()?;
    let tx = los_map.tx;
    let h_tx = tx.altitude_m;
    let dz = tx.altitude_m - tx.ue_height_m;
    let (xi, warnings) = if options.no_fading {
        (None, Vec::new())
    } else {
        let f = generate_lsf_field(los_map, h_tx, params, seed);
        (Some(f.xi_db), f.warnings)
    };
    let w = los_map.width;
    let n = w * los_map.height;
    let cells: Vec<(f32, f32, f32, f32)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let Some(state) = LinkState::from_cell(los_map.states[i]) else {
                return (f32::NAN, f32::NAN, f32::NAN, f32::NAN);
            };
            let p = los_map.cell_center(i % w, i / w);
            let horiz = p - tx.position;
            let d3d = (horiz.dot(horiz) + dz * dz).sqrt().max(los_map.resolution_m);
            let pl = path_loss(d3d, state, h_tx, params).unwrap_or(f64::NAN) as f32;
            let (lsf, ssf) = match &xi {
                None => (0.0f32, 0.0f32),
                Some(xi) => {
                    let u = rng::uniform(seed, Layer::Ssf, i as u64, 0);
                    (xi[i] as f32, ssf_from_uniform(params.beta(state), u).1 as f32)
                }
            };
            (pl, lsf, ssf, pl + lsf + ssf)
        })
        .collect();
    let mut out = ChannelMap {
        width: w,
        height: los_map.height,
        origin: los_map.origin,
        resolution_m: los_map.resolution_m,
        tx,
        seed,
        params: params.clone(),
        options,
        pathloss_db: Vec::with_capacity(n),
        lsf_db: Vec::with_capacity(n),
        ssf_db: Vec::with_capacity(n),
        total_db: Vec::with_capacity(n),
        warnings,
    };
    for (pl, lsf, ssf, total) in cells {
        out.pathloss_db.push(pl);
        out.lsf_db.push(lsf);
        out.ssf_db.push(ssf);
        out.total_db.push(total);
    }
    Ok(out)
}
