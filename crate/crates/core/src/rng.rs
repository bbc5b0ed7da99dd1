//! Counter-based random streams.
//!
//! Every random quantity is a pure function of `(seed, layer, index)`, so
//! per-cell draws can be generated in any order or in parallel and still
//! reproduce bit-for-bit. [`Stream`] adds a sequential counter on top for
//! orchestration code that needs several draws from one key.

use std::f64::consts::TAU;

/// Layer tags keyed into every stream; distinct layers never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    LsfLos,
    LsfNlos,
    Ssf,
    Campaign,
    Other(u64),
}

impl Layer {
    fn key(self) -> u64 {
        match self {
            Layer::LsfLos => 0x4c53_465f_4c4f_5301,
            Layer::LsfNlos => 0x4c53_465f_4e4c_4f53,
            Layer::Ssf => 0x5353_465f_0000_0001,
            Layer::Campaign => 0x4341_4d50_4149_474e,
            Layer::Other(k) => mix64(k ^ 0x6f74_6865_7200_0000),
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64, layer: Layer) -> u64 {
    mix64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ layer.key())
}

/// Raw 64-bit draw for `(seed, layer, index, lane)`.
pub fn draw_u64(seed: u64, layer: Layer, index: u64, lane: u64) -> u64 {
    let k = stream_key(seed, layer);
    mix64(k ^ mix64(index.wrapping_add(0xD134_2543_DE82_EF95)) ^ lane.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Uniform in the open interval (0, 1).
pub fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

pub fn uniform(seed: u64, layer: Layer, index: u64, lane: u64) -> f64 {
    to_open_unit(draw_u64(seed, layer, index, lane))
}

/// Standard normal via Box-Muller on lanes 0 and 1.
pub fn standard_normal(seed: u64, layer: Layer, index: u64) -> f64 {
    let u1 = uniform(seed, layer, index, 0);
    let u2 = uniform(seed, layer, index, 1);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Sequential stream derived from a key path.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64, layer: Layer) -> Self {
        Self {
            key: stream_key(seed, layer),
            counter: 0,
        }
    }

    /// Child stream identified by `label`; the parent is not advanced.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(label.wrapping_add(0x94D0_49BB_1331_11EB))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(self.counter.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }

    /// Uniform in (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        to_open_unit(self.next_u64())
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Seed for a nested computation (e.g. a channel map inside a campaign).
    pub fn next_seed(&mut self) -> u64 {
        self.next_u64()
    }
}
