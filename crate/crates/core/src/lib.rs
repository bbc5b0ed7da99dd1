//! Map-driven air-to-ground propagation for aerial base stations.
//!
//! The pipeline runs scene ingestion ([`scene`]), shadow-projection
//! visibility ([`visibility`]), channel synthesis ([`channel`]) and route
//! statistics ([`route`]), with [`export`] writing grids, images and
//! reports.

pub mod campaign;
pub mod channel;
pub mod export;
pub mod geometry;
pub mod rng;
pub mod route;
pub mod scene;
pub mod synth;
pub mod visibility;

pub use geometry::{Point2, Rect};
pub use scene::{Building, Scene};
pub use visibility::{CellState, LosMap, TxConfig};
