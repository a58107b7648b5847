//! Landscape sensing from base-station path-gains.
//!
//! The crate covers the whole desk-scale pipeline: a procedural landscape
//! raster ([`scene`]), a map-aware path-gain model ([`propagation`]), the
//! dominant-N feature selector and dataset plumbing ([`dataset`]), a CART
//! random forest written from scratch ([`forest`]), and precision/recall
//! evaluation plus experiment drivers ([`metrics`]).

pub mod artifact;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod propagation;
pub mod scene;
pub mod seeds;

pub use error::{Error, Result};
