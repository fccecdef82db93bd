//! Zero-modified count time series driven by latent AR(1) intensities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod filter;
pub mod intensity;
pub mod io;
pub mod observation;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
