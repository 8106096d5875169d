//! Object localization by probabilistic bisection.
//!
//! An image of `N1 x N2` pixels carries one discrete posterior per axis over
//! the object-center coordinate. Each iteration bisects one axis' posterior,
//! picks one side of the split at random, cuts the resulting strip into square
//! blocks and asks a noisy classifier oracle whether the object is there. The
//! per-block confidences are fused into a single response `y` and an error
//! probability `epsilon`, and the queried axis' posterior is reweighted by the
//! binary-symmetric-channel likelihood.
//!
//! Module map:
//!
//! - [`belief`]: per-axis posterior, bisection point, likelihood update, summaries
//! - [`engine`]: query regions, square block partitioning, response fusion, the search loop
//! - [`oracles`]: channel oracle, ground-truth block oracle, external classifier client
//! - [`scene`]: synthetic star-in-noise scenes, block extraction, nearest-neighbor resize
//! - [`baseline`]: sliding-window localization with exact call accounting
//! - [`analysis`]: channel capacity, the capacity lower bound, Monte Carlo MSE curves
//! - [`cli`]: the `pbaloc` experiment driver
//!
//! Bins and pixel coordinates are 1-indexed throughout the public API.

pub mod analysis;
pub mod baseline;
pub mod belief;
pub mod cli;
pub mod engine;
mod error;
pub mod geometry;
pub mod oracles;
pub mod scene;

pub use error::{Error, Result};
