//! Sliding-window localization, the exhaustive baseline.
//!
//! Every window of every grid is classified; the reported center is the
//! center of the window with the highest object confidence.

use serde::{Deserialize, Serialize};

use crate::geometry::{Dims, Point, Rect};
use crate::oracles::{Granularity, Oracle};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGridSpec {
    pub window_side: usize,
    pub shift: usize,
}

impl WindowGridSpec {
    pub fn new(window_side: usize, shift: usize) -> Self {
        Self { window_side, shift }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (w, s) = (self.window_side, self.shift);
        if s < 1 || s > w {
            return Err(Error::invalid(format!("shift {s} must be in [1, {w}]")));
        }
        if w > width.min(height) {
            return Err(Error::invalid(format!("window {w} larger than image {height}x{width}")));
        }
        Ok(())
    }
}

/// `(floor((W - w) / s) + 1) * (floor((H - w) / s) + 1)`
pub fn window_count(width: usize, height: usize, spec: WindowGridSpec) -> Result<usize> {
    spec.validate(width, height)?;
    let per_axis = |n: usize| (n - spec.window_side) / spec.shift + 1;
    Ok(per_axis(width) * per_axis(height))
}

/// Square windows at offsets `0, s, 2s, ...` on each axis, in row-major scan order.
pub fn window_grid(width: usize, height: usize, spec: WindowGridSpec) -> Result<Vec<Rect>> {
    spec.validate(width, height)?;
    let w = spec.window_side;
    let offsets = |n: usize| (0..=n - w).step_by(spec.shift);
    Ok(offsets(height)
        .flat_map(|r| offsets(width).map(move |c| Rect::square(r + 1, c + 1, w)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlidingWindowResult {
    pub center: Point,
    pub calls: u64,
    pub best_window: Rect,
    pub best_p_obj: f64,
}

/// Classifies every window of every grid and returns the center of the
/// first window (scan order, grids in the given order) with maximal `p_obj`.
pub fn sliding_window_localize<O: Oracle + ?Sized>(
    dims: Dims,
    oracle: &mut O,
    specs: &[WindowGridSpec],
) -> Result<SlidingWindowResult> {
    if specs.is_empty() {
        return Err(Error::invalid("no window grids given"));
    }
    if oracle.granularity() != Granularity::Block {
        return Err(Error::invalid("the sliding-window baseline needs a block-level oracle"));
    }
    let grids = specs
        .iter()
        .map(|&s| window_grid(dims.cols, dims.rows, s))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Rect, f64)> = None;
    let mut calls = 0u64;
    for window in grids.iter().flatten() {
        let r = oracle.query(window)?;
        r.validate()?;
        calls += 1;
        if best.is_none_or(|(_, p)| r.p_obj() > p) {
            best = Some((*window, r.p_obj()));
        }
    }
    let (best_window, best_p_obj) = best.expect("at least one window");
    Ok(SlidingWindowResult { center: best_window.center(), calls, best_window, best_p_obj })
}

/// `sw_calls / pba_calls`
pub fn speedup(pba_calls: u64, sw_calls: u64) -> Result<f64> {
    if pba_calls == 0 {
        return Err(Error::invalid("speedup needs at least one PBA call"));
    }
    Ok(sw_calls as f64 / pba_calls as f64)
}
