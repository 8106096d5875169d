//! Channel capacity, the mean-square-error lower bound, and Monte Carlo
//! convergence curves under the binary symmetric channel oracle.
//!
//! With `n` queries split evenly over `d` axes and every answer wrong with
//! probability `eps`, the localization MSE is bounded below by
//! `K * d * exp(-2 n C(eps) / d)`, where `C(eps) = 1 - H(eps)` is the channel
//! capacity in bits. `K` has no closed form; [`calibrate_k`] anchors it to an
//! empirical curve at `n = 0` so the bound becomes a shape check.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, make_query, SearchState};
use crate::geometry::{Axis, Dims, Point};
use crate::oracles::BscOracle;
use crate::{Error, Result};

/// Queries over which the acceptance decay rate is fitted (1-D, N = 1024,
/// eps = 0.1). Past ~30 queries the MSE is dominated by a few trials whose
/// posterior has locked onto a wrong bin, and the curve goes flat.
pub const DECAY_FIT_WINDOW: RangeInclusive<usize> = 0..=30;

/// Smallest acceptable `-slope` over [`DECAY_FIT_WINDOW`]. Pilot slopes over
/// five 500-trial seeds ranged from -0.135 to -0.238.
pub const DECAY_RATE_THRESHOLD: f64 = 0.12;

/// Binary entropy in bits, `H(0) = H(1) = 0`.
fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Capacity of a binary symmetric channel with crossover probability `epsilon`, in bits.
pub fn capacity(epsilon: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 0.5]")));
    }
    Ok(1.0 - binary_entropy(epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub k: f64,
    pub d: usize,
    pub epsilon: f64,
}

impl BoundParams {
    pub fn new(k: f64, d: usize, epsilon: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("K must be positive, got {k}")));
        }
        if !(d == 1 || d == 2) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {d}")));
        }
        capacity(epsilon)?;
        Ok(Self { k, d, epsilon })
    }
}

/// `K * d * exp(-2 n C(eps) / d)`
pub fn mse_lower_bound(n: usize, params: &BoundParams) -> f64 {
    let c = capacity(params.epsilon).expect("epsilon validated by BoundParams");
    let d = params.d as f64;
    params.k * d * (-2.0 * n as f64 * c / d).exp()
}

/// Picks `K` so the bound equals the curve's MSE at `n = 0`.
pub fn calibrate_k(curve: &MseCurve, d: usize) -> Result<f64> {
    let mse0 = curve
        .n
        .iter()
        .position(|&n| n == 0)
        .map(|i| curve.mse[i])
        .ok_or_else(|| Error::invalid("curve has no n = 0 point"))?;
    if mse0 <= 0.0 {
        return Err(Error::invalid("cannot calibrate K against a zero MSE"));
    }
    Ok(mse0 / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseCurve {
    /// Total queries made so far, `0..=n_max`.
    pub n: Vec<usize>,
    /// Mean squared distance between the per-axis medians and the target, in bins squared.
    pub mse: Vec<f64>,
    /// Standard error of each `mse` entry.
    pub std_err: Vec<f64>,
    pub trials: usize,
}

impl MseCurve {
    pub fn at(&self, n: usize) -> Option<f64> {
        self.n.iter().position(|&m| m == n).map(|i| self.mse[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Bins per axis.
    pub grid: usize,
    /// 1 or 2 axes.
    pub dims: usize,
    pub eps_true: f64,
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { grid: 1024, dims: 1, eps_true: 0.1, n_max: 200, trials: 500, seed: 0 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.grid < 2 {
            return Err(Error::invalid("grid needs at least 2 bins"));
        }
        if !(self.dims == 1 || self.dims == 2) {
            return Err(Error::invalid(format!("dims must be 1 or 2, got {}", self.dims)));
        }
        if !(0.0..0.5).contains(&self.eps_true) {
            return Err(Error::invalid(format!("eps_true {} outside [0, 0.5)", self.eps_true)));
        }
        Ok(())
    }
}

/// Squared error of the median estimate after each of `0..=n_max` queries
/// for one trial. Trial `i` draws everything from seed `seed + i`.
pub fn run_trial(config: &McConfig, trial: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(trial as u64));
    let n = config.grid;
    let mut errors = Vec::with_capacity(config.n_max + 1);
    if config.dims == 1 {
        let dims = Dims::new(1, n)?;
        let target = Point::new(1, rng.gen_range(1..=n));
        let mut oracle = BscOracle::new(target, config.eps_true, rng.gen())?;
        let mut belief = crate::belief::Belief::uniform(n)?;
        let sq = |b: &crate::belief::Belief| (b.median_bin() as f64 - target.col as f64).powi(2);
        errors.push(sq(&belief));
        for _ in 0..config.n_max {
            let region = make_query(&belief, Axis::Cols, dims, &mut rng)?;
            belief = engine::observe(&belief, &region, &mut oracle)?.belief;
            errors.push(sq(&belief));
        }
    } else {
        let dims = Dims::new(n, n)?;
        let target = Point::new(rng.gen_range(1..=n), rng.gen_range(1..=n));
        let mut oracle = BscOracle::new(target, config.eps_true, rng.gen())?;
        let mut state = SearchState::new(dims)?;
        let sq = |s: &SearchState| {
            let m = s.beliefs.median();
            (m.row as f64 - target.row as f64).powi(2) + (m.col as f64 - target.col as f64).powi(2)
        };
        errors.push(sq(&state));
        let mut axis = Axis::Rows;
        for _ in 0..config.n_max {
            state = engine::step(&state, axis, &mut oracle, dims, &mut rng)?.0;
            axis = axis.other();
            errors.push(sq(&state));
        }
    }
    Ok(errors)
}

/// Averages [`run_trial`] over `config.trials` independent trials (in parallel).
pub fn run_mc(config: &McConfig) -> Result<MseCurve> {
    config.validate()?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;
    let len = config.n_max + 1;
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    for errors in &per_trial {
        for (k, e) in errors.iter().enumerate() {
            sum[k] += e;
            sum_sq[k] += e * e;
        }
    }
    let t = config.trials as f64;
    let mse: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let std_err = mse
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| {
            if config.trials < 2 {
                return 0.0;
            }
            let var = ((s2 - t * m * m) / (t - 1.0)).max(0.0);
            (var / t).sqrt()
        })
        .collect();
    Ok(MseCurve { n: (0..len).collect(), mse, std_err, trials: config.trials })
}

/// Least-squares slope of `ln(mse)` against `n` over the points with `n` in
/// `window` and a positive MSE.
pub fn fit_decay_rate(curve: &MseCurve, window: RangeInclusive<usize>) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .n
        .iter()
        .zip(&curve.mse)
        .filter(|(n, m)| window.contains(n) && **m > 0.0)
        .map(|(&n, &m)| (n as f64, m.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData { usable: pts.len(), needed: 3 });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Row of the analysis CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub mse: f64,
    pub bound: f64,
    pub trials: usize,
    pub epsilon: f64,
    pub dims: usize,
}

/// Pairs an MSE curve with the bound calibrated at `n = 0`.
pub fn curve_rows(curve: &MseCurve, config: &McConfig) -> Result<Vec<CurveRow>> {
    let params = BoundParams::new(calibrate_k(curve, config.dims)?, config.dims, config.eps_true)?;
    Ok(curve
        .n
        .iter()
        .zip(&curve.mse)
        .map(|(&n, &mse)| CurveRow {
            n,
            mse,
            bound: mse_lower_bound(n, &params),
            trials: curve.trials,
            epsilon: config.eps_true,
            dims: config.dims,
        })
        .collect())
}
