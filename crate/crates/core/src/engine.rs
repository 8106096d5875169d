//! The localization loop.
//!
//! Each iteration works on one axis, alternating rows and cols:
//!
//! 1. bisect that axis' belief to get the split bin `X`;
//! 2. pick the low side `[1, X]` or the high side `[X + 1, N]` with
//!    probability 1/2 each; the query region spans the other axis fully;
//! 3. cut the region into square blocks of side `min(height, width)` and
//!    classify each block (or the whole region, for region-level oracles);
//! 4. fuse the responses into `(y, epsilon)` and update the belief.
//!
//! The loop stops once both axes are concentrated (a bin holding at least
//! `stop_map_mass`, or a 95% credible interval no wider than
//! `stop_credible_width`) or after `max_iterations`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{clamp_epsilon, Belief, BeliefSummary};
use crate::geometry::{Axis, Dims, Point, Rect, Side};
use crate::oracles::{Granularity, Oracle, OracleResponse};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRegion {
    pub axis: Axis,
    pub split_bin: usize,
    pub side: Side,
    pub rect: Rect,
}

impl QueryRegion {
    /// The region on `side` of `split_bin` along `axis`, spanning the other
    /// axis fully.
    pub fn new(axis: Axis, split_bin: usize, side: Side, dims: Dims) -> Result<Self> {
        let n = dims.extent(axis);
        if split_bin == 0 || split_bin >= n {
            return Err(Error::invalid(format!("split bin {split_bin} outside [1, {}]", n.saturating_sub(1))));
        }
        let (lo, hi) = match side {
            Side::Low => (1, split_bin),
            Side::High => (split_bin + 1, n),
        };
        let rect = match axis {
            Axis::Rows => Rect::new(lo, hi, 1, dims.cols),
            Axis::Cols => Rect::new(1, dims.rows, lo, hi),
        };
        Ok(Self { axis, split_bin, side, rect })
    }

    /// Bin interval on the queried axis.
    pub fn interval(&self) -> (usize, usize) {
        self.rect.interval(self.axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub rect: Rect,
    /// 1-based position within the region.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedResponse {
    pub y: bool,
    /// Clamped to `[EPS_MIN, 0.5 - EPS_MIN]`.
    pub epsilon: f64,
    pub per_block: Vec<OracleResponse>,
    /// 1-based indices of blocks whose `p_obj > p_bg`.
    pub positive_set: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub max_iterations: usize,
    pub stop_map_mass: f64,
    pub stop_credible_width: usize,
    pub rng_seed: u64,
    /// Square input side blocks are resized to before classification.
    pub block_input_side: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            stop_map_mass: 0.99,
            stop_credible_width: 3,
            rng_seed: 0,
            block_input_side: 100,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.stop_map_mass > 0.5 && self.stop_map_mass < 1.0) {
            return Err(Error::invalid(format!("stop_map_mass {} outside (0.5, 1)", self.stop_map_mass)));
        }
        if self.stop_credible_width < 1 {
            return Err(Error::invalid("stop_credible_width must be at least 1"));
        }
        if self.block_input_side < 1 {
            return Err(Error::invalid("block_input_side must be at least 1"));
        }
        Ok(())
    }

    fn is_concentrated(&self, s: &BeliefSummary) -> bool {
        s.map_mass >= self.stop_map_mass || s.credible_width_95 <= self.stop_credible_width
    }
}

/// One CSV row per iteration; field order is the trace file's column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub axis: Axis,
    pub split_bin: usize,
    pub side: Side,
    pub q_blocks: usize,
    pub y: u8,
    pub epsilon: f64,
    pub calls_cum: u64,
    pub median_row: usize,
    pub median_col: usize,
    pub map_row: usize,
    pub map_col: usize,
    pub var_row: f64,
    pub var_col: f64,
    pub width95_row: usize,
    pub width95_col: usize,
}

pub type RunTrace = Vec<TraceRow>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    /// Hit `max_iterations` before both axes concentrated.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    /// Per-axis median bins.
    pub center: Point,
    pub iterations_used: usize,
    pub oracle_calls: u64,
    pub status: RunStatus,
    pub trace: RunTrace,
    pub beliefs: AxisBeliefs,
}

impl LocalizationResult {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisBeliefs {
    pub rows: Belief,
    pub cols: Belief,
}

impl AxisBeliefs {
    pub fn uniform(dims: Dims) -> Result<Self> {
        Ok(Self { rows: Belief::uniform(dims.rows)?, cols: Belief::uniform(dims.cols)? })
    }

    pub fn get(&self, axis: Axis) -> &Belief {
        match axis {
            Axis::Rows => &self.rows,
            Axis::Cols => &self.cols,
        }
    }

    fn set(&mut self, axis: Axis, b: Belief) {
        match axis {
            Axis::Rows => self.rows = b,
            Axis::Cols => self.cols = b,
        }
    }

    pub fn median(&self) -> Point {
        Point::new(self.rows.median_bin(), self.cols.median_bin())
    }
}

/// Bisects `belief` and picks a side uniformly at random.
pub fn make_query<R: Rng + ?Sized>(belief: &Belief, axis: Axis, dims: Dims, rng: &mut R) -> Result<QueryRegion> {
    if belief.n_bins() != dims.extent(axis) {
        return Err(Error::invalid(format!(
            "belief has {} bins but the {axis} extent is {}",
            belief.n_bins(),
            dims.extent(axis)
        )));
    }
    let side = if rng.gen_bool(0.5) { Side::Low } else { Side::High };
    QueryRegion::new(axis, belief.bisection_point(), side, dims)
}

/// Tiles a rectangle with `m x m` squares, `m` its shorter side. Blocks sit
/// at offsets `0, m, 2m, ...` along the long side; the last one is pulled
/// back to end exactly at the boundary, overlapping its predecessor when `m`
/// does not divide the long side.
pub fn partition_rect(rect: &Rect) -> Result<Vec<Block>> {
    if rect.is_empty() {
        return Err(Error::invalid("cannot partition an empty region"));
    }
    let (h, w) = (rect.height(), rect.width());
    let m = h.min(w);
    let long = h.max(w);
    let q = long.div_ceil(m);
    let blocks = (0..q)
        .map(|k| {
            let offset = if k + 1 == q { long - m } else { k * m };
            let rect = if w >= h {
                Rect::square(rect.row_lo, rect.col_lo + offset, m)
            } else {
                Rect::square(rect.row_lo + offset, rect.col_lo, m)
            };
            Block { rect, index: k + 1 }
        })
        .collect();
    Ok(blocks)
}

pub fn partition_blocks(region: &QueryRegion) -> Result<Vec<Block>> {
    partition_rect(&region.rect)
}

/// Fuses per-block responses. Labels are recomputed as the argmax of each
/// confidence pair. If any block is positive, `y = 1` and `epsilon` is the
/// smallest error probability among positive blocks; otherwise `y = 0` and
/// `epsilon` is the smallest over all blocks.
pub fn fuse_responses(per_block: &[OracleResponse]) -> Result<FusedResponse> {
    if per_block.is_empty() {
        return Err(Error::invalid("no block responses to fuse"));
    }
    let mut responses = Vec::with_capacity(per_block.len());
    for r in per_block {
        responses.push(OracleResponse::from_confidence(r.p_obj(), r.p_bg())?);
    }
    let positive_set: Vec<usize> =
        responses.iter().enumerate().filter(|(_, r)| r.label).map(|(i, _)| i + 1).collect();
    let min_eps = |it: &mut dyn Iterator<Item = &OracleResponse>| {
        it.map(OracleResponse::error_probability).fold(f64::INFINITY, f64::min)
    };
    let (y, raw) = if positive_set.is_empty() {
        (false, min_eps(&mut responses.iter()))
    } else {
        (true, min_eps(&mut positive_set.iter().map(|&i| &responses[i - 1])))
    };
    Ok(FusedResponse { y, epsilon: clamp_epsilon(raw), per_block: responses, positive_set })
}

/// Outcome of querying one region and updating that axis' belief.
#[derive(Debug, Clone)]
pub struct Observation {
    pub belief: Belief,
    pub fused: FusedResponse,
    /// Oracle calls spent on this query.
    pub q_blocks: usize,
}

/// Classifies `region` with `oracle` and returns the updated belief for the
/// region's axis.
pub fn observe<O: Oracle + ?Sized>(belief: &Belief, region: &QueryRegion, oracle: &mut O) -> Result<Observation> {
    let responses = match oracle.granularity() {
        Granularity::Region => vec![oracle.query(&region.rect)?],
        Granularity::Block => partition_blocks(region)?
            .iter()
            .map(|b| oracle.query(&b.rect))
            .collect::<Result<Vec<_>>>()?,
    };
    let fused = fuse_responses(&responses)?;
    let (lo, hi) = region.interval();
    let belief = belief.update(lo, hi, fused.y, fused.epsilon)?;
    Ok(Observation { belief, fused, q_blocks: responses.len() })
}

/// Search state carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub beliefs: AxisBeliefs,
    pub iteration: usize,
    pub calls: u64,
}

impl SearchState {
    pub fn new(dims: Dims) -> Result<Self> {
        Ok(Self { beliefs: AxisBeliefs::uniform(dims)?, iteration: 0, calls: 0 })
    }
}

/// Runs one query on `axis` against an already formed region.
pub fn step_with_region<O: Oracle + ?Sized>(
    state: &SearchState,
    region: &QueryRegion,
    oracle: &mut O,
) -> Result<(SearchState, TraceRow)> {
    let Observation { belief, fused, q_blocks } = observe(state.beliefs.get(region.axis), region, oracle)?;
    let mut beliefs = state.beliefs.clone();
    beliefs.set(region.axis, belief);
    let next = SearchState { beliefs, iteration: state.iteration + 1, calls: state.calls + q_blocks as u64 };
    let row = trace_row(&next, region, &fused, q_blocks);
    Ok((next, row))
}

/// One iteration on `axis`: form a random-side query, classify, update.
pub fn step<O: Oracle + ?Sized, R: Rng + ?Sized>(
    state: &SearchState,
    axis: Axis,
    oracle: &mut O,
    dims: Dims,
    rng: &mut R,
) -> Result<(SearchState, TraceRow)> {
    let region = make_query(state.beliefs.get(axis), axis, dims, rng)?;
    step_with_region(state, &region, oracle)
}

fn trace_row(state: &SearchState, region: &QueryRegion, fused: &FusedResponse, q_blocks: usize) -> TraceRow {
    let r = state.beliefs.rows.summarize();
    let c = state.beliefs.cols.summarize();
    TraceRow {
        t: state.iteration,
        axis: region.axis,
        split_bin: region.split_bin,
        side: region.side,
        q_blocks,
        y: fused.y as u8,
        epsilon: fused.epsilon,
        calls_cum: state.calls,
        median_row: r.median_bin,
        median_col: c.median_bin,
        map_row: r.map_bin,
        map_col: c.map_bin,
        var_row: r.variance,
        var_col: c.variance,
        width95_row: r.credible_width_95,
        width95_col: c.credible_width_95,
    }
}

/// Localizes the object in a `dims` image, alternating rows and cols.
pub fn run<O: Oracle + ?Sized>(dims: Dims, oracle: &mut O, config: &EngineConfig) -> Result<LocalizationResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut state = SearchState::new(dims)?;
    let mut trace = Vec::new();
    let mut axis = Axis::Rows;
    let mut status = RunStatus::MaxIterations;
    while state.iteration < config.max_iterations {
        let (next, row) = step(&state, axis, oracle, dims, &mut rng)?;
        state = next;
        trace.push(row);
        axis = axis.other();
        let rows = state.beliefs.rows.summarize();
        let cols = state.beliefs.cols.summarize();
        if config.is_concentrated(&rows) && config.is_concentrated(&cols) {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(LocalizationResult {
        center: state.beliefs.median(),
        iterations_used: state.iteration,
        oracle_calls: state.calls,
        status,
        trace,
        beliefs: state.beliefs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::EPS_MIN;
    use crate::oracles::BscOracle;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn resp(p_obj: f64, p_bg: f64) -> OracleResponse {
        OracleResponse { label: false, confidence: [p_obj, p_bg] }
    }

    #[test]
    fn make_query_low_side_on_uniform_cols() {
        let dims = Dims::new(200, 300).unwrap();
        let b = Belief::uniform(300).unwrap();
        let split = b.bisection_point();
        assert_eq!(split, 151);
        let q = QueryRegion::new(Axis::Cols, split, Side::Low, dims).unwrap();
        assert_eq!(q.rect, Rect::new(1, 200, 1, 151));
        let q = QueryRegion::new(Axis::Cols, split, Side::High, dims).unwrap();
        assert_eq!(q.rect, Rect::new(1, 200, 152, 300));
    }

    #[test]
    fn make_query_clamps_at_edge() {
        let dims = Dims::new(10, 8).unwrap();
        let b = Belief::point_mass(8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = make_query(&b, Axis::Cols, dims, &mut rng).unwrap();
        assert_eq!(q.split_bin, 1);
        let low = QueryRegion::new(Axis::Cols, 1, Side::Low, dims).unwrap();
        assert_eq!(low.interval(), (1, 1));
    }

    #[test]
    fn make_query_checks_belief_size() {
        let dims = Dims::new(10, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_query(&Belief::uniform(9).unwrap(), Axis::Cols, dims, &mut rng).is_err());
    }

    #[test]
    fn side_sequence_is_seeded() {
        let dims = Dims::new(50, 50).unwrap();
        let b = Belief::uniform(50).unwrap();
        let sides = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| make_query(&b, Axis::Rows, dims, &mut rng).unwrap().side).collect::<Vec<_>>()
        };
        assert_eq!(sides(42), sides(42));
        assert_ne!(sides(42), sides(43));
    }

    #[test]
    fn side_selection_is_fair() {
        let dims = Dims::new(50, 50).unwrap();
        let b = Belief::uniform(50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let lows = (0..10_000)
            .filter(|_| make_query(&b, Axis::Rows, dims, &mut rng).unwrap().side == Side::Low)
            .count();
        let freq = lows as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "low frequency {freq}");
    }

    #[test]
    fn partition_examples() {
        // 100 rows x 300 cols: three blocks along the columns
        let blocks = partition_rect(&Rect::new(1, 100, 1, 300)).unwrap();
        let cols: Vec<_> = blocks.iter().map(|b| b.rect.col_lo - 1).collect();
        assert_eq!(cols, vec![0, 100, 200]);
        assert!(blocks.iter().all(|b| b.rect.height() == 100 && b.rect.is_square()));

        let blocks = partition_rect(&Rect::new(5, 104, 7, 106)).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].rect, Rect::new(5, 104, 7, 106));

        // 250 x 100: last block end-aligned, overlapping by 50
        let blocks = partition_rect(&Rect::new(1, 250, 1, 100)).unwrap();
        let rows: Vec<_> = blocks.iter().map(|b| b.rect.row_lo - 1).collect();
        assert_eq!(rows, vec![0, 100, 150]);
        assert_eq!(blocks.iter().map(|b| b.index).collect::<Vec<_>>(), vec![1, 2, 3]);

        assert!(partition_rect(&Rect::new(3, 2, 1, 1)).is_err());
    }

    #[test]
    fn fuse_examples() {
        let f = fuse_responses(&[resp(0.9, 0.1), resp(0.3, 0.7)]).unwrap();
        assert!(f.y);
        assert!((f.epsilon - 0.1).abs() < 1e-12);
        assert_eq!(f.positive_set, vec![1]);

        let f = fuse_responses(&[resp(0.2, 0.8), resp(0.4, 0.6)]).unwrap();
        assert!(!f.y);
        assert!((f.epsilon - 0.2).abs() < 1e-12);
        assert!(f.positive_set.is_empty());

        let f = fuse_responses(&[resp(1.0, 0.0)]).unwrap();
        assert!(f.y);
        assert_eq!(f.epsilon, EPS_MIN);
    }

    #[test]
    fn fuse_recomputes_labels_and_validates() {
        let f = fuse_responses(&[OracleResponse { label: true, confidence: [0.2, 0.8] }]).unwrap();
        assert!(!f.y);
        assert!(!f.per_block[0].label);
        assert!(fuse_responses(&[]).is_err());
        assert!(fuse_responses(&[resp(0.9, 0.2)]).is_err());
        assert!(fuse_responses(&[resp(-0.5, 1.5)]).is_err());
    }

    #[test]
    fn fuse_prefers_positive_blocks_even_when_less_confident() {
        let f = fuse_responses(&[resp(0.01, 0.99), resp(0.6, 0.4)]).unwrap();
        assert!(f.y);
        assert!((f.epsilon - 0.4).abs() < 1e-12);
    }

    #[test]
    fn step_touches_only_the_queried_axis() {
        let dims = Dims::new(4, 4).unwrap();
        let state = SearchState::new(dims).unwrap();
        let region = QueryRegion::new(Axis::Cols, 2, Side::Low, dims).unwrap();
        let mut oracle = BscOracle::new(Point::new(3, 1), 0.0, 0).unwrap();
        let (next, row) = step_with_region(&state, &region, &mut oracle).unwrap();
        assert_eq!(next.beliefs.rows, state.beliefs.rows);
        assert_ne!(next.beliefs.cols, state.beliefs.cols);
        assert_eq!((row.t, row.q_blocks, row.y, row.calls_cum), (1, 1, 1, 1));
    }

    #[test]
    fn step_with_eps_point_two_channel() {
        struct Fixed;
        impl Oracle for Fixed {
            fn granularity(&self) -> Granularity {
                Granularity::Region
            }
            fn query(&mut self, _: &Rect) -> Result<OracleResponse> {
                OracleResponse::from_confidence(0.8, 0.2)
            }
            fn stats(&self) -> crate::oracles::OracleStats {
                Default::default()
            }
        }
        let dims = Dims::new(4, 4).unwrap();
        let state = SearchState::new(dims).unwrap();
        let region = QueryRegion::new(Axis::Cols, 2, Side::Low, dims).unwrap();
        let (next, _) = step_with_region(&state, &region, &mut Fixed).unwrap();
        for (got, want) in next.beliefs.cols.mass().iter().zip([0.4, 0.4, 0.1, 0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn truthful_oracle_agrees_with_low_side() {
        let dims = Dims::new(64, 64).unwrap();
        let target = Point::new(10, 12);
        let mut oracle = BscOracle::new(target, 0.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = SearchState::new(dims).unwrap();
        for i in 0..20 {
            let axis = if i % 2 == 0 { Axis::Rows } else { Axis::Cols };
            let region = make_query(state.beliefs.get(axis), axis, dims, &mut rng).unwrap();
            let (next, row) = step_with_region(&state, &region, &mut oracle).unwrap();
            let truth = region.rect.contains(target);
            assert_eq!(row.y == 1, truth);
            state = next;
        }
    }

    #[test]
    fn run_finds_target_with_truthful_oracle() {
        let dims = Dims::new(256, 256).unwrap();
        let target = Point::new(100, 41);
        let mut oracle = BscOracle::new(target, 0.0, 1).unwrap();
        let res = run(dims, &mut oracle, &EngineConfig::default()).unwrap();
        assert!(res.converged());
        assert!(res.iterations_used <= 60, "{} iterations", res.iterations_used);
        assert!(res.center.row.abs_diff(100) <= 1 && res.center.col.abs_diff(41) <= 1, "{:?}", res.center);
        assert_eq!(res.oracle_calls, oracle.stats().calls);
    }

    #[test]
    fn single_iteration_is_flagged() {
        let dims = Dims::new(32, 32).unwrap();
        let mut oracle = BscOracle::new(Point::new(5, 5), 0.0, 1).unwrap();
        let config = EngineConfig { max_iterations: 1, ..Default::default() };
        let res = run(dims, &mut oracle, &config).unwrap();
        assert_eq!(res.iterations_used, 1);
        assert_eq!(res.status, RunStatus::MaxIterations);
        let config = EngineConfig { max_iterations: 0, ..Default::default() };
        assert!(run(dims, &mut oracle, &config).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        assert!(EngineConfig { stop_map_mass: 0.5, ..Default::default() }.validate().is_err());
        assert!(EngineConfig { stop_map_mass: 1.0, ..Default::default() }.validate().is_err());
        assert!(EngineConfig { stop_credible_width: 0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn blocks_cover_region_exactly(
            r0 in 1usize..5, c0 in 1usize..5, h in 1usize..30, w in 1usize..30,
        ) {
            let rect = Rect::new(r0, r0 + h - 1, c0, c0 + w - 1);
            let blocks = partition_rect(&rect).unwrap();
            let m = h.min(w);
            prop_assert_eq!(blocks.len(), h.max(w).div_ceil(m));
            let mut covered = HashSet::new();
            for b in &blocks {
                prop_assert!(b.rect.is_square());
                prop_assert!(rect.contains_rect(&b.rect));
                for r in b.rect.row_lo..=b.rect.row_hi {
                    for c in b.rect.col_lo..=b.rect.col_hi {
                        covered.insert((r, c));
                    }
                }
            }
            prop_assert_eq!(covered.len(), h * w);
        }
    }
}
