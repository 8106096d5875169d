use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Granularity, Oracle, OracleResponse, OracleStats};
use crate::engine::QueryRegion;
use crate::geometry::{Point, Rect};
use crate::{Error, Result};

/// Binary symmetric channel: the truthful answer flipped with probability
/// `eps_true`, reported with confidence `[1 - eps_true, eps_true]` in favor of
/// the emitted label.
#[derive(Debug, Clone)]
pub struct BscOracle {
    target: Point,
    eps_true: f64,
    granularity: Granularity,
    rng: ChaCha8Rng,
    stats: OracleStats,
}

impl BscOracle {
    pub fn new(target: Point, eps_true: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps_true) {
            return Err(Error::invalid(format!("eps_true {eps_true} outside [0, 0.5)")));
        }
        Ok(Self {
            target,
            eps_true,
            granularity: Granularity::Region,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: OracleStats::default(),
        })
    }

    /// Answer per square block instead of once per region.
    pub fn per_block(mut self) -> Self {
        self.granularity = Granularity::Block;
        self
    }

    pub fn target(&self) -> Point {
        self.target
    }

    /// Truth is whether the target coordinate on the region's axis lies in
    /// the region's interval.
    pub fn query_region(&mut self, region: &QueryRegion) -> OracleResponse {
        let (lo, hi) = region.rect.interval(region.axis);
        let truth = (lo..=hi).contains(&self.target.coord(region.axis));
        self.emit(truth)
    }

    fn emit(&mut self, truth: bool) -> OracleResponse {
        self.stats.calls += 1;
        let flipped = self.eps_true > 0.0 && self.rng.gen_bool(self.eps_true);
        OracleResponse::with_winner(truth ^ flipped, 1.0 - self.eps_true)
    }
}

impl Oracle for BscOracle {
    fn granularity(&self) -> Granularity {
        self.granularity
    }

    fn query(&mut self, rect: &Rect) -> Result<OracleResponse> {
        let truth = rect.contains(self.target);
        Ok(self.emit(truth))
    }

    fn stats(&self) -> OracleStats {
        self.stats
    }
}
