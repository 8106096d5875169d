use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Granularity, Oracle, OracleResponse, OracleStats};
use crate::geometry::Rect;
use crate::scene::Scene;
use crate::{Error, Result};

pub const DEFAULT_CONF_FLOOR: f64 = 0.75;

/// Simulated block classifier backed by the scene's ground truth.
///
/// A block is positive iff the target center lies inside it. The label is
/// flipped with probability `eps_true` and the winning confidence is drawn
/// uniformly from `[conf_floor, 1]`.
#[derive(Debug, Clone)]
pub struct BlockTruthOracle<'a> {
    scene: &'a Scene,
    eps_true: f64,
    conf_floor: f64,
    rng: ChaCha8Rng,
    stats: OracleStats,
}

impl<'a> BlockTruthOracle<'a> {
    pub fn new(scene: &'a Scene, eps_true: f64, conf_floor: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps_true) {
            return Err(Error::invalid(format!("eps_true {eps_true} outside [0, 0.5)")));
        }
        if !(conf_floor > 0.5 && conf_floor < 1.0) {
            return Err(Error::invalid(format!("conf_floor {conf_floor} outside (0.5, 1)")));
        }
        Ok(Self {
            scene,
            eps_true,
            conf_floor,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: OracleStats::default(),
        })
    }

    pub fn query_block(&mut self, rect: &Rect) -> Result<OracleResponse> {
        if !rect.within(self.scene.dims()) {
            return Err(Error::invalid(format!("block {rect} outside scene {}", self.scene.dims())));
        }
        self.stats.calls += 1;
        let truth = rect.contains(self.scene.target_center());
        let flipped = self.eps_true > 0.0 && self.rng.gen_bool(self.eps_true);
        let confidence = self.rng.gen_range(self.conf_floor..=1.0);
        Ok(OracleResponse::with_winner(truth ^ flipped, confidence))
    }
}

impl Oracle for BlockTruthOracle<'_> {
    fn granularity(&self) -> Granularity {
        Granularity::Block
    }

    fn query(&mut self, rect: &Rect) -> Result<OracleResponse> {
        self.query_block(rect)
    }

    fn stats(&self) -> OracleStats {
        self.stats
    }
}
