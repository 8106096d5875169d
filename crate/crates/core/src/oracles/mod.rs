//! Noisy classification oracles.
//!
//! An oracle answers "is the object center inside this rectangle?" with a
//! confidence pair `[p_obj, p_bg]`. Three implementations ship here:
//!
//! - [`BscOracle`]: the idealized binary symmetric channel. Every answer is
//!   flipped with a fixed probability and reports exactly that probability.
//! - [`BlockTruthOracle`]: pixel ground truth against a [`Scene`](crate::scene::Scene),
//!   with label flips and a randomized winning confidence. Stands in for a
//!   trained classifier.
//! - [`ExternalOracle`]: forwards resized block rasters to an out-of-process
//!   classifier over the newline-delimited JSON protocol in [`protocol`].
//!
//! Responses coming from anywhere are validated before they reach the posterior.

mod block_truth;
mod bsc;
mod external;
pub mod protocol;

pub use block_truth::{BlockTruthOracle, DEFAULT_CONF_FLOOR};
pub use bsc::BscOracle;
pub use external::{Endpoint, ExternalClient, ExternalOracle};

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::{Error, Result};

/// Allowed deviation of `p_obj + p_bg` from 1 for responses.
pub const CONFIDENCE_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    /// `true` = object present.
    pub label: bool,
    /// `[p_obj, p_bg]`
    pub confidence: [f64; 2],
}

impl OracleResponse {
    /// Builds a response whose label is the argmax of the pair. A tie counts
    /// as background.
    pub fn from_confidence(p_obj: f64, p_bg: f64) -> Result<Self> {
        let r = Self { label: p_obj > p_bg, confidence: [p_obj, p_bg] };
        r.validate()?;
        Ok(r)
    }

    /// Response for `label` with the winning class at `confidence`.
    pub(crate) fn with_winner(label: bool, confidence: f64) -> Self {
        let loser = 1.0 - confidence;
        let pair = if label { [confidence, loser] } else { [loser, confidence] };
        Self { label, confidence: pair }
    }

    pub fn p_obj(&self) -> f64 {
        self.confidence[0]
    }

    pub fn p_bg(&self) -> f64 {
        self.confidence[1]
    }

    /// Checks the confidence pair is finite, non-negative and sums to 1.
    pub fn validate(&self) -> Result<()> {
        let [p_obj, p_bg] = self.confidence;
        if !p_obj.is_finite() || !p_bg.is_finite() || p_obj < 0.0 || p_bg < 0.0 {
            return Err(Error::invalid(format!("malformed confidence pair [{p_obj}, {p_bg}]")));
        }
        if ((p_obj + p_bg) - 1.0).abs() > CONFIDENCE_SUM_TOL {
            return Err(Error::invalid(format!(
                "confidence pair [{p_obj}, {p_bg}] does not sum to 1"
            )));
        }
        Ok(())
    }

    /// Estimated probability that this response is wrong.
    pub fn error_probability(&self) -> f64 {
        1.0 - self.p_obj().max(self.p_bg())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleStats {
    pub calls: u64,
}

/// What an oracle wants to be asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// One call per query region.
    Region,
    /// One call per square block of the query region.
    Block,
}

pub trait Oracle {
    fn granularity(&self) -> Granularity;

    /// Classifies one rectangle. Each invocation is one classifier call.
    fn query(&mut self, rect: &Rect) -> Result<OracleResponse>;

    fn stats(&self) -> OracleStats;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn granularity(&self) -> Granularity {
        (**self).granularity()
    }

    fn query(&mut self, rect: &Rect) -> Result<OracleResponse> {
        (**self).query(rect)
    }

    fn stats(&self) -> OracleStats {
        (**self).stats()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn granularity(&self) -> Granularity {
        (**self).granularity()
    }

    fn query(&mut self, rect: &Rect) -> Result<OracleResponse> {
        (**self).query(rect)
    }

    fn stats(&self) -> OracleStats {
        (**self).stats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_is_argmax() {
        assert!(OracleResponse::from_confidence(0.8, 0.2).unwrap().label);
        assert!(!OracleResponse::from_confidence(0.2, 0.8).unwrap().label);
        assert!(!OracleResponse::from_confidence(0.5, 0.5).unwrap().label);
    }

    #[test]
    fn rejects_malformed_pairs() {
        assert!(OracleResponse::from_confidence(0.8, 0.3).is_err());
        assert!(OracleResponse::from_confidence(-0.1, 1.1).is_err());
        assert!(OracleResponse::from_confidence(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn error_probability_is_complement_of_winner() {
        let r = OracleResponse::from_confidence(0.3, 0.7).unwrap();
        assert!((r.error_probability() - 0.3).abs() < 1e-12);
    }
}
