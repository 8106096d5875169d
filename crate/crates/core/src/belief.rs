//! Per-axis posterior over the object-center coordinate.
//!
//! A [`Belief`] is a probability mass function over bins `1..=N`. It starts
//! uniform and is reweighted after every oracle response by the binary
//! symmetric channel likelihood:
//!
//! ```text
//! f1(y) = (1 - eps)^[y = 1] * eps^[y = 0]      for bins inside the queried interval
//! f0(y) = 1 - f1(y)                             for bins outside
//! p'[u] = p[u] * 2 f(u, y)                      then renormalized
//! ```
//!
//! The factor 2 alone only keeps the mass normalized when the queried
//! interval holds exactly half of it, so every update renormalizes.

use serde::Serialize;

use crate::{Error, Result};

/// Lower clamp on the fused error probability; the upper clamp is `0.5 - EPS_MIN`.
pub const EPS_MIN: f64 = 1e-3;

/// Slack for comparing cumulative sums against 1/2 and 0.95.
const CUM_TOL: f64 = 1e-12;

/// Clamps an error probability into `[EPS_MIN, 0.5 - EPS_MIN]`.
pub fn clamp_epsilon(eps: f64) -> f64 {
    eps.clamp(EPS_MIN, 0.5 - EPS_MIN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    mass: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeliefSummary {
    pub median_bin: usize,
    pub map_bin: usize,
    pub map_mass: f64,
    /// In bins squared, about the mean bin index.
    pub variance: f64,
    /// Width of the shortest contiguous interval holding at least 95% of the mass.
    pub credible_width_95: usize,
}

impl Belief {
    pub fn uniform(n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid(format!("a belief needs at least 2 bins, got {n_bins}")));
        }
        Ok(Self { mass: vec![1.0 / n_bins as f64; n_bins] })
    }

    /// Builds a belief from arbitrary non-negative weights, normalizing them.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid(format!("a belief needs at least 2 bins, got {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("belief weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("belief weights sum to zero"));
        }
        Ok(Self { mass: weights.into_iter().map(|w| w / total).collect() })
    }

    /// All mass on `bin` (1-indexed).
    pub fn point_mass(n_bins: usize, bin: usize) -> Result<Self> {
        if bin == 0 || bin > n_bins {
            return Err(Error::invalid(format!("bin {bin} outside 1..={n_bins}")));
        }
        let mut w = vec![0.0; n_bins];
        w[bin - 1] = 1.0;
        Self::from_weights(w)
    }

    pub fn n_bins(&self) -> usize {
        self.mass.len()
    }

    /// Mass vector; index 0 is bin 1.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Mass at a 1-indexed bin.
    pub fn mass_at(&self, bin: usize) -> f64 {
        self.mass[bin - 1]
    }

    /// Query point: the smallest `X` with `sum_{u <= X} p[u] > 1/2` (so that
    /// `sum_{u < X} p[u] <= 1/2`), clamped to `[1, N - 1]` so both
    /// `[1, X]` and `[X + 1, N]` are nonempty.
    pub fn bisection_point(&self) -> usize {
        let n = self.n_bins();
        let mut cum = 0.0;
        let mut x = n;
        for (i, p) in self.mass.iter().enumerate() {
            cum += p;
            if cum > 0.5 + CUM_TOL {
                x = i + 1;
                break;
            }
        }
        x.clamp(1, n - 1)
    }

    /// Reweights by the channel likelihood for a response `y` about the
    /// 1-indexed bin interval `[lo, hi]`, then renormalizes.
    pub fn update(&self, lo: usize, hi: usize, y: bool, epsilon: f64) -> Result<Belief> {
        let n = self.n_bins();
        if lo == 0 || hi < lo || hi > n {
            return Err(Error::invalid(format!("region [{lo},{hi}] is empty or outside 1..={n}")));
        }
        if !(EPS_MIN..=0.5 - EPS_MIN).contains(&epsilon) {
            return Err(Error::invalid(format!(
                "epsilon {epsilon} outside [{EPS_MIN}, {}]",
                0.5 - EPS_MIN
            )));
        }
        let f1 = if y { 1.0 - epsilon } else { epsilon };
        let f0 = 1.0 - f1;
        let mut mass: Vec<f64> = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let inside = (lo - 1..hi).contains(&i);
                p * 2.0 * if inside { f1 } else { f0 }
            })
            .collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|p| *p /= total);
        Ok(Belief { mass })
    }

    /// Smallest bin whose cumulative mass reaches 1/2.
    pub fn median_bin(&self) -> usize {
        let mut cum = 0.0;
        for (i, p) in self.mass.iter().enumerate() {
            cum += p;
            if cum >= 0.5 - CUM_TOL {
                return i + 1;
            }
        }
        self.n_bins()
    }

    /// Lowest-index maximizer and its mass.
    pub fn map_bin(&self) -> (usize, f64) {
        let mut best = (1, self.mass[0]);
        for (i, &p) in self.mass.iter().enumerate().skip(1) {
            if p > best.1 {
                best = (i + 1, p);
            }
        }
        best
    }

    /// Shortest window `[a, b]` with mass >= 0.95 (two-pointer scan).
    pub fn credible_width_95(&self) -> usize {
        let n = self.n_bins();
        let mut best = n;
        let mut lo = 0;
        let mut window = 0.0;
        for hi in 0..n {
            window += self.mass[hi];
            while lo < hi && window - self.mass[lo] >= 0.95 - CUM_TOL {
                window -= self.mass[lo];
                lo += 1;
            }
            if window >= 0.95 - CUM_TOL {
                best = best.min(hi - lo + 1);
            }
        }
        best
    }

    pub fn summarize(&self) -> BeliefSummary {
        let mean: f64 = self.mass.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        let variance = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = (i + 1) as f64 - mean;
                d * d * p
            })
            .sum::<f64>()
            .max(0.0);
        let (map_bin, map_mass) = self.map_bin();
        BeliefSummary {
            median_bin: self.median_bin(),
            map_bin,
            map_mass,
            variance,
            credible_width_95: self.credible_width_95(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_mass(b: &Belief, expected: &[f64], tol: f64) {
        assert_eq!(b.n_bins(), expected.len());
        for (got, want) in b.mass().iter().zip(expected) {
            assert_abs_diff_eq!(got, want, epsilon = tol);
        }
    }

    #[test]
    fn uniform_beliefs() {
        assert_mass(&Belief::uniform(4).unwrap(), &[0.25; 4], 0.0);
        assert_mass(&Belief::uniform(2).unwrap(), &[0.5, 0.5], 0.0);
        let total: f64 = Belief::uniform(1000).unwrap().mass().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        assert!(matches!(Belief::uniform(1), Err(Error::InvalidArgument(_))));
        assert!(Belief::uniform(0).is_err());
    }

    #[test]
    fn bisection_examples() {
        assert_eq!(Belief::uniform(10).unwrap().bisection_point(), 6);
        assert_eq!(Belief::uniform(300).unwrap().bisection_point(), 151);
        // point mass at 3 of 5
        assert_eq!(Belief::point_mass(5, 3).unwrap().bisection_point(), 3);
        let b = Belief::from_weights(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(b.bisection_point(), 3);
    }

    #[test]
    fn bisection_clamps_to_keep_both_sides_nonempty() {
        assert_eq!(Belief::point_mass(8, 8).unwrap().bisection_point(), 7);
        assert_eq!(Belief::point_mass(8, 1).unwrap().bisection_point(), 1);
    }

    #[test]
    fn update_examples() {
        let u = Belief::uniform(4).unwrap();
        assert_mass(&u.update(1, 2, true, 0.2).unwrap(), &[0.4, 0.4, 0.1, 0.1], 1e-12);
        assert_mass(&u.update(1, 2, false, 0.2).unwrap(), &[0.1, 0.1, 0.4, 0.4], 1e-12);
    }

    #[test]
    fn near_half_epsilon_is_uninformative() {
        let b = Belief::from_weights(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let after = b.update(2, 3, true, 0.5 - EPS_MIN).unwrap();
        assert_mass(&after, b.mass(), 2e-3);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let u = Belief::uniform(4).unwrap();
        assert!(u.update(0, 2, true, 0.2).is_err());
        assert!(u.update(3, 2, true, 0.2).is_err());
        assert!(u.update(1, 5, true, 0.2).is_err());
        assert!(u.update(1, 2, true, 0.0).is_err());
        assert!(u.update(1, 2, true, 0.5).is_err());
        assert!(u.update(1, 2, true, f64::NAN).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = Belief::uniform(10).unwrap().summarize();
        assert_eq!(s.median_bin, 5);
        assert_eq!(s.credible_width_95, 10);
        assert_abs_diff_eq!(s.variance, 99.0 / 12.0, epsilon = 1e-9);

        let s = Belief::point_mass(9, 7).unwrap().summarize();
        assert_eq!((s.median_bin, s.map_bin, s.credible_width_95), (7, 7, 1));
        assert_abs_diff_eq!(s.variance, 0.0);

        let s = Belief::from_weights(vec![0.4, 0.4, 0.1, 0.1]).unwrap().summarize();
        assert_eq!(s.median_bin, 2);
        assert_eq!(s.map_bin, 1);
    }

    #[test]
    fn credible_width_picks_shortest_window() {
        let b = Belief::from_weights(vec![0.01, 0.02, 0.5, 0.46, 0.01]).unwrap();
        assert_eq!(b.credible_width_95(), 2);
        let b = Belief::from_weights(vec![0.03, 0.0, 0.0, 0.94, 0.03]).unwrap();
        assert_eq!(b.credible_width_95(), 2);
    }

    #[test]
    fn exact_half_split_needs_no_renormalization() {
        let b = Belief::from_weights(vec![0.3, 0.2, 0.25, 0.25]).unwrap();
        let raw: f64 = b.mass()[..2].iter().map(|p| p * 2.0 * 0.7).sum::<f64>()
            + b.mass()[2..].iter().map(|p| p * 2.0 * 0.3).sum::<f64>();
        assert_abs_diff_eq!(raw, 1.0, epsilon = 1e-12);
    }

    fn arb_belief() -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.001f64..1.0, 2..64).prop_map(|w| Belief::from_weights(w).unwrap())
    }

    proptest! {
        #[test]
        fn update_preserves_invariants(
            b in arb_belief(),
            a in 0usize..64,
            len in 0usize..64,
            y: bool,
            eps in EPS_MIN..(0.5 - EPS_MIN),
        ) {
            let n = b.n_bins();
            let lo = a % n + 1;
            let hi = (lo + len % n).min(n);
            let after = b.update(lo, hi, y, eps).unwrap();
            let total: f64 = after.mass().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(after.mass().iter().all(|p| p.is_finite() && *p >= 0.0));
            let x = after.bisection_point();
            prop_assert!((1..n).contains(&x));

            // within-side ratios are untouched
            let inside = |i: usize| (lo - 1..hi).contains(&i);
            for i in 0..n {
                for j in (i + 1)..n {
                    if inside(i) == inside(j) {
                        let before = b.mass()[i] * after.mass()[j];
                        let now = after.mass()[i] * b.mass()[j];
                        prop_assert!((before - now).abs() <= 1e-12 * before.abs().max(1e-300));
                    }
                }
            }
        }

        #[test]
        fn opposite_responses_swap_multipliers(
            b in arb_belief(),
            eps in EPS_MIN..(0.5 - EPS_MIN),
        ) {
            let n = b.n_bins();
            let hi = n / 2;
            let pos = b.update(1, hi, true, eps).unwrap();
            let neg = b.update(1, hi, false, eps).unwrap();
            // in-region / out-of-region multiplier ratio is (1-eps)/eps vs eps/(1-eps)
            let r = |a: &Belief| (a.mass()[0] / b.mass()[0]) / (a.mass()[n - 1] / b.mass()[n - 1]);
            let expected = (1.0 - eps) / eps;
            prop_assert!((r(&pos) / expected - 1.0).abs() < 1e-9);
            prop_assert!((r(&neg) * expected - 1.0).abs() < 1e-9);
        }

        #[test]
        fn summary_stays_in_range(b in arb_belief()) {
            let s = b.summarize();
            let n = b.n_bins();
            prop_assert!((1..=n).contains(&s.median_bin));
            prop_assert!((1..=n).contains(&s.map_bin));
            prop_assert!((1..=n).contains(&s.credible_width_95));
            prop_assert!(s.variance >= 0.0);
        }
    }
}
