//! Every constant the learners use, computed from their accuracy targets.
//! Fields are public so experiments can rescale any of them.

use serde::Serialize;

use super::{check_unit, LearnError};
use crate::cube::binomial_coefficient;
use crate::estimation::levels_for_threshold;

/// Upper bound on the estimates a lattice search over `candidates`
/// coordinates can make when every estimate is within `tolerance`: kept sets
/// have true coefficient at least `keep − tolerance`, so at most
/// `2/(keep − tolerance)` of them exist, and each (plus `∅`) spawns at most
/// `candidates` children. Also capped by the lattice size up to `levels`.
pub fn pool_bound(candidates: usize, keep: f64, tolerance: f64, levels: usize) -> u64 {
    let lattice: f64 = (0..=levels.min(candidates)).map(|t| binomial_coefficient(candidates, t)).sum();
    let by_norm = if keep > tolerance {
        1.0 + (1.0 + (2.0 / (keep - tolerance)).floor()) * candidates as f64
    } else {
        f64::INFINITY
    };
    lattice.min(by_norm).min(u64::MAX as f64) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacParams {
    pub accuracy: f64,
    /// θ, the keep threshold of both phases.
    pub threshold: f64,
    /// Half-width of every coefficient estimate.
    pub tolerance: f64,
    /// Failure budget of the singleton screen, split evenly over `n`.
    pub screen_failure: f64,
    /// Failure budget of the lattice search, split over [`pool_bound`].
    pub search_failure: f64,
    pub max_level: usize,
}

impl PacParams {
    pub fn new(accuracy: f64) -> Result<Self, LearnError> {
        check_unit("accuracy", accuracy)?;
        let threshold = accuracy * accuracy / 6.0;
        Ok(PacParams {
            accuracy,
            threshold,
            tolerance: threshold / 2.0,
            screen_failure: 1.0 / 6.0,
            search_failure: 1.0 / 6.0,
            max_level: levels_for_threshold(threshold),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmacParams {
    pub gamma: f64,
    pub delta: f64,
    /// Recursion stops once the level exceeds this.
    pub max_depth: usize,
    /// Failure budget of every individual step.
    pub eta: f64,
    /// Examples whose largest label serves as `M̃`.
    pub max_samples: u64,
    /// Additive accuracy of the estimate of `Pr[c ≤ M̃/4]`.
    pub low_mass_tolerance: f64,
    /// Below this estimate the cube is handled by a single leaf.
    pub low_mass_cutoff: f64,
    pub leaf_accuracy: f64,
    pub leaf_shift: f64,
    /// Pivot search draws `⌈pivot_sample_factor · ln(n/η)⌉` examples.
    pub pivot_sample_factor: f64,
    /// A pivot needs all its `x_j = −1` labels at least `M̃/pivot_divisor`.
    pub pivot_divisor: f64,
    pub branch_accuracy: f64,
    pub branch_shift: f64,
    /// Independent learner runs per leaf; the best on held-out data wins.
    pub boost_runs: usize,
}

impl PmacParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self, LearnError> {
        check_unit("gamma", gamma)?;
        check_unit("delta", delta)?;
        let log3 = (3.0 / delta).log2();
        let eta = (1.0 / 18.0) / log3;
        let ln9 = (9.0 / delta).ln();
        Ok(PmacParams {
            gamma,
            delta,
            max_depth: log3.ceil() as usize,
            eta,
            max_samples: ((2.0 / eta).ln() / (4.0f64 / 3.0).ln()).ceil() as u64,
            low_mass_tolerance: delta / 9.0,
            low_mass_cutoff: 2.0 * delta / 9.0,
            leaf_accuracy: (gamma / 2.0) * (delta / 3.0) / 12.0,
            leaf_shift: gamma / 24.0,
            pivot_sample_factor: 3.0 / delta,
            pivot_divisor: 16.0 * ln9,
            branch_accuracy: (gamma / 2.0) * (delta / 3.0) / (48.0 * ln9),
            branch_shift: gamma / (96.0 * ln9),
            boost_runs: (8.0 * (2.0 / eta).ln()).ceil() as usize,
        })
    }

    pub fn pivot_samples(&self, dim: usize) -> u64 {
        (self.pivot_sample_factor * (dim as f64 / self.eta).ln()).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProperParams {
    pub accuracy: f64,
    /// θ for the singleton screen.
    pub threshold: f64,
    pub screen_tolerance: f64,
    /// `s_ε`, the size bound that sets the lattice thresholds.
    pub size: f64,
    pub keep_threshold: f64,
    pub search_tolerance: f64,
    pub max_level: usize,
    /// Failure budget of each of the three phases.
    pub phase_failure: f64,
    /// The fit uses at least `fit_sample_factor · |S| / ε²` examples.
    pub fit_sample_factor: f64,
}

impl ProperParams {
    /// `size_bound` is the caller's bound on the target's size, if any.
    pub fn new(accuracy: f64, size_bound: Option<f64>) -> Result<Self, LearnError> {
        check_unit("accuracy", accuracy)?;
        if let Some(s) = size_bound.filter(|s| !(*s >= 1.0)) {
            return Err(LearnError::BadParameter { name: "size_bound", value: s, expected: "must be at least 1" });
        }
        let e2 = accuracy * accuracy;
        let levels = (6.0 / accuracy).log2().ceil();
        let generic = (12.0 / accuracy).powf(levels);
        let size = size_bound.map_or(generic, |s| s.min(generic));
        let threshold = e2 / 108.0;
        Ok(ProperParams {
            accuracy,
            threshold,
            screen_tolerance: threshold / 2.0,
            size,
            keep_threshold: e2 / (54.0 * size),
            search_tolerance: e2 / (108.0 * size),
            max_level: levels as usize,
            phase_failure: 1.0 / 9.0,
            fit_sample_factor: 64.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgnosticParams {
    pub accuracy: f64,
    /// Largest parity degree in the basis.
    pub degree: usize,
    /// The fit uses `⌈sample_factor · features / ε²⌉` examples.
    pub sample_factor: f64,
}

impl AgnosticParams {
    pub fn new(accuracy: f64) -> Result<Self, LearnError> {
        check_unit("accuracy", accuracy)?;
        Ok(AgnosticParams { accuracy, degree: (3.0 / accuracy).log2().ceil() as usize, sample_factor: 64.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProperAgnosticParams {
    pub accuracy: f64,
    /// Lower bound on every coordinate's probability of either sign.
    pub kappa: f64,
    /// Longest disjunction in the basis, before capping at `n`.
    pub max_len: usize,
    pub sample_factor: f64,
}

impl ProperAgnosticParams {
    /// Truncation and regression each get half of `accuracy`.
    pub fn new(accuracy: f64, kappa: f64) -> Result<Self, LearnError> {
        check_unit("accuracy", accuracy)?;
        if !(kappa > 0.0 && kappa <= 0.5) {
            return Err(LearnError::BadParameter { name: "kappa", value: kappa, expected: "must lie in (0, 1/2]" });
        }
        Ok(ProperAgnosticParams {
            accuracy,
            kappa,
            max_len: super::truncation_length(kappa, accuracy / 2.0),
            sample_factor: 64.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pac_constants() {
        let p = PacParams::new(0.6).unwrap();
        assert!((p.threshold - 0.06).abs() < 1e-15);
        assert_eq!(p.max_level, 6);
        assert!(PacParams::new(1.0).is_err());
    }

    #[test]
    fn pmac_constants() {
        let p = PmacParams::new(0.5, 0.2).unwrap();
        assert_eq!(p.max_depth, 4);
        assert!((p.eta - 1.0 / (18.0 * 15f64.log2())).abs() < 1e-15);
        assert_eq!(p.boost_runs, 40);
        assert!((p.leaf_accuracy - 0.25 * (0.2 / 3.0) / 12.0).abs() < 1e-15);
    }

    #[test]
    fn proper_size_uses_the_smaller_bound() {
        let p = ProperParams::new(0.3, Some(5.0)).unwrap();
        assert_eq!(p.size, 5.0);
        assert_eq!(p.max_level, 5);
        let q = ProperParams::new(0.3, None).unwrap();
        assert_eq!(q.size, 40f64.powi(5));
    }

    #[test]
    fn pool_bound_takes_the_smaller_count() {
        // Three candidates, all levels: the lattice has 8 sets.
        assert_eq!(pool_bound(3, 0.1, 0.05, 3), 8);
        // Tiny lattice bound loses to the norm bound for many candidates.
        assert_eq!(pool_bound(40, 0.5, 0.25, 10), 1 + 9 * 40);
    }
}
