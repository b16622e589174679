//! Proper PAC learning: the hypothesis is itself a coverage function.
//!
//! The Fourier search of the PAC learner, run at finer thresholds, yields a
//! family of candidate sets; a constrained least-absolute-error fit over
//! their disjunctions picks the weights.

use std::collections::HashSet;

use super::params::{pool_bound, ProperParams};
use super::{ExampleAccess, LearnError};
use crate::coverage::CoverageFunction;
use crate::cube::{IndexSet, Point};
use crate::estimation::{hoeffding_samples, lattice_search, split_failure};
use crate::oracle::Example;
use crate::regression::{solve_l1, Constraint, L1Problem, L1Solution, SolveStatus};

#[derive(Debug, Clone)]
pub struct ProperOutcome {
    pub hypothesis: CoverageFunction,
    /// Non-empty sets whose disjunctions entered the fit.
    pub sets: Vec<IndexSet>,
    /// Weighted mean absolute residual of the fit on its sample.
    pub training_error: f64,
    pub examples: u128,
}

fn disjunction(s: IndexSet, x: Point) -> f64 {
    if s.mask() & x.bits() != 0 {
        1.0
    } else {
        0.0
    }
}

/// Fits `affine + Σ α_S OR_S` to `rows` by least absolute error under
/// `α ≥ 0`, `Σα ≤ 1`.
///
/// Disjunctions that vanish on every row, or agree on every row with the
/// constant or with an earlier set, are redundant in the LP and are left out
/// (their weight would have been interchangeable with the one kept).
pub fn fit_disjunctions(
    dim: usize,
    sets: &[IndexSet],
    rows: &[Example],
) -> Result<(CoverageFunction, L1Solution), LearnError> {
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut used = Vec::new();
    for &s in sets.iter().filter(|s| !s.is_empty()) {
        let column: Vec<bool> = rows.iter().map(|r| s.mask() & r.point.bits() != 0).collect();
        let constant = column.iter().all(|&c| c) || column.iter().all(|&c| !c);
        if !constant && seen.insert(column) {
            used.push(s);
        }
    }

    let mut problem = L1Problem::new(used.len() + 1, Constraint::SimplexLike)?;
    let mut features = vec![0.0; used.len() + 1];
    for r in rows {
        features[0] = 1.0;
        for (f, &s) in features[1..].iter_mut().zip(&used) {
            *f = disjunction(s, r.point);
        }
        problem.push_row(&features, r.label, r.count as f64)?;
    }
    let solution = solve_l1(&problem)?;
    if solution.status != SolveStatus::Optimal {
        return Err(LearnError::IterationLimit);
    }
    // Remove round-off outside the feasible region.
    let mut beta: Vec<f64> = solution.coefficients.iter().map(|b| b.max(0.0)).collect();
    let total: f64 = beta.iter().sum();
    if total > 1.0 {
        beta.iter_mut().for_each(|b| *b /= total);
    }
    let terms = used.iter().zip(&beta[1..]).filter(|(_, &b)| b > 0.0).map(|(&s, &b)| (s, b)).collect();
    Ok((CoverageFunction::new(dim, beta[0], terms)?, solution))
}

/// Screens singletons, searches the lattice at thresholds scaled by the
/// size bound, then fits the kept disjunctions.
pub fn proper_learn(access: &mut dyn ExampleAccess, params: &ProperParams) -> Result<ProperOutcome, LearnError> {
    let n = access.dim();
    let mut candidates = IndexSet::EMPTY;
    {
        let failure = split_failure(params.phase_failure, n as u64);
        let mut screen = access.coefficients(params.screen_tolerance, failure, IndexSet::full(n))?;
        for i in 1..=n {
            if screen.coefficient(IndexSet::singleton(i))?.value.abs() >= params.threshold {
                candidates = candidates.with(i);
            }
        }
    }
    let pool = pool_bound(candidates.len(), params.keep_threshold, params.search_tolerance, params.max_level);
    let lattice = {
        let failure = split_failure(params.phase_failure, pool);
        let mut search = access.coefficients(params.search_tolerance, failure, candidates)?;
        lattice_search(&mut *search, candidates, params.keep_threshold, params.max_level)?
    };
    let sets: Vec<IndexSet> = lattice.kept.iter().map(|e| e.index).collect();
    let m = fit_samples(params, sets.len());
    let rows = access.labeled_examples(m)?;
    let (hypothesis, solution) = fit_disjunctions(n, &sets, &rows)?;
    Ok(ProperOutcome { hypothesis, sets, training_error: solution.objective, examples: access.examples_used() })
}

/// `max(hoeffding(ε/4, failure), ⌈factor·|S|/ε²⌉)` examples for the fit.
pub fn fit_samples(params: &ProperParams, sets: usize) -> u64 {
    let e = params.accuracy;
    let uniform = hoeffding_samples(e / 4.0, params.phase_failure) as f64;
    let by_size = (params.fit_sample_factor * sets as f64 / (e * e)).ceil();
    uniform.max(by_size) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{l1_distance_exact, random_coverage};
    use crate::cube::DistributionSpec;
    use crate::learners::{ExactAccess, SampledAccess};
    use crate::oracle::TargetOracle;
    use proptest::prelude::*;

    fn set(ix: &[usize]) -> IndexSet {
        IndexSet::from_indices(ix).unwrap()
    }

    #[test]
    fn two_term_target() {
        let c = CoverageFunction::new(8, 0.0, vec![(set(&[1]), 0.3), (set(&[2]), 0.6)]).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 2).unwrap();
        let out = proper_learn(&mut SampledAccess::new(&mut o), &ProperParams::new(0.3, Some(2.0)).unwrap()).unwrap();
        let err = l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap();
        assert!(err <= 0.3, "error {err}");
        assert!(out.hypothesis.total_weight() <= 1.0 + 1e-9);
    }

    #[test]
    fn zero_target_gives_zero() {
        let c = CoverageFunction::zero(6).unwrap();
        let mut o = TargetOracle::uniform(c, 2).unwrap();
        let out = proper_learn(&mut SampledAccess::new(&mut o), &ProperParams::new(0.3, Some(1.0)).unwrap()).unwrap();
        assert!(out.hypothesis.terms().is_empty());
        assert!(out.hypothesis.affine() <= 0.3);
    }

    #[test]
    fn redundant_columns_are_dropped() {
        let c = CoverageFunction::new(3, 0.2, vec![(set(&[1, 2]), 0.5)]).unwrap();
        let rows: Vec<Example> = crate::cube::all_points(3)
            .map(|point| Example { point, label: crate::cube::CubeFunction::value(&c, point), count: 1 })
            .collect();
        let (h, s) = fit_disjunctions(3, &[set(&[1, 2]), set(&[1, 2]), set(&[1, 2, 3])], &rows).unwrap();
        assert!(s.objective < 1e-12);
        assert_eq!(h.terms().len(), 1);
        assert_eq!(h.terms()[0].0, set(&[1, 2]));
        assert!((h.terms()[0].1 - 0.5).abs() < 1e-9 && (h.affine() - 0.2).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exact_runs_are_proper_and_accurate(dim in 1usize..=8, terms in 1usize..6, seed: u64) {
            let c = random_coverage(dim, terms, 1 + seed as usize % dim, seed).unwrap();
            let mut access = ExactAccess::for_coverage(&c).unwrap();
            let params = ProperParams::new(0.3, Some(terms as f64)).unwrap();
            let out = proper_learn(&mut access, &params).unwrap();
            prop_assert!(out.hypothesis.total_weight() <= 1.0 + 1e-9);
            prop_assert!(out.hypothesis.terms().iter().all(|t| t.1 >= 0.0));
            let err = l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap();
            prop_assert!(err <= 0.3, "error {}", err);
        }
    }
}
