//! Agnostic learning by least-absolute-error regression over a fixed basis:
//! low-degree parities for the improper learner, short disjunctions for the
//! proper one.

use super::params::{AgnosticParams, ProperAgnosticParams};
use super::proper::{fit_disjunctions, ProperOutcome};
use super::{ExampleAccess, LearnError, SparsePolynomial, MAX_FEATURES};
use crate::cube::{binomial_coefficient, parity, DistributionSpec, IndexSet};
use crate::regression::{solve_l1, Constraint, L1Problem, SolveStatus};

#[derive(Debug, Clone)]
pub struct AgnosticOutcome {
    /// The fitted polynomial, clamped to `[0, 1]`.
    pub hypothesis: SparsePolynomial,
    pub features: usize,
    /// Weighted mean absolute residual on the training sample.
    pub training_error: f64,
    pub examples: u128,
}

/// `⌈(2/κ)·⌈log₂(1/ε)⌉⌉`: disjunctions longer than this are within `ε` of
/// the constant 1 when every coordinate is `+1` with probability at most
/// `1 − κ`.
pub fn truncation_length(kappa: f64, accuracy: f64) -> usize {
    ((2.0 / kappa) * accuracy.recip().log2().ceil()).ceil() as usize
}

/// All sets of size `1..=max_len` (and `∅` when `with_empty`) over `dim`
/// coordinates, smallest first.
pub(crate) fn sets_up_to(dim: usize, max_len: usize, with_empty: bool) -> Result<Vec<IndexSet>, LearnError> {
    let first = usize::from(!with_empty);
    let count: f64 = (first..=max_len.min(dim)).map(|t| binomial_coefficient(dim, t)).sum();
    if count > MAX_FEATURES as f64 {
        return Err(LearnError::BasisTooLarge { size: count, limit: MAX_FEATURES });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut level = vec![IndexSet::EMPTY];
    if with_empty {
        out.push(IndexSet::EMPTY);
    }
    for _ in 1..=max_len.min(dim) {
        level = level.iter().flat_map(|&s| (s.max_index() + 1..=dim).map(move |i| s.with(i))).collect();
        out.extend_from_slice(&level);
    }
    Ok(out)
}

fn layers_with_mass(dim: usize, distribution: &DistributionSpec) -> Option<Vec<usize>> {
    match distribution {
        DistributionSpec::Uniform | DistributionSpec::Product { .. } => None,
        DistributionSpec::Layer { k } => Some(vec![*k]),
        DistributionSpec::SymmetricMixture { weights } => {
            Some((0..=dim).filter(|&k| weights.get(k).is_some_and(|&w| w > 0.0)).collect())
        }
    }
}

/// Parities of degree at most `params.degree` (one copy per layer for
/// symmetric laws), fitted without constraints and clamped to `[0, 1]`.
pub fn agnostic_learn(
    access: &mut dyn ExampleAccess,
    distribution: &DistributionSpec,
    params: &AgnosticParams,
) -> Result<AgnosticOutcome, LearnError> {
    let n = access.dim();
    distribution.validate(n)?;
    let sets = sets_up_to(n, params.degree, true)?;
    let layers = layers_with_mass(n, distribution);
    let keys: Vec<(Option<usize>, IndexSet)> = match &layers {
        None => sets.iter().map(|&s| (None, s)).collect(),
        Some(ks) => ks.iter().flat_map(|&k| sets.iter().map(move |&s| (Some(k), s))).collect(),
    };
    if keys.len() > MAX_FEATURES {
        return Err(LearnError::BasisTooLarge { size: keys.len() as f64, limit: MAX_FEATURES });
    }
    let e = params.accuracy;
    let m = (params.sample_factor * keys.len() as f64 / (e * e)).ceil() as u64;
    let rows = access.labeled_examples(m)?;

    let mut problem = L1Problem::new(keys.len(), Constraint::Unconstrained)?;
    let mut features = vec![0.0; keys.len()];
    for r in &rows {
        let weight = r.point.weight();
        for (f, &(layer, s)) in features.iter_mut().zip(&keys) {
            *f = if layer.is_none_or(|k| k == weight) { parity(s.mask(), r.point.bits()) as f64 } else { 0.0 };
        }
        problem.push_row(&features, r.label, r.count as f64)?;
    }
    let solution = solve_l1(&problem)?;
    if solution.status != SolveStatus::Optimal {
        return Err(LearnError::IterationLimit);
    }
    let terms = keys.iter().zip(&solution.coefficients).map(|(&(layer, set), &c)| (layer, set, c));
    let hypothesis = match layers {
        None => SparsePolynomial::parity(n, terms.map(|(_, s, c)| (s, c)))?,
        Some(_) => SparsePolynomial::layered(n, terms.map(|(k, s, c)| (k.unwrap_or(0), s, c)))?,
    };
    Ok(AgnosticOutcome {
        hypothesis: hypothesis.clamped(true),
        features: keys.len(),
        training_error: solution.objective,
        examples: access.examples_used(),
    })
}

/// Disjunctions of length at most the truncation length, fitted under the
/// coverage constraints. Needs a product law whose coordinates take each
/// sign with probability at least `κ`.
pub fn proper_agnostic_learn(
    access: &mut dyn ExampleAccess,
    distribution: &DistributionSpec,
    params: &ProperAgnosticParams,
) -> Result<ProperOutcome, LearnError> {
    let n = access.dim();
    distribution.validate(n)?;
    match distribution {
        DistributionSpec::Uniform => {}
        DistributionSpec::Product { biases } => {
            if let Some(&b) = biases.iter().find(|&&b| b.min(1.0 - b) < params.kappa) {
                return Err(LearnError::BadParameter { name: "bias", value: b, expected: "must be at least kappa from 0 and 1" });
            }
        }
        _ => {
            return Err(LearnError::BadParameter { name: "distribution", value: f64::NAN, expected: "must be a product law" })
        }
    }
    let sets = sets_up_to(n, params.max_len, false)?;
    let half = params.accuracy / 2.0;
    let m = (params.sample_factor * (sets.len() + 1) as f64 / (half * half)).ceil() as u64;
    let rows = access.labeled_examples(m)?;
    let (hypothesis, solution) = fit_disjunctions(n, &sets, &rows)?;
    Ok(ProperOutcome { hypothesis, sets, training_error: solution.objective, examples: access.examples_used() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{l1_distance_exact, CoverageFunction};
    use crate::cube::{all_points, CubeFunction, Point};
    use crate::learners::SampledAccess;
    use crate::oracle::TargetOracle;

    fn set(ix: &[usize]) -> IndexSet {
        IndexSet::from_indices(ix).unwrap()
    }

    #[test]
    fn truncation_lengths() {
        assert_eq!(truncation_length(0.25, 0.25), 16);
        assert_eq!(truncation_length(0.5, 0.1), 16);
        assert_eq!(truncation_length(0.5, 0.5), 4);
    }

    #[test]
    fn set_enumeration_counts() {
        assert_eq!(sets_up_to(5, 2, true).unwrap().len(), 1 + 5 + 10);
        assert_eq!(sets_up_to(4, 9, false).unwrap().len(), 15);
        assert!(matches!(sets_up_to(60, 4, true), Err(LearnError::BasisTooLarge { .. })));
    }

    #[test]
    fn single_disjunction_is_fitted_exactly() {
        let c = CoverageFunction::new(4, 0.0, vec![(set(&[1]), 1.0)]).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 5).unwrap();
        let out = agnostic_learn(&mut SampledAccess::new(&mut o), &DistributionSpec::Uniform, &AgnosticParams::new(0.3).unwrap())
            .unwrap();
        assert!(out.training_error < 1e-9);
        assert!(l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap() < 1e-9);
    }

    #[test]
    fn long_disjunction_under_uniform() {
        let n = 8;
        let c = CoverageFunction::new(n, 0.0, vec![(IndexSet::full(n), 1.0)]).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 6).unwrap();
        let params = AgnosticParams::new(0.25).unwrap();
        assert_eq!(params.degree, 4);
        let out = agnostic_learn(&mut SampledAccess::new(&mut o), &DistributionSpec::Uniform, &params).unwrap();
        assert!(l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap() <= 0.25);
    }

    #[test]
    fn full_layer_is_a_single_point() {
        let n = 5;
        let c = CoverageFunction::new(n, 0.1, vec![(set(&[2, 3]), 0.7)]).unwrap();
        let d = DistributionSpec::Layer { k: n };
        let mut o = TargetOracle::new(c.clone(), d.clone(), 7).unwrap();
        let out = agnostic_learn(&mut SampledAccess::new(&mut o), &d, &AgnosticParams::new(0.3).unwrap()).unwrap();
        let x = Point::all_minus(n).unwrap();
        assert!((out.hypothesis.value(x) - c.value(x)).abs() < 1e-9);
    }

    #[test]
    fn mixture_gets_one_polynomial_per_layer() {
        let n = 4;
        let c = CoverageFunction::new(n, 0.0, vec![(set(&[1, 2]), 0.5), (set(&[3]), 0.5)]).unwrap();
        let d = DistributionSpec::SymmetricMixture { weights: vec![0.0, 0.5, 0.5, 0.0, 0.0] };
        let mut o = TargetOracle::new(c.clone(), d.clone(), 8).unwrap();
        let out = agnostic_learn(&mut SampledAccess::new(&mut o), &d, &AgnosticParams::new(0.3).unwrap()).unwrap();
        assert!(out.hypothesis.terms().iter().all(|t| matches!(t.layer, Some(1 | 2))));
        assert!(l1_distance_exact(&out.hypothesis, &c, &d).unwrap() < 1e-6);
    }

    #[test]
    fn proper_agnostic_recovers_two_disjunctions() {
        let c = CoverageFunction::new(4, 0.0, vec![(set(&[1]), 0.5), (set(&[2]), 0.5)]).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 9).unwrap();
        let params = ProperAgnosticParams::new(0.2, 0.5).unwrap();
        let out = proper_agnostic_learn(&mut SampledAccess::new(&mut o), &DistributionSpec::Uniform, &params).unwrap();
        assert!(out.training_error < 1e-9);
        assert!(out.hypothesis.total_weight() <= 1.0 + 1e-9);
        assert!(l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap() < 1e-9);
    }

    #[test]
    fn proper_agnostic_constant_labels() {
        let half = crate::cube::FnFunction::new(5, |_| 0.5);
        let mut o = TargetOracle::uniform(half, 10).unwrap();
        let params = ProperAgnosticParams::new(0.3, 0.5).unwrap();
        let out = proper_agnostic_learn(&mut SampledAccess::new(&mut o), &DistributionSpec::Uniform, &params).unwrap();
        let worst = all_points(5).map(|x| (out.hypothesis.value(x) - 0.5).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn proper_agnostic_checks_the_bias_margin() {
        let c = CoverageFunction::zero(3).unwrap();
        let d = DistributionSpec::Product { biases: vec![0.5, 0.1, 0.5] };
        let mut o = TargetOracle::new(c, d.clone(), 1).unwrap();
        let params = ProperAgnosticParams::new(0.3, 0.25).unwrap();
        let err = proper_agnostic_learn(&mut SampledAccess::new(&mut o), &d, &params).unwrap_err();
        assert!(matches!(err, LearnError::BadParameter { name: "bias", .. }));
    }
}
