//! PAC learning of coverage functions under the uniform distribution by
//! finding their large Fourier coefficients.

use super::params::{pool_bound, PacParams};
use super::{ExampleAccess, LearnError, SampledAccess, SparsePolynomial};
use crate::cube::IndexSet;
use crate::estimation::{lattice_search, split_failure};
use crate::oracle::ExampleOracle;

#[derive(Debug, Clone)]
pub struct PacOutcome {
    /// `Σ_{S ∈ kept} c̃(S) χ_S`.
    pub hypothesis: SparsePolynomial,
    /// Coordinates whose singleton estimate passed the screen.
    pub candidates: IndexSet,
    /// The pool bound the search budget was split over.
    pub pool: u64,
    /// Coefficient estimates made in the search phase.
    pub estimates: u64,
    pub examples: u128,
}

/// Screens singletons, then searches the subset lattice of the survivors.
pub fn pac_learn(access: &mut dyn ExampleAccess, params: &PacParams) -> Result<PacOutcome, LearnError> {
    let n = access.dim();
    let mut candidates = IndexSet::EMPTY;
    {
        let failure = split_failure(params.screen_failure, n as u64);
        let mut screen = access.coefficients(params.tolerance, failure, IndexSet::full(n))?;
        for i in 1..=n {
            if screen.coefficient(IndexSet::singleton(i))?.value.abs() >= params.threshold {
                candidates = candidates.with(i);
            }
        }
    }
    let pool = pool_bound(candidates.len(), params.threshold, params.tolerance, params.max_level);
    let lattice = {
        let failure = split_failure(params.search_failure, pool);
        let mut search = access.coefficients(params.tolerance, failure, candidates)?;
        lattice_search(&mut *search, candidates, params.threshold, params.max_level)?
    };
    let hypothesis = SparsePolynomial::parity(n, lattice.all().map(|e| (e.index, e.value)))?;
    Ok(PacOutcome { hypothesis, candidates, pool, estimates: lattice.estimates, examples: access.examples_used() })
}

/// [`pac_learn`] at accuracy `accuracy` on fresh samples from `oracle`.
pub fn pac_learn_uniform(oracle: &mut dyn ExampleOracle, accuracy: f64) -> Result<PacOutcome, LearnError> {
    pac_learn(&mut SampledAccess::new(oracle), &PacParams::new(accuracy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{l1_distance_exact, random_coverage, CoverageFunction};
    use crate::cube::{all_points, DistributionSpec};
    use crate::learners::ExactAccess;
    use crate::oracle::TargetOracle;
    use proptest::prelude::*;

    fn set(ix: &[usize]) -> IndexSet {
        IndexSet::from_indices(ix).unwrap()
    }

    #[test]
    fn zero_target_gives_a_negligible_constant() {
        let c = CoverageFunction::zero(6).unwrap();
        let mut o = TargetOracle::uniform(c, 4).unwrap();
        let out = pac_learn_uniform(&mut o, 0.5).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(out.hypothesis.len(), 0);
    }

    #[test]
    fn exact_source_recovers_the_small_lattice() {
        let c = CoverageFunction::new(8, 0.0, vec![(set(&[1, 2]), 0.25)]).unwrap();
        let mut access = ExactAccess::for_coverage(&c).unwrap();
        // ε = 0.6 gives θ = 0.06, below the 0.0625 magnitude of every coefficient.
        let out = pac_learn(&mut access, &PacParams::new(0.6).unwrap()).unwrap();
        let mut sets: Vec<_> = out.hypothesis.terms().iter().map(|t| t.set).collect();
        sets.sort();
        assert_eq!(sets, vec![IndexSet::EMPTY, set(&[1]), set(&[2]), set(&[1, 2])]);
        assert_eq!(out.candidates, set(&[1, 2]));
    }

    #[test]
    fn sampled_run_meets_the_accuracy() {
        let c = random_coverage(10, 12, 4, 21).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 8).unwrap();
        let out = pac_learn_uniform(&mut o, 0.25).unwrap();
        let err = l1_distance_exact(&out.hypothesis, &c, &DistributionSpec::Uniform).unwrap();
        assert!(err <= 0.25, "error {err}");
        assert_eq!(out.examples, o.examples_drawn());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_runs_leave_little_spectral_mass(dim in 1usize..=10, terms in 1usize..12, seed: u64, eps in 0.1f64..0.9) {
            let arity = 1 + seed as usize % dim;
            let c = random_coverage(dim, terms, arity, seed).unwrap();
            let mut access = ExactAccess::for_coverage(&c).unwrap();
            let out = pac_learn(&mut access, &PacParams::new(eps).unwrap()).unwrap();
            let table = c.exact_fourier().unwrap();
            let missed: f64 = table.iter()
                .filter(|(t, _)| out.hypothesis.coefficient(*t, None) == 0.0)
                .map(|(_, v)| v * v)
                .sum();
            prop_assert!(missed <= eps * eps / 2.0, "missed mass {missed}");
            // Exact coefficients on the kept sets: the error is the missed mass.
            let sq: f64 = all_points(dim).map(|x| {
                use crate::cube::CubeFunction;
                (out.hypothesis.value(x) - c.value(x)).powi(2)
            }).sum::<f64>() / (dim as f64).exp2();
            prop_assert!((sq - missed).abs() < 1e-9);
        }
    }
}
