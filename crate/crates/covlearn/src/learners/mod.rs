//! Learning algorithms for coverage functions and the disjoint-DNF
//! reduction.
//!
//! Every learner talks to its data through [`ExampleAccess`], which hands out
//! coefficient sources at a requested tolerance and batches of labeled
//! examples. Sampled, exact and differentially private back ends implement
//! it, so the same code runs in all three settings.

use std::convert::Infallible;

use thiserror::Error;

use crate::coverage::{walsh_hadamard, CoverageError, CoverageFunction, FourierTable};
use crate::cube::{self, CubeError, CubeFunction, IndexSet};
use crate::estimation::{
    hoeffding_samples, BatchSource, CoefficientEstimate, CoefficientSource, EstimationError, ExactSource, SampleBatch,
};
use crate::oracle::{Example, ExampleOracle, OracleError};
use crate::regression::RegressionError;

pub mod agnostic;
pub mod dnf;
pub mod pac;
pub mod params;
pub mod pmac;
pub mod polynomial;
pub mod proper;

pub use agnostic::{agnostic_learn, proper_agnostic_learn, truncation_length, AgnosticOutcome};
pub use dnf::{
    double, dnf_reduction_learn, CoverageLearner, DisjointDnf, DisjunctionRegression, DnfTerm, DoubledOracle, ReducedClassifier,
};
pub use pac::{pac_learn, pac_learn_uniform, PacOutcome};
pub use params::{AgnosticParams, PacParams, PmacParams, ProperAgnosticParams, ProperParams};
pub use pmac::{pmac_learn, PmacHypothesis, PmacLeaf, PmacNode};
pub use polynomial::{Basis, SparsePolynomial};
pub use proper::{fit_disjunctions, proper_learn, ProperOutcome};

/// Batches larger than this are refused rather than drawn.
pub const MAX_BATCH: u128 = 1 << 72;

/// Cap on the number of regression features a learner will build.
pub const MAX_FEATURES: usize = crate::regression::MAX_COLUMNS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("{name} = {value} is out of range: {expected}")]
    BadParameter { name: &'static str, value: f64, expected: &'static str },
    #[error("a basis of {size} features exceeds the limit of {limit}")]
    BasisTooLarge { size: f64, limit: usize },
    #[error("a batch of {0:e} examples exceeds the drawable maximum")]
    SampleSize(f64),
    #[error("query budget exhausted after {allowed} queries")]
    QueryBudget { allowed: u64 },
    #[error("regression stopped at its iteration limit")]
    IterationLimit,
    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<(), LearnError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(LearnError::BadParameter { name, value, expected: "must lie in (0, 1)" })
    }
}

/// A learner's view of its data.
pub trait ExampleAccess {
    fn dim(&self) -> usize;

    /// A source whose estimates are each within `tolerance` of the true
    /// coefficient except with probability `failure`. `candidates` hints which
    /// coordinates later queries will use.
    fn coefficients(
        &mut self,
        tolerance: f64,
        failure: f64,
        candidates: IndexSet,
    ) -> Result<Box<dyn CoefficientSource<Error = LearnError> + '_>, LearnError>;

    /// `m` labeled examples from the data distribution.
    fn labeled_examples(&mut self, m: u64) -> Result<Vec<Example>, LearnError>;

    /// Examples consumed so far.
    fn examples_used(&self) -> u128;
}

/// Wraps an infallible source into one reporting [`LearnError`].
pub struct Lift<S>(pub S);

impl<S: CoefficientSource<Error = Infallible>> CoefficientSource for Lift<S> {
    type Error = LearnError;
    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, LearnError> {
        match self.0.coefficient(t) {
            Ok(e) => Ok(e),
            Err(never) => match never {},
        }
    }
}

/// Fresh samples from an oracle for every request.
pub struct SampledAccess<'o> {
    oracle: &'o mut dyn ExampleOracle,
    used: u128,
}

impl<'o> SampledAccess<'o> {
    pub fn new(oracle: &'o mut dyn ExampleOracle) -> Self {
        SampledAccess { oracle, used: 0 }
    }

    /// Draws `m` examples as one batch.
    pub fn batch(&mut self, m: u128) -> Result<SampleBatch, LearnError> {
        if m > MAX_BATCH {
            return Err(LearnError::SampleSize(m as f64));
        }
        self.used += m;
        Ok(SampleBatch::draw(self.oracle, m)?)
    }
}

impl ExampleAccess for SampledAccess<'_> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn coefficients(
        &mut self,
        tolerance: f64,
        failure: f64,
        candidates: IndexSet,
    ) -> Result<Box<dyn CoefficientSource<Error = LearnError> + '_>, LearnError> {
        let batch = self.batch(hoeffding_samples(tolerance, failure))?;
        Ok(Box::new(Lift(BatchSource::new(batch, failure)?.project_onto(candidates))))
    }

    fn labeled_examples(&mut self, m: u64) -> Result<Vec<Example>, LearnError> {
        self.used += m as u128;
        Ok(self.oracle.draw(m)?)
    }

    fn examples_used(&self) -> u128 {
        self.used
    }
}

/// Exact coefficients and the whole uniform population as the sample.
pub struct ExactAccess {
    table: FourierTable,
    population: Vec<Example>,
    used: u128,
}

impl ExactAccess {
    /// Tabulates `target` over the cube (at most 20 coordinates).
    pub fn new(target: &dyn CubeFunction) -> Result<Self, LearnError> {
        let dim = target.dim();
        if dim > 20 {
            return Err(CoverageError::TooLarge { what: "dimension", size: dim, limit: 20 }.into());
        }
        let population: Vec<Example> =
            cube::all_points(dim).map(|point| Example { point, label: target.value(point), count: 1 }).collect();
        let mut values: Vec<f64> = population.iter().map(|e| e.label).collect();
        walsh_hadamard(&mut values);
        let scale = (dim as f64).exp2().recip();
        let coefficients = values
            .into_iter()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .map(|(mask, v)| (IndexSet::from_mask(mask as u64), v * scale))
            .collect();
        Ok(ExactAccess { table: FourierTable::from_map(dim, coefficients), population, used: 0 })
    }

    /// Uses the analytic spectrum of a coverage function.
    pub fn for_coverage(target: &CoverageFunction) -> Result<Self, LearnError> {
        let mut access = ExactAccess::new(target)?;
        access.table = target.exact_fourier()?;
        Ok(access)
    }

    pub fn table(&self) -> &FourierTable {
        &self.table
    }
}

impl ExampleAccess for ExactAccess {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn coefficients(
        &mut self,
        _tolerance: f64,
        _failure: f64,
        _candidates: IndexSet,
    ) -> Result<Box<dyn CoefficientSource<Error = LearnError> + '_>, LearnError> {
        Ok(Box::new(Lift(ExactSource::new(&self.table))))
    }

    /// The whole population, one row per point, whatever `m` is.
    fn labeled_examples(&mut self, _m: u64) -> Result<Vec<Example>, LearnError> {
        self.used += self.population.len() as u128;
        Ok(self.population.clone())
    }

    fn examples_used(&self) -> u128 {
        self.used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::random_coverage;

    #[test]
    fn exact_access_agrees_with_analytic_spectrum() {
        let c = random_coverage(7, 6, 3, 11).unwrap();
        let by_transform = ExactAccess::new(&c).unwrap();
        let analytic = ExactAccess::for_coverage(&c).unwrap();
        assert!(by_transform.table().max_abs_difference(analytic.table()) < 1e-12);
    }

    #[test]
    fn sampled_access_counts_examples() {
        let c = random_coverage(5, 3, 2, 1).unwrap();
        let mut o = crate::oracle::TargetOracle::uniform(c, 3).unwrap();
        let mut a = SampledAccess::new(&mut o);
        let mut src = a.coefficients(0.1, 0.05, IndexSet::full(5)).unwrap();
        let e = src.coefficient(IndexSet::EMPTY).unwrap();
        assert!(e.tolerance <= 0.1 + 1e-12);
        drop(src);
        assert_eq!(a.examples_used(), hoeffding_samples(0.1, 0.05));
        assert!(matches!(a.batch(MAX_BATCH + 1), Err(LearnError::SampleSize(_))));
    }
}
