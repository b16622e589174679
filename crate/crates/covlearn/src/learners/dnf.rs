//! Learning disjoint DNF formulas through coverage functions.
//!
//! Doubling every coordinate into `(x_i, −x_i)` turns each literal into a
//! coordinate of the doubled cube, and a term is false iff one of its
//! literals is. With at most one term true at a time, `1 − d(x)/s` is the
//! coverage function `(1/s) Σ_j OR_{S_j}` of the doubled point, where `S_j`
//! holds the doubled coordinates of the literals of term `j`.

use rand::Rng;
use serde::Serialize;

use super::agnostic::sets_up_to;
use super::proper::fit_disjunctions;
use super::{check_unit, LearnError};
use crate::coverage::CoverageFunction;
use crate::cube::{self, CubeError, CubeFunction, IndexSet, Point, MAX_DIM};
use crate::oracle::{Example, ExampleOracle, OracleError};

/// A conjunction of literals. A positive literal `x_i` holds when
/// `x_i = −1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DnfTerm {
    pub positive: IndexSet,
    pub negative: IndexSet,
}

impl DnfTerm {
    pub fn holds(&self, x: Point) -> bool {
        let bits = x.bits();
        bits & self.positive.mask() == self.positive.mask() && bits & self.negative.mask() == 0
    }

    /// Some variable appears with opposite signs in the two terms.
    fn excludes(&self, other: &DnfTerm) -> bool {
        !self.positive.intersection(other.negative).is_empty() || !self.negative.intersection(other.positive).is_empty()
    }

    /// The doubled coordinates that are `−1` exactly when a literal fails.
    pub fn failure_set(&self) -> IndexSet {
        let pos = self.positive.iter().map(|i| 2 * i);
        let neg = self.negative.iter().map(|i| 2 * i - 1);
        pos.chain(neg).fold(IndexSet::EMPTY, IndexSet::with)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointDnf {
    dim: usize,
    terms: Vec<DnfTerm>,
}

impl DisjointDnf {
    /// Rejects contradictory terms and pairs of terms that can hold together.
    pub fn new(dim: usize, terms: Vec<DnfTerm>) -> Result<Self, LearnError> {
        if 2 * dim > MAX_DIM {
            return Err(CubeError::BadDimension(dim).into());
        }
        for (j, t) in terms.iter().enumerate() {
            let top = t.positive.union(t.negative).max_index();
            if top > dim {
                return Err(CubeError::IndexOutOfRange { index: top, dim }.into());
            }
            if !t.positive.intersection(t.negative).is_empty() {
                return Err(LearnError::InvalidHypothesis(format!("term {j} is contradictory")));
            }
            if let Some(k) = terms[..j].iter().position(|u| !t.excludes(u)) {
                return Err(LearnError::InvalidHypothesis(format!("terms {k} and {j} are not disjoint")));
            }
        }
        Ok(DisjointDnf { dim, terms })
    }

    /// The satisfying leaves of a random decision tree of depth at most 3,
    /// redrawn until there are between 1 and `max_terms` of them.
    pub fn random(dim: usize, max_terms: usize, seed: u64) -> Result<Self, LearnError> {
        if dim == 0 || max_terms == 0 {
            return Err(LearnError::BadParameter { name: "dim", value: dim as f64, expected: "dim and max_terms must be positive" });
        }
        let mut rng = cube::rng_from_seed(seed);
        loop {
            let mut terms = Vec::new();
            grow(dim, DnfTerm { positive: IndexSet::EMPTY, negative: IndexSet::EMPTY }, 3, &mut rng, &mut terms);
            if (1..=max_terms).contains(&terms.len()) {
                return DisjointDnf::new(dim, terms);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[DnfTerm] {
        &self.terms
    }

    pub fn eval(&self, x: Point) -> bool {
        self.terms.iter().any(|t| t.holds(x))
    }

    /// `(1/s) Σ_j OR_{S_j}` on `2n` coordinates, with `s` the term count.
    /// A term without literals fails nowhere and contributes nothing.
    pub fn as_coverage(&self) -> Result<CoverageFunction, LearnError> {
        let s = self.terms.len().max(1) as f64;
        let terms = self.terms.iter().map(DnfTerm::failure_set).filter(|f| !f.is_empty()).map(|f| (f, 1.0 / s)).collect();
        Ok(CoverageFunction::new(2 * self.dim, 0.0, terms)?)
    }
}

fn grow(dim: usize, path: DnfTerm, depth: usize, rng: &mut cube::CubeRng, out: &mut Vec<DnfTerm>) {
    let used = path.positive.union(path.negative);
    let free: Vec<usize> = (1..=dim).filter(|&i| !used.contains(i)).collect();
    if depth == 0 || free.is_empty() || rng.random_bool(0.25) {
        if rng.random_bool(0.5) {
            out.push(path);
        }
        return;
    }
    let v = free[rng.random_range(0..free.len())];
    grow(dim, DnfTerm { positive: path.positive.with(v), ..path }, depth - 1, rng, out);
    grow(dim, DnfTerm { negative: path.negative.with(v), ..path }, depth - 1, rng, out);
}

impl CubeFunction for DisjointDnf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        f64::from(u8::from(self.eval(x)))
    }
}

/// `(x_1, −x_1, x_2, −x_2, …)`.
pub fn double(x: Point) -> Point {
    let spread = (0..x.dim()).fold(0u64, |acc, i| acc | ((x.bits() >> i & 1) << (2 * i)));
    let complement = !x.bits() & IndexSet::full(x.dim()).mask();
    let flipped = (0..x.dim()).fold(0u64, |acc, i| acc | ((complement >> i & 1) << (2 * i + 1)));
    Point::from_raw(spread | flipped, 2 * x.dim())
}

/// Doubled points labeled `1 − y/s`.
pub struct DoubledOracle<'o> {
    inner: &'o mut dyn ExampleOracle,
    terms: f64,
}

impl<'o> DoubledOracle<'o> {
    pub fn new(inner: &'o mut dyn ExampleOracle, terms: usize) -> Self {
        DoubledOracle { inner, terms: terms as f64 }
    }
}

impl ExampleOracle for DoubledOracle<'_> {
    fn dim(&self) -> usize {
        2 * self.inner.dim()
    }

    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        let rows = self.inner.draw(m)?;
        Ok(rows
            .into_iter()
            .map(|e| Example { point: double(e.point), label: 1.0 - e.label / self.terms, ..e })
            .collect())
    }

    fn examples_drawn(&self) -> u128 {
        self.inner.examples_drawn()
    }
}

/// Any ℓ1 learner of coverage functions under the oracle's distribution.
pub trait CoverageLearner {
    fn learn(&self, oracle: &mut dyn ExampleOracle, accuracy: f64) -> Result<Box<dyn CubeFunction>, LearnError>;
}

/// Constrained least-absolute-error fit over all disjunctions of at most
/// `max_len` coordinates, on `⌈64·F/ε²⌉` examples for `F` features. Fed a
/// population oracle it fits the exact distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisjunctionRegression {
    pub max_len: usize,
}

impl CoverageLearner for DisjunctionRegression {
    fn learn(&self, oracle: &mut dyn ExampleOracle, accuracy: f64) -> Result<Box<dyn CubeFunction>, LearnError> {
        check_unit("accuracy", accuracy)?;
        let dim = oracle.dim();
        let sets = sets_up_to(dim, self.max_len, false)?;
        let m = (64.0 * (sets.len() + 1) as f64 / (accuracy * accuracy)).ceil();
        if m > u64::MAX as f64 {
            return Err(LearnError::SampleSize(m));
        }
        let rows = oracle.draw(m as u64)?;
        let (h, _) = fit_disjunctions(dim, &sets, &rows)?;
        Ok(Box::new(h))
    }
}

/// `h(x) = [s·(1 − h′(double(x))) ≥ 1/2]`.
pub struct ReducedClassifier {
    dim: usize,
    terms: f64,
    inner: Box<dyn CubeFunction>,
}

impl ReducedClassifier {
    pub fn classify(&self, x: Point) -> bool {
        self.terms * (1.0 - self.inner.value(double(x))) >= 0.5
    }

    pub fn inner(&self) -> &dyn CubeFunction {
        &*self.inner
    }
}

impl CubeFunction for ReducedClassifier {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        f64::from(u8::from(self.classify(x)))
    }
}

/// Learns an `s`-term disjoint DNF from 0/1-labeled examples by running
/// `learner` at accuracy `ε/(2s)` on the doubled problem.
pub fn dnf_reduction_learn(
    oracle: &mut dyn ExampleOracle,
    terms: usize,
    accuracy: f64,
    learner: &dyn CoverageLearner,
) -> Result<ReducedClassifier, LearnError> {
    check_unit("accuracy", accuracy)?;
    if terms == 0 {
        return Err(LearnError::BadParameter { name: "terms", value: 0.0, expected: "must be at least 1" });
    }
    let dim = oracle.dim();
    if 2 * dim > MAX_DIM {
        return Err(CubeError::BadDimension(dim).into());
    }
    let mut doubled = DoubledOracle::new(oracle, terms);
    let inner = learner.learn(&mut doubled, accuracy / (2.0 * terms as f64))?;
    Ok(ReducedClassifier { dim, terms: terms as f64, inner })
}
