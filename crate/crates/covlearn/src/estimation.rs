//! Fourier coefficient estimation from samples, and the level-by-level
//! search over the subset lattice that finds all large coefficients.

use std::collections::BTreeMap;
use std::convert::Infallible;

use thiserror::Error;

use crate::coverage::{walsh_hadamard, FourierTable};
use crate::cube::{parity, IndexSet, Point};
use crate::oracle::{Example, ExampleOracle, OracleError};

/// Labels may stray this far outside `[0, 1]`.
pub const LABEL_TOLERANCE: f64 = 1e-9;

/// Candidate sets up to this size get a transformed lookup table.
pub const MAX_PROJECTED_VARS: usize = 22;

/// Largest single request passed to an oracle; bigger batches are drawn in
/// chunks so per-point counts stay well inside `u64`.
pub const DRAW_CHUNK: u64 = 1 << 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("sample batch is empty")]
    EmptyBatch,
    #[error("label {0} is outside [0, 1]")]
    LabelOutOfRange(f64),
    #[error("examples of dimension {got} in a batch of dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("failure probability {0} is not in (0, 1)")]
    BadFailure(f64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A non-empty multiset of labeled points with labels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    rows: Vec<Example>,
    total: u128,
}

impl SampleBatch {
    pub fn new(dim: usize, rows: Vec<Example>) -> Result<Self, EstimationError> {
        let mut total = 0u128;
        for r in &rows {
            if r.point.dim() != dim {
                return Err(EstimationError::DimensionMismatch { expected: dim, got: r.point.dim() });
            }
            if !(r.label >= -LABEL_TOLERANCE && r.label <= 1.0 + LABEL_TOLERANCE) {
                return Err(EstimationError::LabelOutOfRange(r.label));
            }
            total += r.count as u128;
        }
        if total == 0 {
            return Err(EstimationError::EmptyBatch);
        }
        Ok(SampleBatch { dim, rows, total })
    }

    /// Draws `m` examples from `oracle`, in chunks of at most [`DRAW_CHUNK`].
    /// Chunks are merged on equal (point, label).
    pub fn draw(oracle: &mut dyn ExampleOracle, m: u128) -> Result<Self, EstimationError> {
        let dim = oracle.dim();
        if m <= DRAW_CHUNK as u128 {
            return SampleBatch::new(dim, oracle.draw(m as u64)?);
        }
        let mut merged: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut left = m;
        while left > 0 {
            let take = left.min(DRAW_CHUNK as u128) as u64;
            for e in oracle.draw(take)? {
                *merged.entry((e.point.bits(), e.label.to_bits())).or_insert(0) += e.count;
            }
            left -= take as u128;
        }
        let rows = merged
            .into_iter()
            .map(|((bits, label), count)| Example { point: Point::from_raw(bits, dim), label: f64::from_bits(label), count })
            .collect();
        SampleBatch::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Example] {
        &self.rows
    }

    /// Number of examples, counting multiplicity.
    pub fn len(&self) -> u128 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Empirical mean of `score(x, y)`.
    pub fn mean_of(&self, score: impl Fn(&Example) -> f64) -> f64 {
        self.rows.iter().map(|r| r.count as f64 * score(r)).sum::<f64>() / self.total as f64
    }
}

/// `c̃(T)` with the Hoeffding half-width for the failure budget it was
/// computed under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientEstimate {
    pub index: IndexSet,
    pub value: f64,
    pub tolerance: f64,
}

/// `⌈(2/τ²)·ln(2/δ')⌉`: examples needed for a mean of `[-1,1]` variables
/// to land within `τ` with probability `1-δ'`.
pub fn hoeffding_samples(tolerance: f64, failure: f64) -> u128 {
    assert!(tolerance > 0.0 && failure > 0.0 && failure < 1.0, "hoeffding_samples needs τ > 0 and δ' in (0,1)");
    let m = (2.0 / (tolerance * tolerance)) * (2.0 / failure).ln();
    // Shave float noise so exact integers are not bumped up by one.
    (m - 1e-9 * m.max(1.0)).ceil().max(1.0) as u128
}

/// Half-width matching [`hoeffding_samples`] for a batch of `m` examples.
pub fn hoeffding_tolerance(m: u128, failure: f64) -> f64 {
    (2.0 * (2.0 / failure).ln() / m as f64).sqrt()
}

/// Per-estimate budget when a phase of `count` estimates must all succeed
/// with probability `1 - phase_failure`.
pub fn split_failure(phase_failure: f64, count: u64) -> f64 {
    phase_failure / count.max(1) as f64
}

/// `(1/|R|) Σ_{x ∈ R} y·χ_T(x)`.
pub fn estimate_coefficient(batch: &SampleBatch, t: IndexSet, failure: f64) -> Result<CoefficientEstimate, EstimationError> {
    if !(failure > 0.0 && failure < 1.0) {
        return Err(EstimationError::BadFailure(failure));
    }
    let mask = t.mask();
    let value = batch.mean_of(|r| r.label * parity(mask, r.point.bits()) as f64);
    Ok(CoefficientEstimate { index: t, value, tolerance: hoeffding_tolerance(batch.len(), failure) })
}

/// Anything that can produce coefficient estimates on demand.
pub trait CoefficientSource {
    type Error;
    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, Self::Error>;
}

impl<S: CoefficientSource + ?Sized> CoefficientSource for Box<S> {
    type Error = S::Error;
    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, Self::Error> {
        (**self).coefficient(t)
    }
}

/// Estimates from one fixed batch.
///
/// After [`BatchSource::project_onto`], label sums are binned by the
/// pattern on the candidate coordinates and transformed once, so any
/// coefficient on a subset of the candidates is a table lookup. The value is
/// the same empirical mean, summed in a different order.
#[derive(Debug, Clone)]
pub struct BatchSource {
    batch: SampleBatch,
    failure: f64,
    tolerance: f64,
    projection: Option<Projection>,
    estimates: u64,
}

#[derive(Debug, Clone)]
struct Projection {
    candidates: IndexSet,
    positions: Vec<u32>,
    table: Vec<f64>,
}

/// Gathers the bits of `bits` at `positions` into the low bits of the result.
pub(crate) fn compress(bits: u64, positions: &[u32]) -> usize {
    positions.iter().enumerate().fold(0usize, |acc, (j, &p)| acc | (((bits >> p) & 1) as usize) << j)
}

impl BatchSource {
    pub fn new(batch: SampleBatch, failure: f64) -> Result<Self, EstimationError> {
        if !(failure > 0.0 && failure < 1.0) {
            return Err(EstimationError::BadFailure(failure));
        }
        let tolerance = hoeffding_tolerance(batch.len(), failure);
        Ok(BatchSource { batch, failure, tolerance, projection: None, estimates: 0 })
    }

    /// Precomputes all coefficients on subsets of `candidates` when there are
    /// at most [`MAX_PROJECTED_VARS`] of them.
    pub fn project_onto(mut self, candidates: IndexSet) -> Self {
        if candidates.len() > MAX_PROJECTED_VARS {
            return self;
        }
        let positions: Vec<u32> = candidates.iter().map(|i| (i - 1) as u32).collect();
        let mut table = vec![0.0; 1 << positions.len()];
        for r in self.batch.rows() {
            table[compress(r.point.bits(), &positions)] += r.count as f64 * r.label;
        }
        walsh_hadamard(&mut table);
        let scale = 1.0 / self.batch.len() as f64;
        table.iter_mut().for_each(|v| *v *= scale);
        self.projection = Some(Projection { candidates, positions, table });
        self
    }

    pub fn batch(&self) -> &SampleBatch {
        &self.batch
    }

    pub fn failure(&self) -> f64 {
        self.failure
    }

    pub fn estimates_made(&self) -> u64 {
        self.estimates
    }
}

impl CoefficientSource for BatchSource {
    type Error = Infallible;

    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, Infallible> {
        self.estimates += 1;
        if let Some(p) = &self.projection {
            if t.is_subset(p.candidates) {
                let value = p.table[compress(t.mask(), &p.positions)];
                return Ok(CoefficientEstimate { index: t, value, tolerance: self.tolerance });
            }
        }
        let mask = t.mask();
        let value = self.batch.mean_of(|r| r.label * parity(mask, r.point.bits()) as f64);
        Ok(CoefficientEstimate { index: t, value, tolerance: self.tolerance })
    }
}

/// Exact coefficients read from a table.
#[derive(Debug, Clone)]
pub struct ExactSource<'a> {
    table: &'a FourierTable,
    queries: u64,
}

impl<'a> ExactSource<'a> {
    pub fn new(table: &'a FourierTable) -> Self {
        ExactSource { table, queries: 0 }
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }
}

impl CoefficientSource for ExactSource<'_> {
    type Error = Infallible;

    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, Infallible> {
        self.queries += 1;
        Ok(CoefficientEstimate { index: t, value: self.table.get(t), tolerance: f64::EPSILON })
    }
}

/// Output of [`lattice_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeResult {
    /// The estimate at the empty set, always present.
    pub empty: CoefficientEstimate,
    /// Non-empty sets whose estimate reached the threshold, in visit order.
    pub kept: Vec<CoefficientEstimate>,
    /// Number of estimates requested, including the empty set.
    pub estimates: u64,
}

impl LatticeResult {
    /// `∅` followed by every kept set.
    pub fn all(&self) -> impl Iterator<Item = &CoefficientEstimate> {
        std::iter::once(&self.empty).chain(self.kept.iter())
    }

    pub fn sets(&self) -> Vec<IndexSet> {
        self.all().map(|e| e.index).collect()
    }
}

/// Breadth-first search from `∅`: level `t` extends each set kept at level
/// `t-1` by each candidate index above its largest member, and keeps the
/// extension iff `|estimate| ≥ threshold`. Each subset is estimated at most
/// once. Runs `max_level` levels, stopping early only when a level keeps
/// nothing.
pub fn lattice_search<S: CoefficientSource + ?Sized>(
    source: &mut S,
    candidates: IndexSet,
    threshold: f64,
    max_level: usize,
) -> Result<LatticeResult, S::Error> {
    let empty = source.coefficient(IndexSet::EMPTY)?;
    let mut estimates = 1u64;
    let mut kept = Vec::new();
    let mut frontier = vec![IndexSet::EMPTY];
    for _level in 1..=max_level {
        let mut next = Vec::new();
        for &t in &frontier {
            let top = t.max_index();
            for i in candidates.iter().filter(|&i| i > top) {
                let ext = t.with(i);
                let e = source.coefficient(ext)?;
                estimates += 1;
                if e.value.abs() >= threshold {
                    next.push(ext);
                    kept.push(e);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(LatticeResult { empty, kept, estimates })
}

/// `⌈log₂(2/θ)⌉`, the level count callers use for threshold `θ`.
pub fn levels_for_threshold(threshold: f64) -> usize {
    (2.0 / threshold).log2().ceil().max(1.0) as usize
}
