//! Coverage functions: non-negative combinations of monotone disjunctions
//! plus a constant, with their exact Fourier expansion.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{self, CubeError, CubeFunction, DistributionSpec, IndexSet, Point};

/// Slack allowed on `affine + Σ α_S ≤ 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Largest dimension for which a full Walsh–Hadamard transform is attempted.
pub const MAX_TRANSFORM_DIM: usize = 24;

/// Largest term arity the subset-lattice accumulation will expand.
pub const MAX_ANALYTIC_ARITY: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("weight {weight} on term {set:?} is negative or not finite")]
    BadWeight { set: IndexSet, weight: f64 },
    #[error("weights sum to {0}, above 1")]
    TotalWeight(f64),
    #[error("a term with an empty index set must be given as the affine part")]
    EmptyTerm,
    #[error("{what} is too large: {size} (limit {limit})")]
    TooLarge { what: &'static str, size: usize, limit: usize },
    #[error("bad coverage JSON: {0}")]
    Json(String),
    #[error("generator parameters: {0}")]
    Generator(String),
}

/// `c(x) = affine + Σ_S α_S·OR_S(x)` with `α_S ≥ 0` and total weight at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageFunction {
    dim: usize,
    affine: f64,
    /// Sorted by set mask, no duplicates, no empty sets.
    terms: Vec<(IndexSet, f64)>,
}

impl CoverageFunction {
    /// Validates and normalizes. Duplicate sets are merged by adding weights.
    pub fn new(dim: usize, affine: f64, terms: Vec<(IndexSet, f64)>) -> Result<Self, CoverageError> {
        Point::all_plus(dim)?;
        if !(affine >= 0.0 && affine.is_finite()) {
            return Err(CoverageError::BadWeight { set: IndexSet::EMPTY, weight: affine });
        }
        let mut merged: BTreeMap<IndexSet, f64> = BTreeMap::new();
        for (s, w) in terms {
            if s.is_empty() {
                return Err(CoverageError::EmptyTerm);
            }
            if s.max_index() > dim {
                return Err(CubeError::IndexOutOfRange { index: s.max_index(), dim }.into());
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(CoverageError::BadWeight { set: s, weight: w });
            }
            *merged.entry(s).or_insert(0.0) += w;
        }
        let terms: Vec<_> = merged.into_iter().collect();
        let total = affine + terms.iter().map(|t| t.1).sum::<f64>();
        if total > 1.0 + WEIGHT_TOLERANCE {
            return Err(CoverageError::TotalWeight(total));
        }
        Ok(CoverageFunction { dim, affine, terms })
    }

    pub fn zero(dim: usize) -> Result<Self, CoverageError> {
        CoverageFunction::new(dim, 0.0, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn affine(&self) -> f64 {
        self.affine
    }

    pub fn terms(&self) -> &[(IndexSet, f64)] {
        &self.terms
    }

    /// Number of terms with non-zero weight.
    pub fn size(&self) -> usize {
        self.terms.iter().filter(|t| t.1 != 0.0).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.affine + self.terms.iter().map(|t| t.1).sum::<f64>()
    }

    /// Union of all term supports.
    pub fn support(&self) -> IndexSet {
        self.terms.iter().fold(IndexSet::EMPTY, |acc, t| acc.union(t.0))
    }

    pub fn eval(&self, x: Point) -> Result<f64, CoverageError> {
        if x.dim() != self.dim {
            return Err(CubeError::DimensionMismatch { expected: self.dim, got: x.dim() }.into());
        }
        Ok(self.value(x))
    }

    /// Maximum value over the cube, by enumeration.
    pub fn max_value(&self) -> Result<f64, CoverageError> {
        if self.dim > MAX_TRANSFORM_DIM {
            return Err(CoverageError::TooLarge { what: "dimension", size: self.dim, limit: MAX_TRANSFORM_DIM });
        }
        Ok(cube::all_points(self.dim).map(|x| self.value(x)).fold(0.0, f64::max))
    }

    /// Values at every point, indexed by point bitmask.
    pub fn truth_table(&self) -> Result<Vec<f64>, CoverageError> {
        if self.dim > MAX_TRANSFORM_DIM {
            return Err(CoverageError::TooLarge { what: "dimension", size: self.dim, limit: MAX_TRANSFORM_DIM });
        }
        Ok(cube::all_points(self.dim).map(|x| self.value(x)).collect())
    }

    /// Exact Fourier coefficients from the expansion
    /// `OR_S = 1 - 2^{-|S|} Σ_{T⊆S} χ_T`, accumulated term by term over
    /// each term's subset lattice.
    pub fn exact_fourier(&self) -> Result<FourierTable, CoverageError> {
        let mut coefficients: BTreeMap<IndexSet, f64> = BTreeMap::new();
        let mut empty = self.affine;
        for &(s, w) in &self.terms {
            if s.len() > MAX_ANALYTIC_ARITY {
                return Err(CoverageError::TooLarge { what: "term arity", size: s.len(), limit: MAX_ANALYTIC_ARITY });
            }
            let share = w * 0.5f64.powi(s.len() as i32);
            empty += w - share;
            for t in s.subsets().skip(1) {
                *coefficients.entry(t).or_insert(0.0) -= share;
            }
        }
        coefficients.insert(IndexSet::EMPTY, empty);
        Ok(FourierTable { dim: self.dim, coefficients })
    }

    /// Fourier coefficients by a Walsh–Hadamard transform of the truth table.
    pub fn fourier_by_transform(&self) -> Result<FourierTable, CoverageError> {
        let mut values = self.truth_table()?;
        walsh_hadamard(&mut values);
        let scale = 0.5f64.powi(self.dim as i32);
        let coefficients = values
            .into_iter()
            .enumerate()
            .filter(|(i, v)| *i == 0 || *v != 0.0)
            .map(|(i, v)| (IndexSet::from_mask(i as u64), v * scale))
            .collect();
        Ok(FourierTable { dim: self.dim, coefficients })
    }

    /// The junta `c_I` obtained by averaging `c` over the coordinates
    /// outside `keep`.
    pub fn average_project(&self, keep: IndexSet) -> CoverageFunction {
        let mut affine = self.affine;
        let mut terms: BTreeMap<IndexSet, f64> = BTreeMap::new();
        for &(s, w) in &self.terms {
            let inside = s.intersection(keep);
            let p = 0.5f64.powi(s.difference(keep).len() as i32);
            affine += w * (1.0 - p);
            if !inside.is_empty() {
                *terms.entry(inside).or_insert(0.0) += w * p;
            }
        }
        CoverageFunction { dim: self.dim, affine, terms: terms.into_iter().collect() }
    }

    pub fn to_json(&self) -> CoverageJson {
        CoverageJson {
            n: self.dim,
            affine: self.affine,
            terms: self.terms.iter().map(|&(set, weight)| TermJson { set, weight }).collect(),
        }
    }

    pub fn from_json(j: &CoverageJson) -> Result<Self, CoverageError> {
        CoverageFunction::new(j.n, j.affine, j.terms.iter().map(|t| (t.set, t.weight)).collect())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("coverage JSON serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, CoverageError> {
        let j: CoverageJson = serde_json::from_str(text).map_err(|e| CoverageError::Json(e.to_string()))?;
        Self::from_json(&j)
    }
}

impl CubeFunction for CoverageFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        let b = x.bits();
        self.affine + self.terms.iter().filter(|t| t.0.mask() & b != 0).map(|t| t.1).sum::<f64>()
    }

    fn as_coverage(&self) -> Option<&CoverageFunction> {
        Some(self)
    }
}

/// Serialized form: `{ "n", "affine", "terms": [{ "set": [1-based], "weight" }] }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoverageJson {
    pub n: usize,
    #[serde(default)]
    pub affine: f64,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermJson {
    pub set: IndexSet,
    pub weight: f64,
}

/// Fourier coefficients `ĉ(T)`; absent sets have coefficient 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    dim: usize,
    coefficients: BTreeMap<IndexSet, f64>,
}

impl FourierTable {
    pub fn from_map(dim: usize, coefficients: BTreeMap<IndexSet, f64>) -> Self {
        FourierTable { dim, coefficients }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, t: IndexSet) -> f64 {
        self.coefficients.get(&t).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (IndexSet, f64)> + '_ {
        self.coefficients.iter().map(|(k, v)| (*k, *v))
    }

    /// `‖ĉ‖₁`.
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.values().map(|v| v.abs()).sum()
    }

    /// `Σ_T ĉ(T)²`, which equals `E[c²]` by Parseval.
    pub fn sum_of_squares(&self) -> f64 {
        self.coefficients.values().map(|v| v * v).sum()
    }

    /// Largest coefficient gap against another table, over both supports.
    pub fn max_abs_difference(&self, other: &FourierTable) -> f64 {
        self.coefficients
            .keys()
            .chain(other.coefficients.keys())
            .map(|&t| (self.get(t) - other.get(t)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `set` (bitmask in hex) and `coefficient`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["set", "coefficient"]).expect("in-memory csv");
        for (t, v) in self.iter() {
            w.write_record([format!("{:x}", t.mask()), format!("{v:e}")]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

/// In-place unnormalized Walsh–Hadamard transform. With `values[b] = f(x)`
/// for the point with bitmask `b`, afterwards `values[t] = Σ_x f(x) χ_T(x)`.
pub fn walsh_hadamard(values: &mut [f64]) {
    let len = values.len();
    assert!(len.is_power_of_two(), "transform length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Random target: `max_terms` draws of a set whose arity is uniform on
/// `1..=max_arity` and whose members are uniform given the arity, with
/// exponential weights normalized to total 1. Repeated sets are merged.
pub fn random_coverage(dim: usize, max_terms: usize, max_arity: usize, seed: u64) -> Result<CoverageFunction, CoverageError> {
    Point::all_plus(dim)?;
    if max_terms == 0 {
        return Err(CoverageError::Generator("max_terms must be at least 1".into()));
    }
    if max_arity == 0 || max_arity > dim {
        return Err(CoverageError::Generator(format!("max_arity {max_arity} must be in 1..={dim}")));
    }
    let mut rng = cube::rng_from_seed(seed);
    let mut raw = Vec::with_capacity(max_terms);
    for _ in 0..max_terms {
        let arity = rng.random_range(1..=max_arity);
        let set = DistributionSpec::Layer { k: arity }.sample(dim, &mut rng).true_set();
        let w: f64 = Exp1.sample(&mut rng);
        raw.push((set, w));
    }
    let total: f64 = raw.iter().map(|t| t.1).sum();
    let terms = raw.into_iter().map(|(s, w)| (s, w / total)).collect();
    let c = CoverageFunction::new(dim, 0.0, terms)?;
    // Guard against the normalized sum landing a rounding step above 1.
    let excess = c.total_weight() - 1.0;
    if excess > 0.0 {
        let scale = 1.0 / c.total_weight();
        let terms = c.terms.iter().map(|&(s, w)| (s, w * scale)).collect();
        return CoverageFunction::new(dim, 0.0, terms);
    }
    Ok(c)
}

/// A Monte-Carlo mean with its two-sided 95% Hoeffding half-width for
/// quantities in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: u64,
}

/// Half-width of a 95% Hoeffding interval for the mean of `samples` draws in `[0,1]`.
pub fn hoeffding_half_width(samples: u64) -> f64 {
    (2.0 * (2.0f64 / 0.05).ln() / samples as f64).sqrt()
}

/// Estimates `E_{x∼d}|f(x) - g(x)|` from `samples` draws.
pub fn l1_distance_mc(
    f: &dyn CubeFunction,
    g: &dyn CubeFunction,
    d: &DistributionSpec,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, CoverageError> {
    mean_mc(f.dim(), d, samples, seed, |x| (f.value(x) - g.value(x)).abs())
}

/// Monte-Carlo mean of `score` under `d`.
pub fn mean_mc(
    dim: usize,
    d: &DistributionSpec,
    samples: u64,
    seed: u64,
    score: impl Fn(Point) -> f64,
) -> Result<MonteCarloEstimate, CoverageError> {
    if samples == 0 {
        return Err(CoverageError::Generator("at least one sample is required".into()));
    }
    d.validate(dim)?;
    let mut rng = cube::rng_from_seed(seed);
    let counts = d.sample_counts(dim, samples, &mut rng)?;
    let total: f64 = counts.iter().map(|&(x, c)| c as f64 * score(x)).sum();
    Ok(MonteCarloEstimate { mean: total / samples as f64, half_width: hoeffding_half_width(samples), samples })
}

/// Exact `E_{x∼d}|f(x) - g(x)|` by enumeration.
pub fn l1_distance_exact(f: &dyn CubeFunction, g: &dyn CubeFunction, d: &DistributionSpec) -> Result<f64, CoverageError> {
    let dim = f.dim();
    if dim > MAX_TRANSFORM_DIM {
        return Err(CoverageError::TooLarge { what: "dimension", size: dim, limit: MAX_TRANSFORM_DIM });
    }
    d.validate(dim)?;
    Ok(cube::all_points(dim).map(|x| d.probability(x) * (f.value(x) - g.value(x)).abs()).sum())
}
