//! Differentially private release of monotone conjunction counting queries.
//!
//! A dataset `D` defines the coverage function
//! `c_D(x) = 1 − CQ_D(AND_{S_x})`, whose disjunctions are `OR_{S_{−z}}`
//! for the rows `z`. Any learner that only needs tolerant counting queries
//! can therefore run against a Laplace-noised query oracle, and its
//! hypothesis answers every conjunction query at once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{mean_mc, CoverageError, CoverageFunction, MonteCarloEstimate};
use crate::cube::{self, binomial_coefficient, CubeError, CubeFunction, CubeRng, DistributionSpec, IndexSet, Point};
use crate::estimation::{CoefficientEstimate, CoefficientSource};
use crate::learners::params::pool_bound;
use crate::learners::proper::fit_samples;
use crate::learners::{
    agnostic_learn, pac_learn, proper_learn, AgnosticParams, ExampleAccess, LearnError, PacParams, ProperParams,
    SparsePolynomial,
};
use crate::oracle::{laplace, Example};

/// Sampled points used by the emitter's post-check when the cube is too
/// large to enumerate.
const EMITTER_CHECK_SAMPLES: u64 = 10_000;
const EMITTER_CHECK_MAX_DIM: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("the dataset is empty")]
    EmptyDataset,
    #[error("point of dimension {found} in a dataset of dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{name} = {value} is out of range: {expected}")]
    BadParameter { name: &'static str, value: f64, expected: &'static str },
    #[error("dataset of {actual} rows is below the {required:.0} rows needed to answer {queries} private queries")]
    Gate { required: f64, actual: u64, queries: u64 },
    #[error("private query budget of {allowed} queries is spent")]
    Budget { allowed: u64 },
    #[error("synthetic dataset does not reproduce the rounded hypothesis: {0}")]
    Emitter(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

/// A multiset of points, kept as distinct points with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<(Point, u64)>,
    size: u64,
}

impl Dataset {
    pub fn new(dim: usize, points: &[Point]) -> Result<Self, PrivacyError> {
        Dataset::from_counts(dim, points.iter().map(|&p| (p, 1)))
    }

    /// Merges repeated points; zero counts are dropped.
    pub fn from_counts(dim: usize, counts: impl IntoIterator<Item = (Point, u64)>) -> Result<Self, PrivacyError> {
        Point::all_plus(dim)?;
        let mut merged: BTreeMap<Point, u64> = BTreeMap::new();
        for (p, c) in counts {
            if p.dim() != dim {
                return Err(PrivacyError::DimensionMismatch { expected: dim, found: p.dim() });
            }
            if c > 0 {
                *merged.entry(p).or_default() += c;
            }
        }
        let size = merged.values().sum();
        Ok(Dataset { dim, rows: merged.into_iter().collect(), size })
    }

    /// `size` i.i.d. rows from `distribution`.
    pub fn sample(dim: usize, distribution: &DistributionSpec, size: u64, seed: u64) -> Result<Self, PrivacyError> {
        distribution.validate(dim)?;
        let mut rng = cube::rng_from_seed(seed);
        Dataset::from_counts(dim, distribution.sample_counts(dim, size, &mut rng)?)
    }

    /// Reads the shared text format, one row per line.
    pub fn parse(text: &str) -> Result<Self, PrivacyError> {
        let points = cube::parse_points(text)?;
        let dim = points.first().map_or(0, |p| p.dim());
        if points.is_empty() {
            return Err(PrivacyError::EmptyDataset);
        }
        Dataset::new(dim, &points)
    }

    /// One line per row, repeated points on consecutive lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(p, c) in &self.rows {
            let line = p.to_line();
            for _ in 0..c {
                out.push_str(&line);
                out.push('\n');
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows, counting multiplicity.
    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Distinct points with their multiplicities, sorted by point.
    pub fn rows(&self) -> &[(Point, u64)] {
        &self.rows
    }
}

/// `AND_S(z) = 1` iff `z_i = −1` for every `i ∈ S`.
pub fn conjunction(s: IndexSet) -> impl Fn(Point) -> f64 {
    move |z| if s.mask() & !z.bits() == 0 { 1.0 } else { 0.0 }
}

/// `(1/|D|) Σ_{z ∈ D} predicate(z)`.
pub fn counting_query(data: &Dataset, predicate: impl Fn(Point) -> f64) -> Result<f64, PrivacyError> {
    if data.is_empty() {
        return Err(PrivacyError::EmptyDataset);
    }
    let total: f64 = data.rows.iter().map(|&(z, c)| c as f64 * predicate(z)).sum();
    Ok(total / data.size as f64)
}

/// `Σ_z (1/|D|) OR_{S_{−z}}` with `S_{−z} = {i : z_i = +1}`. The all-`(−1)`
/// row has `S_{−z} = ∅` and contributes nothing.
pub fn coverage_of_dataset(data: &Dataset) -> Result<CoverageFunction, PrivacyError> {
    if data.is_empty() {
        return Err(PrivacyError::EmptyDataset);
    }
    let m = data.size as f64;
    let terms = data.rows.iter().filter(|(z, _)| !z.false_set().is_empty()).map(|&(z, c)| (z.false_set(), c as f64 / m)).collect();
    Ok(CoverageFunction::new(data.dim, 0.0, terms)?)
}

/// Fourier coefficient of `OR_S` at `T`.
pub fn disjunction_coefficient(s: IndexSet, t: IndexSet) -> f64 {
    let tail = (-(s.len() as f64)).exp2();
    if t.is_empty() {
        1.0 - tail
    } else if t.is_subset(s) {
        -tail
    } else {
        0.0
    }
}

/// Smallest dataset that can answer `queries` counting queries within
/// `tolerance` with ε-differential privacy, except with probability
/// `failure`: `q (ln q + ln(1/δ)) / (ε τ)`.
pub fn gate_size(queries: u64, tolerance: f64, epsilon: f64, failure: f64) -> f64 {
    let q = queries.max(1) as f64;
    q * (q.ln() + failure.recip().ln()) / (epsilon * tolerance)
}

/// Privacy and accuracy targets of a release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReleaseParams {
    /// Target average error `ᾱ`.
    pub alpha_bar: f64,
    /// Privacy parameter; `f64::INFINITY` disables the noise.
    pub epsilon: f64,
    /// Failure probability of the tolerance guarantee.
    pub delta: f64,
    pub seed: u64,
}

impl ReleaseParams {
    fn validate(&self) -> Result<(), PrivacyError> {
        if !(self.alpha_bar > 0.0 && self.alpha_bar < 1.0) {
            return Err(PrivacyError::BadParameter { name: "alpha_bar", value: self.alpha_bar, expected: "must lie in (0, 1)" });
        }
        if !(self.epsilon > 0.0) {
            return Err(PrivacyError::BadParameter { name: "epsilon", value: self.epsilon, expected: "must be positive" });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PrivacyError::BadParameter { name: "delta", value: self.delta, expected: "must lie in (0, 1)" });
        }
        Ok(())
    }
}

/// Laplace mechanism over a fixed query budget. Each answer is the exact
/// counting query plus `Laplace(q/(ε|D|))`, clamped to `[0, 1]`; under basic
/// composition the whole transcript is ε-differentially private.
pub struct PrivateOracle<'d> {
    data: &'d Dataset,
    allowed: u64,
    tolerance: f64,
    scale: f64,
    used: u64,
    rng: CubeRng,
    noise: Vec<f64>,
}

impl<'d> PrivateOracle<'d> {
    /// Refuses datasets below [`gate_size`].
    pub fn new(data: &'d Dataset, queries: u64, tolerance: f64, epsilon: f64, failure: f64, seed: u64) -> Result<Self, PrivacyError> {
        if data.is_empty() {
            return Err(PrivacyError::EmptyDataset);
        }
        if !(epsilon > 0.0) {
            return Err(PrivacyError::BadParameter { name: "epsilon", value: epsilon, expected: "must be positive" });
        }
        if !(tolerance > 0.0) {
            return Err(PrivacyError::BadParameter { name: "tolerance", value: tolerance, expected: "must be positive" });
        }
        if !(failure > 0.0 && failure < 1.0) {
            return Err(PrivacyError::BadParameter { name: "delta", value: failure, expected: "must lie in (0, 1)" });
        }
        let required = gate_size(queries, tolerance, epsilon, failure);
        if (data.len() as f64) < required {
            return Err(PrivacyError::Gate { required: required.ceil(), actual: data.len(), queries });
        }
        Ok(PrivateOracle {
            data,
            allowed: queries,
            tolerance,
            scale: queries as f64 / (epsilon * data.len() as f64),
            used: 0,
            rng: cube::rng_from_seed(seed),
            noise: Vec::new(),
        })
    }

    /// One noisy counting query. Refuses once the budget is spent.
    pub fn query(&mut self, predicate: impl Fn(Point) -> f64) -> Result<f64, PrivacyError> {
        if self.used >= self.allowed {
            return Err(PrivacyError::Budget { allowed: self.allowed });
        }
        self.used += 1;
        let exact = counting_query(self.data, predicate)?;
        let noise = laplace(self.scale, &mut self.rng);
        self.noise.push(noise);
        Ok((exact + noise).clamp(0.0, 1.0))
    }

    pub fn queries_used(&self) -> u64 {
        self.used
    }

    pub fn queries_allowed(&self) -> u64 {
        self.allowed
    }

    /// Per-answer tolerance `τ` the gate was checked against.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// The Laplace scale `b`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Every noise value added so far, before clamping.
    pub fn noise_draws(&self) -> &[f64] {
        &self.noise
    }

    pub fn dataset(&self) -> &Dataset {
        self.data
    }
}

fn budget_error(e: PrivacyError) -> LearnError {
    match e {
        PrivacyError::Budget { allowed } => LearnError::QueryBudget { allowed },
        PrivacyError::Learn(l) => l,
        other => LearnError::InvalidHypothesis(other.to_string()),
    }
}

/// Coefficients `ĉ_D(T) = 2·CQ_D(F_T) − 1` with
/// `F_T(z) = (1 + ÔR_{S_{−z}}(T))/2`.
struct PrivateCoefficients<'a, 'd> {
    oracle: &'a mut PrivateOracle<'d>,
}

impl CoefficientSource for PrivateCoefficients<'_, '_> {
    type Error = LearnError;

    fn coefficient(&mut self, t: IndexSet) -> Result<CoefficientEstimate, LearnError> {
        let answer = self.oracle.query(|z| (1.0 + disjunction_coefficient(z.false_set(), t)) / 2.0).map_err(budget_error)?;
        Ok(CoefficientEstimate { index: t, value: 2.0 * answer - 1.0, tolerance: 2.0 * self.oracle.tolerance })
    }
}

/// Learner access through a private oracle: coefficients through `F_T`,
/// labeled examples `(x, 1 − CQ(AND_{S_x}))` with `x` drawn from
/// `distribution`. Repeated points reuse one answer.
pub struct PrivateAccess<'a, 'd> {
    oracle: &'a mut PrivateOracle<'d>,
    distribution: DistributionSpec,
    rng: CubeRng,
    used: u128,
}

impl<'a, 'd> PrivateAccess<'a, 'd> {
    pub fn new(oracle: &'a mut PrivateOracle<'d>, distribution: DistributionSpec, seed: u64) -> Result<Self, PrivacyError> {
        distribution.validate(oracle.dataset().dim())?;
        Ok(PrivateAccess { oracle, distribution, rng: cube::rng_from_seed(seed), used: 0 })
    }
}

impl ExampleAccess for PrivateAccess<'_, '_> {
    fn dim(&self) -> usize {
        self.oracle.dataset().dim()
    }

    fn coefficients(
        &mut self,
        tolerance: f64,
        _failure: f64,
        _candidates: IndexSet,
    ) -> Result<Box<dyn CoefficientSource<Error = LearnError> + '_>, LearnError> {
        let offered = 2.0 * self.oracle.tolerance;
        if tolerance < offered * (1.0 - 1e-12) {
            return Err(LearnError::BadParameter { name: "tolerance", value: tolerance, expected: "must be at least twice the oracle tolerance" });
        }
        Ok(Box::new(PrivateCoefficients { oracle: self.oracle }))
    }

    fn labeled_examples(&mut self, m: u64) -> Result<Vec<Example>, LearnError> {
        let dim = self.dim();
        let counts = self.distribution.sample_counts(dim, m, &mut self.rng)?;
        self.used += m as u128;
        counts
            .into_iter()
            .map(|(point, count)| {
                let answer = self.oracle.query(conjunction(point.true_set())).map_err(budget_error)?;
                Ok(Example { point, label: 1.0 - answer, count })
            })
            .collect()
    }

    fn examples_used(&self) -> u128 {
        self.used
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseMetadata {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_bar: f64,
    pub queries_used: u64,
    pub queries_allowed: u64,
    pub tolerance: f64,
    pub noise_scale: f64,
    pub dataset_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ReleaseBody {
    /// `h ≈ c_D` from its large Fourier coefficients.
    FourierSummary { polynomial: SparsePolynomial },
    /// `h ≈ c_D` on layer `layer`.
    PolynomialSummary { layer: usize, polynomial: SparsePolynomial },
    /// `D̂` with `c_D̂` equal to the rounded hypothesis.
    SyntheticDataset {
        #[serde(serialize_with = "dataset_lines")]
        dataset: Dataset,
        #[serde(serialize_with = "coverage_json")]
        rounded: CoverageFunction,
        /// Terms of the learned hypothesis before rounding.
        learned_terms: usize,
    },
}

fn coverage_json<S: serde::Serializer>(c: &CoverageFunction, s: S) -> Result<S::Ok, S::Error> {
    c.to_json().serialize(s)
}

fn dataset_lines<S: serde::Serializer>(d: &Dataset, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let rows: Vec<(String, u64)> = d.rows.iter().map(|&(p, c)| (p.to_line(), c)).collect();
    let mut st = s.serialize_struct("Dataset", 2)?;
    st.serialize_field("dim", &d.dim)?;
    st.serialize_field("rows", &rows)?;
    st.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseSummary {
    pub metadata: ReleaseMetadata,
    #[serde(flatten)]
    pub body: ReleaseBody,
}

impl ReleaseSummary {
    pub fn dim(&self) -> usize {
        match &self.body {
            ReleaseBody::FourierSummary { polynomial } | ReleaseBody::PolynomialSummary { polynomial, .. } => polynomial.dim(),
            ReleaseBody::SyntheticDataset { dataset, .. } => dataset.dim(),
        }
    }

    /// Released answer to `CQ_D(AND_S)`, always in `[0, 1]`. An empty
    /// synthetic dataset stands for `c ≡ 0` and answers 1.
    pub fn answer(&self, s: IndexSet) -> f64 {
        let x = Point::from_raw(s.mask(), self.dim());
        match &self.body {
            ReleaseBody::FourierSummary { polynomial } | ReleaseBody::PolynomialSummary { polynomial, .. } => {
                (1.0 - polynomial.value(x)).clamp(0.0, 1.0)
            }
            ReleaseBody::SyntheticDataset { dataset, .. } => counting_query(dataset, conjunction(s)).unwrap_or(1.0),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize")
    }
}

/// `E_{x∼d} |answer(S_x) − CQ_D(AND_{S_x})|` from `samples` draws.
pub fn average_error(
    summary: &ReleaseSummary,
    data: &Dataset,
    queries: &DistributionSpec,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, PrivacyError> {
    let c = coverage_of_dataset(data)?;
    Ok(mean_mc(data.dim(), queries, samples, seed, |x| (summary.answer(x.true_set()) - (1.0 - c.value(x))).abs())?)
}

fn metadata(oracle: &PrivateOracle<'_>, p: &ReleaseParams) -> ReleaseMetadata {
    ReleaseMetadata {
        epsilon: p.epsilon,
        delta: p.delta,
        alpha_bar: p.alpha_bar,
        queries_used: oracle.queries_used(),
        queries_allowed: oracle.queries_allowed(),
        tolerance: oracle.tolerance(),
        noise_scale: oracle.scale(),
        dataset_size: oracle.dataset().len(),
    }
}

/// Query budget of the PAC learner at `params`: `n` singleton estimates plus
/// the lattice pool with every coordinate a candidate.
pub fn all_marginals_queries(dim: usize, params: &PacParams) -> u64 {
    dim as u64 + pool_bound(dim, params.threshold, params.tolerance, params.max_level)
}

/// All conjunctions under the uniform query distribution, through the PAC
/// learner with `τ = ᾱ²/24`.
pub fn release_all_marginals(data: &Dataset, p: &ReleaseParams) -> Result<ReleaseSummary, PrivacyError> {
    ReleaseVariant::AllMarginals.release(data, p)
}

/// Distinct labeled points the layer-`k` regression can ask about.
pub fn k_way_queries(dim: usize, k: usize, params: &AgnosticParams) -> u64 {
    let features: f64 = (0..=params.degree.min(dim)).map(|t| binomial_coefficient(dim, t)).sum();
    let examples = (params.sample_factor * features / (params.accuracy * params.accuracy)).ceil();
    examples.min(binomial_coefficient(dim, k)) as u64
}

/// Conjunctions of exactly `k` variables, through the agnostic learner on
/// layer `k` at excess error `ᾱ/2` with `τ = ᾱ/4`.
pub fn release_k_way(data: &Dataset, k: usize, p: &ReleaseParams) -> Result<ReleaseSummary, PrivacyError> {
    ReleaseVariant::KWay { k }.release(data, p)
}

/// Parameters of the proper learner inside [`release_synthetic`]: excess
/// error `ᾱ/2` and size bound `2^n`, the most rows `c_D` can have distinct.
pub fn synthetic_params(dim: usize, alpha_bar: f64) -> Result<ProperParams, LearnError> {
    ProperParams::new(alpha_bar / 2.0, Some((dim as f64).exp2().max(1.0)))
}

/// Query budget and per-answer tolerance of [`release_synthetic`].
pub fn synthetic_budget(dim: usize, alpha_bar: f64) -> Result<(u64, f64), LearnError> {
    let params = synthetic_params(dim, alpha_bar)?;
    let pool = pool_bound(dim, params.keep_threshold, params.search_tolerance, params.max_level);
    let fit = fit_samples(&params, pool as usize).min(1u64 << dim);
    let tolerance = (params.screen_tolerance.min(params.search_tolerance) / 2.0).min(alpha_bar / 8.0);
    Ok((dim as u64 + pool + fit, tolerance))
}

/// A synthetic dataset whose coverage function is the proper learner's
/// hypothesis with weights rounded down to multiples of `1/N`,
/// `N = ⌈4t/ᾱ⌉`.
pub fn release_synthetic(data: &Dataset, p: &ReleaseParams) -> Result<ReleaseSummary, PrivacyError> {
    ReleaseVariant::Synthetic.release(data, p)
}

/// The three release algorithms, by the query family they answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ReleaseVariant {
    AllMarginals,
    KWay { k: usize },
    Synthetic,
}

impl ReleaseVariant {
    /// Query budget `q` and per-answer tolerance `τ`.
    pub fn budget(&self, dim: usize, alpha_bar: f64) -> Result<(u64, f64), PrivacyError> {
        Ok(match *self {
            ReleaseVariant::AllMarginals => (all_marginals_queries(dim, &PacParams::new(alpha_bar)?), alpha_bar * alpha_bar / 24.0),
            ReleaseVariant::KWay { k } => (k_way_queries(dim, k, &AgnosticParams::new(alpha_bar / 2.0)?), alpha_bar / 4.0),
            ReleaseVariant::Synthetic => synthetic_budget(dim, alpha_bar)?,
        })
    }

    /// The smallest dataset the release accepts.
    pub fn required_size(&self, dim: usize, p: &ReleaseParams) -> Result<f64, PrivacyError> {
        p.validate()?;
        let (q, tolerance) = self.budget(dim, p.alpha_bar)?;
        Ok(gate_size(q, tolerance, p.epsilon, p.delta))
    }

    /// Distribution over `x` whose conjunctions `AND_{S_x}` the release targets.
    pub fn query_distribution(&self) -> DistributionSpec {
        match *self {
            ReleaseVariant::KWay { k } => DistributionSpec::Layer { k },
            _ => DistributionSpec::Uniform,
        }
    }

    /// The gated query oracle a release of `data` runs against.
    pub fn oracle<'d>(&self, data: &'d Dataset, p: &ReleaseParams) -> Result<PrivateOracle<'d>, PrivacyError> {
        p.validate()?;
        if let ReleaseVariant::KWay { k } = *self {
            if k > data.dim() {
                return Err(PrivacyError::BadParameter { name: "k", value: k as f64, expected: "must not exceed the dimension" });
            }
        }
        let (queries, tolerance) = self.budget(data.dim(), p.alpha_bar)?;
        PrivateOracle::new(data, queries, tolerance, p.epsilon, p.delta, p.seed)
    }

    /// Runs the release on an oracle from [`ReleaseVariant::oracle`], which
    /// keeps the noise log for inspection.
    pub fn release_on(&self, oracle: &mut PrivateOracle<'_>, p: &ReleaseParams) -> Result<ReleaseSummary, PrivacyError> {
        let dim = oracle.dataset().dim();
        let access_seed = cube::child_seed(p.seed, 1);
        let body = match *self {
            ReleaseVariant::AllMarginals => {
                let params = PacParams::new(p.alpha_bar)?;
                let mut access = PrivateAccess::new(oracle, DistributionSpec::Uniform, access_seed)?;
                let out = pac_learn(&mut access, &params)?;
                ReleaseBody::FourierSummary { polynomial: out.hypothesis.clamped(true) }
            }
            ReleaseVariant::KWay { k } => {
                let params = AgnosticParams::new(p.alpha_bar / 2.0)?;
                let layer = DistributionSpec::Layer { k };
                let mut access = PrivateAccess::new(oracle, layer.clone(), access_seed)?;
                let out = agnostic_learn(&mut access, &layer, &params)?;
                ReleaseBody::PolynomialSummary { layer: k, polynomial: out.hypothesis }
            }
            ReleaseVariant::Synthetic => {
                let params = synthetic_params(dim, p.alpha_bar)?;
                let mut access = PrivateAccess::new(oracle, DistributionSpec::Uniform, access_seed)?;
                let out = proper_learn(&mut access, &params)?;
                let e = emit_synthetic(&out.hypothesis, p.alpha_bar)?;
                ReleaseBody::SyntheticDataset { dataset: e.dataset, rounded: e.rounded, learned_terms: e.terms }
            }
        };
        Ok(ReleaseSummary { metadata: metadata(oracle, p), body })
    }

    pub fn release(&self, data: &Dataset, p: &ReleaseParams) -> Result<ReleaseSummary, PrivacyError> {
        let mut oracle = self.oracle(data, p)?;
        self.release_on(&mut oracle, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    /// `D̂`, of size `N`.
    pub dataset: Dataset,
    /// `H̃ = c_D̂`.
    pub rounded: CoverageFunction,
    /// `t`, the positive terms of `h` once the constant is moved onto `OR_{[n]}`.
    pub terms: usize,
}

/// Rounds `h` and materializes it as rows. A constant part becomes weight on
/// `OR_{[n]}`, which differs from it only at the all-`(+1)` point. Each
/// `OR_S` with rounded weight `j/N` gets `j` copies of the point that is
/// `+1` exactly on `S`; all-`(−1)` rows fill the dataset up to `N`.
/// Checks `c_D̂ = H̃` before returning.
pub fn emit_synthetic(h: &CoverageFunction, alpha_bar: f64) -> Result<Emission, PrivacyError> {
    let dim = h.dim();
    let full = IndexSet::full(dim);
    let mut weights: BTreeMap<IndexSet, f64> = BTreeMap::new();
    for &(s, w) in h.terms() {
        *weights.entry(s).or_default() += w;
    }
    if h.affine() > 0.0 && dim > 0 {
        *weights.entry(full).or_default() += h.affine();
    }
    weights.retain(|_, w| *w > 0.0);
    let t = weights.len();
    if t == 0 {
        return Ok(Emission { dataset: Dataset::from_counts(dim, [])?, rounded: CoverageFunction::zero(dim)?, terms: 0 });
    }
    let slots = (4.0 * t as f64 / alpha_bar).ceil() as u64;
    let mut rows = Vec::new();
    let mut rounded = Vec::new();
    let mut used = 0u64;
    for (&s, &w) in &weights {
        // The small slack keeps exact grid values like 0.25·16 from rounding down.
        let copies = (w * slots as f64 + 1e-9).floor() as u64;
        if copies > 0 {
            rows.push((Point::from_raw(full.mask() & !s.mask(), dim), copies));
            rounded.push((s, copies as f64 / slots as f64));
            used += copies;
        }
    }
    if used > slots {
        return Err(PrivacyError::Emitter(format!("{used} copies exceed the {slots} slots")));
    }
    rows.push((Point::from_raw(full.mask(), dim), slots - used));
    let dataset = Dataset::from_counts(dim, rows)?;
    let rounded = CoverageFunction::new(dim, 0.0, rounded)?;
    check_emitted(&dataset, &rounded)?;
    Ok(Emission { dataset, rounded, terms: t })
}

fn check_emitted(dataset: &Dataset, rounded: &CoverageFunction) -> Result<(), PrivacyError> {
    let dim = dataset.dim();
    let c = coverage_of_dataset(dataset)?;
    let points: Vec<Point> = if dim <= EMITTER_CHECK_MAX_DIM {
        cube::all_points(dim).collect()
    } else {
        let mut rng = cube::rng_from_seed(dim as u64);
        (0..EMITTER_CHECK_SAMPLES).map(|_| DistributionSpec::Uniform.sample(dim, &mut rng)).collect()
    };
    match points.into_iter().find(|&x| (c.value(x) - rounded.value(x)).abs() > 1e-9) {
        Some(x) => Err(PrivacyError::Emitter(format!("c_D̂ = {} but H̃ = {} at {}", c.value(x), rounded.value(x), x.to_line()))),
        None => Ok(()),
    }
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample test of `samples` against `Laplace(0, scale)`.
pub fn ks_test_laplace(samples: &[f64], scale: f64) -> KsTest {
    let cdf = |x: f64| if x < 0.0 { 0.5 * (x / scale).exp() } else { 1.0 - 0.5 * (-x / scale).exp() };
    ks_test(samples, cdf)
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let root = n.sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * statistic;
    KsTest { statistic, p_value: kolmogorov_tail(lambda) }
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
