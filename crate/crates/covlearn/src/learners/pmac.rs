//! PMAC learning: a hypothesis `h` with `h ≤ c ≤ (1+γ)h` on all but a
//! `δ` fraction of the cube.
//!
//! When `c` is rarely small compared to its maximum, one rescaled PAC
//! hypothesis shifted down and floored at `M̃/4` does the job. Otherwise some
//! coordinate `j` forces `c` to be large whenever `x_j = −1`; that half is
//! learned the same way and the recursion continues on `x_j = +1`.

use rand::distr::Distribution;
use rand_distr::Hypergeometric;
use serde::{Deserialize, Serialize};

use super::params::{PacParams, PmacParams};
use super::{pac_learn, LearnError, SampledAccess, SparsePolynomial};
use crate::cube::{self, binomial, CubeFunction, CubeRng, IndexSet, Point};
use crate::estimation::{hoeffding_samples, SampleBatch, DRAW_CHUNK};
use crate::oracle::{Example, ExampleOracle, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PmacLeaf {
    Zero,
    /// `max{M̃/4, 3M̃(h′(x) − shift)}` with `h′` clamped to `[0, 1]`.
    Scaled { polynomial: SparsePolynomial, m_tilde: f64, shift: f64 },
}

impl PmacLeaf {
    fn combine(&self, inner: f64) -> f64 {
        match self {
            PmacLeaf::Zero => 0.0,
            PmacLeaf::Scaled { m_tilde, shift, .. } => (m_tilde / 4.0).max(3.0 * m_tilde * (inner - shift)),
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        match self {
            PmacLeaf::Zero => 0.0,
            PmacLeaf::Scaled { polynomial, .. } => self.combine(polynomial.value(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PmacNode {
    Leaf { leaf: PmacLeaf },
    /// `minus` on `x_pivot = −1`, `plus` otherwise.
    Split { pivot: usize, minus: PmacLeaf, plus: Box<PmacNode> },
}

/// A decision list over pivot coordinates with a leaf per branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmacHypothesis {
    pub dim: usize,
    pub root: PmacNode,
}

/// A branch of the list: the coordinates it fixes and its leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct PmacRule<'a> {
    pub prefix: Vec<(usize, i8)>,
    pub leaf: &'a PmacLeaf,
}

impl PmacRule<'_> {
    pub fn matches(&self, x: Point) -> bool {
        self.prefix.iter().all(|&(j, s)| x.coordinate(j) == s)
    }
}

impl PmacHypothesis {
    pub fn zero(dim: usize) -> Self {
        PmacHypothesis { dim, root: PmacNode::Leaf { leaf: PmacLeaf::Zero } }
    }

    /// Branches in list order.
    pub fn rules(&self) -> Vec<PmacRule<'_>> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                PmacNode::Leaf { leaf } => {
                    out.push(PmacRule { prefix, leaf });
                    return out;
                }
                PmacNode::Split { pivot, minus, plus } => {
                    let mut p = prefix.clone();
                    p.push((*pivot, -1));
                    out.push(PmacRule { prefix: p, leaf: minus });
                    prefix.push((*pivot, 1));
                    node = plus;
                }
            }
        }
    }

    /// Number of leaves along the list.
    pub fn depth(&self) -> usize {
        self.rules().len()
    }

    pub fn leaf_for(&self, x: Point) -> &PmacLeaf {
        let mut node = &self.root;
        loop {
            match node {
                PmacNode::Leaf { leaf } => return leaf,
                PmacNode::Split { pivot, minus, plus } => {
                    if x.coordinate(*pivot) == -1 {
                        return minus;
                    }
                    node = plus;
                }
            }
        }
    }

    /// Evaluator with each leaf polynomial tabulated.
    pub fn compile(&self) -> CompiledPmac<'_> {
        let rules = self.rules();
        let compiled = rules
            .iter()
            .map(|r| match r.leaf {
                PmacLeaf::Zero => None,
                PmacLeaf::Scaled { polynomial, .. } => Some(polynomial.compile()),
            })
            .collect();
        CompiledPmac { dim: self.dim, rules, compiled }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("hypotheses always serialize")
    }
}

impl CubeFunction for PmacHypothesis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        self.leaf_for(x).value(x)
    }
}

pub struct CompiledPmac<'a> {
    dim: usize,
    rules: Vec<PmacRule<'a>>,
    compiled: Vec<Option<super::polynomial::CompiledPolynomial<'a>>>,
}

impl CubeFunction for CompiledPmac<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        let i = self.rules.iter().position(|r| r.matches(x)).expect("rules cover the cube");
        match &self.compiled[i] {
            None => 0.0,
            Some(p) => self.rules[i].leaf.combine(p.value(x)),
        }
    }
}

/// Examples conditioned on `x_coord = sign`, found by rejection. Accepted
/// examples then get a fresh uniform bit at `coord`, so the restricted
/// function is seen as a function of all `n` coordinates that ignores
/// `coord`.
pub struct RestrictedOracle<'o> {
    inner: &'o mut dyn ExampleOracle,
    coord: usize,
    sign: i8,
    rng: CubeRng,
    drawn: u128,
}

impl<'o> RestrictedOracle<'o> {
    pub fn new(inner: &'o mut dyn ExampleOracle, coord: usize, sign: i8, seed: u64) -> Self {
        RestrictedOracle { inner, coord, sign, rng: cube::rng_from_seed(seed), drawn: 0 }
    }
}

/// Acceptance rate assumed when sizing rejection chunks.
const ASSUMED_ACCEPTANCE: f64 = 0.5;
/// Draws allowed per wanted example, relative to the assumed rate.
const REJECTION_CAP: f64 = 100.0;

impl ExampleOracle for RestrictedOracle<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        let bit = 1u64 << (self.coord - 1);
        let want_set = self.sign == -1;
        let chunk = ((m as f64 / ASSUMED_ACCEPTANCE).ceil() as u64).clamp(1, DRAW_CHUNK);
        let cap = REJECTION_CAP * m as f64 / ASSUMED_ACCEPTANCE;
        let (mut accepted, mut kept, mut drawn) = (Vec::new(), 0u64, 0f64);
        while kept < m {
            if drawn >= cap {
                return Err(OracleError::Exhausted { wanted: m, accepted: kept, drawn: drawn as u64 });
            }
            for e in self.inner.draw(chunk)? {
                if (e.point.bits() & bit != 0) == want_set {
                    kept += e.count;
                    accepted.push(e);
                }
            }
            drawn += chunk as f64;
        }
        // Keep a uniformly random `m` of the accepted examples.
        let mut left_total = kept;
        let mut need = m;
        for e in accepted.iter_mut() {
            let take = if need == 0 {
                0
            } else if e.count == left_total {
                need
            } else {
                thin(left_total, e.count, need, &mut self.rng)
            };
            left_total -= e.count;
            need -= take;
            e.count = take;
        }
        let dim = self.inner.dim();
        let mut out = Vec::with_capacity(2 * accepted.len());
        for e in accepted.into_iter().filter(|e| e.count > 0) {
            let minus = binomial(e.count, 0.5, &mut self.rng);
            for (bits, count) in [(e.point.bits() | bit, minus), (e.point.bits() & !bit, e.count - minus)] {
                if count > 0 {
                    out.push(Example { point: Point::new(bits, dim)?, label: e.label, count });
                }
            }
        }
        self.drawn += m as u128;
        Ok(out)
    }

    fn examples_drawn(&self) -> u128 {
        self.drawn
    }
}

/// Successes among `need` draws without replacement from `total` items of
/// which `successes` count. The hypergeometric sampler loses precision
/// above `EXACT_THINNING`; there the relative spread is below `1e−6` and a
/// binomial draw is used instead.
fn thin(total: u64, successes: u64, need: u64, rng: &mut CubeRng) -> u64 {
    if total <= EXACT_THINNING {
        Hypergeometric::new(total, successes, need).expect("valid hypergeometric").sample(rng)
    } else {
        binomial(need, successes as f64 / total as f64, rng).clamp(need.saturating_sub(total - successes), successes.min(need))
    }
}

const EXACT_THINNING: u64 = 1 << 40;

/// Labels `y ↦ clamp(y·scale, 0, 1)`.
pub struct ScaledOracle<'o> {
    inner: &'o mut dyn ExampleOracle,
    scale: f64,
}

impl<'o> ScaledOracle<'o> {
    pub fn new(inner: &'o mut dyn ExampleOracle, scale: f64) -> Self {
        ScaledOracle { inner, scale }
    }
}

impl ExampleOracle for ScaledOracle<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        let mut rows = self.inner.draw(m)?;
        rows.iter_mut().for_each(|e| e.label = (e.label * self.scale).clamp(0.0, 1.0));
        Ok(rows)
    }

    fn examples_drawn(&self) -> u128 {
        self.inner.examples_drawn()
    }
}

struct Learner<'p> {
    params: &'p PmacParams,
    dim: usize,
    seed: u64,
    streams: u64,
}

impl Learner<'_> {
    fn next_seed(&mut self) -> u64 {
        self.streams += 1;
        cube::child_seed(self.seed, self.streams)
    }

    fn max_label(&self, oracle: &mut dyn ExampleOracle) -> Result<f64, LearnError> {
        Ok(oracle.draw(self.params.max_samples)?.iter().map(|e| e.label).fold(0.0, f64::max))
    }

    /// Best of several PAC runs on `c/(3M̃)`, judged on a held-out batch.
    fn leaf(
        &mut self,
        oracle: &mut dyn ExampleOracle,
        m_tilde: f64,
        accuracy: f64,
        shift: f64,
        fixed: IndexSet,
    ) -> Result<PmacLeaf, LearnError> {
        let mut scaled = ScaledOracle::new(oracle, 1.0 / (3.0 * m_tilde));
        let pac = PacParams::new(accuracy)?;
        let runs = self.params.boost_runs.max(1);
        let mut candidates = Vec::with_capacity(runs);
        for _ in 0..runs {
            let out = pac_learn(&mut SampledAccess::new(&mut scaled), &pac)?;
            candidates.push(out.hypothesis.average_out(fixed).clamped(true));
        }
        let best = if runs == 1 {
            candidates.pop().expect("one run")
        } else {
            let m = hoeffding_samples(accuracy / 4.0, self.params.eta / (2.0 * runs as f64));
            let held_out = SampledAccess::new(&mut scaled).batch(m)?;
            let scores: Vec<f64> = candidates
                .iter()
                .map(|h| {
                    let h = h.compile();
                    held_out.mean_of(|e| (h.value(e.point) - e.label).abs())
                })
                .collect();
            let i = (0..runs).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).expect("at least one run");
            candidates.swap_remove(i)
        };
        Ok(PmacLeaf::Scaled { polynomial: best, m_tilde, shift })
    }

    fn node(&mut self, oracle: &mut dyn ExampleOracle, level: usize, fixed: IndexSet) -> Result<PmacNode, LearnError> {
        let p = self.params;
        let zero = PmacNode::Leaf { leaf: PmacLeaf::Zero };
        if level > p.max_depth {
            return Ok(zero);
        }
        let m_tilde = self.max_label(oracle)?;
        if m_tilde <= 0.0 {
            return Ok(zero);
        }
        let low = SampledAccess::new(oracle).batch(hoeffding_samples(2.0 * p.low_mass_tolerance, p.eta))?;
        let low_mass = low.mean_of(|e| if e.label <= m_tilde / 4.0 { 1.0 } else { 0.0 });
        if low_mass < p.low_mass_cutoff {
            let leaf = self.leaf(oracle, m_tilde, p.leaf_accuracy, p.leaf_shift, fixed)?;
            return Ok(PmacNode::Leaf { leaf });
        }
        let Some(pivot) = self.find_pivot(oracle, m_tilde, fixed)? else {
            return Ok(zero);
        };
        let seed = self.next_seed();
        let minus = {
            let mut restricted = RestrictedOracle::new(oracle, pivot, -1, seed);
            self.leaf(&mut restricted, m_tilde, p.branch_accuracy, p.branch_shift, fixed.with(pivot))?
        };
        let seed = self.next_seed();
        let plus = {
            let mut restricted = RestrictedOracle::new(oracle, pivot, 1, seed);
            self.node(&mut restricted, level + 1, fixed.with(pivot))?
        };
        Ok(PmacNode::Split { pivot, minus, plus: Box::new(plus) })
    }

    /// First free coordinate whose `x_j = −1` examples all carry large labels.
    fn find_pivot(&self, oracle: &mut dyn ExampleOracle, m_tilde: f64, fixed: IndexSet) -> Result<Option<usize>, LearnError> {
        let floor = m_tilde / self.params.pivot_divisor;
        let batch: SampleBatch = SampledAccess::new(oracle).batch(self.params.pivot_samples(self.dim) as u128)?;
        Ok((1..=self.dim)
            .filter(|&j| !fixed.contains(j))
            .find(|&j| batch.rows().iter().filter(|e| e.point.coordinate(j) == -1).all(|e| e.label >= floor)))
    }
}

/// Learns a multiplicative approximation of the non-negative function
/// labeling `oracle`'s uniform examples. `seed` drives the restriction
/// oracles; the examples' own randomness lives in `oracle`.
pub fn pmac_learn(oracle: &mut dyn ExampleOracle, params: &PmacParams, seed: u64) -> Result<PmacHypothesis, LearnError> {
    let dim = oracle.dim();
    let mut learner = Learner { params, dim, seed, streams: 0 };
    let root = learner.node(oracle, 0, IndexSet::EMPTY)?;
    Ok(PmacHypothesis { dim, root })
}

/// Fraction of `points` (with multiplicity) where `h ≤ c ≤ (1+γ)h`.
pub fn multiplicative_coverage(h: &dyn CubeFunction, c: &dyn CubeFunction, gamma: f64, points: &[(Point, u64)]) -> f64 {
    let total: u64 = points.iter().map(|p| p.1).sum();
    let good: u64 = points
        .iter()
        .filter(|(x, _)| {
            let (hv, cv) = (h.value(*x), c.value(*x));
            hv <= cv && cv <= (1.0 + gamma) * hv
        })
        .map(|p| p.1)
        .sum();
    good as f64 / total as f64
}
