//! Points, index sets, evaluation of disjunctions and parities, and sampling
//! on the cube {-1,+1}^n.
//!
//! A point is stored as a `u64` bitmask: bit `i-1` is set when coordinate
//! `i` equals -1 ("true"). Every module and every file format uses this
//! convention. Dimensions above 64 are rejected.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 64;

/// Above this many examples, sparse-cube sampling refuses instead of
/// materializing one row per draw.
pub const DIRECT_SAMPLE_CAP: u64 = 50_000_000;

/// The random generator used throughout the crate.
pub type CubeRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubeError {
    #[error("dimension {0} is outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} outside 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot draw {0} examples on a cube this large")]
    SampleTooLarge(u64),
}

fn dim_mask(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

fn check_dim(dim: usize) -> Result<(), CubeError> {
    if dim == 0 || dim > MAX_DIM {
        Err(CubeError::BadDimension(dim))
    } else {
        Ok(())
    }
}

/// A subset of `{1..64}`, stored as a bitmask (bit `i-1` for index `i`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndexSet(u64);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    pub fn from_mask(mask: u64) -> Self {
        IndexSet(mask)
    }

    /// Builds a set from 1-based indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self, CubeError> {
        let mut mask = 0u64;
        for &i in indices {
            if i == 0 || i > MAX_DIM {
                return Err(CubeError::IndexOutOfRange { index: i, dim: MAX_DIM });
            }
            mask |= 1 << (i - 1);
        }
        Ok(IndexSet(mask))
    }

    pub fn singleton(i: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&i));
        IndexSet(1 << (i - 1))
    }

    /// `{1..dim}`.
    pub fn full(dim: usize) -> Self {
        IndexSet(dim_mask(dim))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        (1..=MAX_DIM).contains(&i) && self.0 & (1 << (i - 1)) != 0
    }

    pub fn with(self, i: usize) -> Self {
        IndexSet(self.0 | (1 << (i - 1)))
    }

    pub fn without(self, i: usize) -> Self {
        IndexSet(self.0 & !(1 << (i - 1)))
    }

    pub fn union(self, other: Self) -> Self {
        IndexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        IndexSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        IndexSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest member, or 0 for the empty set.
    pub fn max_index(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    /// Members in increasing order, 1-based.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i + 1)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = IndexSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(IndexSet(cur))
        })
    }

    fn check_within(self, dim: usize) -> Result<(), CubeError> {
        if self.max_index() > dim {
            Err(CubeError::IndexOutOfRange { index: self.max_index(), dim })
        } else {
            Ok(())
        }
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        IndexSet::from_indices(&v).map_err(serde::de::Error::custom)
    }
}

/// A point of {-1,+1}^n.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    bits: u64,
    dim: u32,
}

impl Point {
    /// `bits` marks the coordinates equal to -1.
    pub fn new(bits: u64, dim: usize) -> Result<Self, CubeError> {
        check_dim(dim)?;
        if bits & !dim_mask(dim) != 0 {
            return Err(CubeError::IndexOutOfRange { index: 64 - bits.leading_zeros() as usize, dim });
        }
        Ok(Point { bits, dim: dim as u32 })
    }

    /// Like [`Point::new`] but masks stray high bits. `dim` must be valid.
    pub(crate) fn from_raw(bits: u64, dim: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&dim));
        Point { bits: bits & dim_mask(dim), dim: dim as u32 }
    }

    pub fn all_plus(dim: usize) -> Result<Self, CubeError> {
        Point::new(0, dim)
    }

    pub fn all_minus(dim: usize) -> Result<Self, CubeError> {
        check_dim(dim)?;
        Ok(Point { bits: dim_mask(dim), dim: dim as u32 })
    }

    /// From coordinate values in {-1,+1}.
    pub fn from_signs(signs: &[i8]) -> Result<Self, CubeError> {
        check_dim(signs.len())?;
        let mut bits = 0;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                -1 => bits |= 1 << i,
                1 => {}
                _ => {
                    return Err(CubeError::Parse { line: 0, reason: format!("coordinate value {s} is not ±1") })
                }
            }
        }
        Ok(Point { bits, dim: signs.len() as u32 })
    }

    pub fn dim(self) -> usize {
        self.dim as usize
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    /// Value of coordinate `i` (1-based) in {-1,+1}.
    pub fn coordinate(self, i: usize) -> i8 {
        if self.bits & (1 << (i - 1)) != 0 {
            -1
        } else {
            1
        }
    }

    pub fn signs(self) -> Vec<i8> {
        (1..=self.dim()).map(|i| self.coordinate(i)).collect()
    }

    /// `S_x = {i : x_i = -1}`.
    pub fn true_set(self) -> IndexSet {
        IndexSet(self.bits)
    }

    /// `{i : x_i = +1}`.
    pub fn false_set(self) -> IndexSet {
        IndexSet(!self.bits & dim_mask(self.dim()))
    }

    /// Number of coordinates equal to -1.
    pub fn weight(self) -> usize {
        self.bits.count_ones() as usize
    }

    /// The point whose -1 coordinates are exactly `s`.
    pub fn indicator(s: IndexSet, dim: usize) -> Result<Self, CubeError> {
        Point::new(s.mask(), dim)
    }

    /// One line of the shared text format: a `1` at position `i` means `x_i = -1`.
    pub fn to_line(self) -> String {
        (0..self.dim()).map(|i| if self.bits >> i & 1 == 1 { '1' } else { '0' }).collect()
    }

    pub fn parse_line(line: &str) -> Result<Self, CubeError> {
        let line = line.trim();
        check_dim(line.len()).map_err(|e| CubeError::Parse { line: 0, reason: e.to_string() })?;
        let mut bits = 0u64;
        for (i, ch) in line.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                other => return Err(CubeError::Parse { line: 0, reason: format!("unexpected character {other:?}") }),
            }
        }
        Ok(Point { bits, dim: line.len() as u32 })
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", self.to_line())
    }
}

/// Writes points in the shared text format, one per line.
pub fn format_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&p.to_line());
        out.push('\n');
    }
    out
}

/// Parses the shared text format. Blank lines are skipped; all points must
/// share one dimension.
pub fn parse_points(text: &str) -> Result<Vec<Point>, CubeError> {
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p = Point::parse_line(line).map_err(|e| match e {
            CubeError::Parse { reason, .. } => CubeError::Parse { line: idx + 1, reason },
            other => other,
        })?;
        if let Some(first) = points.first().map(|q: &Point| q.dim()) {
            if first != p.dim() {
                return Err(CubeError::Parse {
                    line: idx + 1,
                    reason: format!("dimension {} differs from {first}", p.dim()),
                });
            }
        }
        points.push(p);
    }
    Ok(points)
}

/// `OR_S(x)`: 1 iff some `i` in `s` has `x_i = -1`. The empty set gives 0.
pub fn eval_disjunction(s: IndexSet, x: Point) -> Result<u8, CubeError> {
    s.check_within(x.dim())?;
    Ok((s.0 & x.bits != 0) as u8)
}

/// `χ_T(x) = ∏_{i∈T} x_i`. The empty set gives +1.
pub fn eval_parity(t: IndexSet, x: Point) -> Result<i8, CubeError> {
    t.check_within(x.dim())?;
    Ok(parity(t.0, x.bits))
}

#[inline]
pub(crate) fn parity(t: u64, x: u64) -> i8 {
    if (t & x).count_ones() & 1 == 1 {
        -1
    } else {
        1
    }
}

/// A real-valued function on a fixed cube.
pub trait CubeFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: Point) -> f64;

    /// The function as an explicit coverage function, when it is stored as one.
    fn as_coverage(&self) -> Option<&crate::coverage::CoverageFunction> {
        None
    }
}

impl<T: CubeFunction + ?Sized> CubeFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: Point) -> f64 {
        (**self).value(x)
    }
    fn as_coverage(&self) -> Option<&crate::coverage::CoverageFunction> {
        (**self).as_coverage()
    }
}

impl<T: CubeFunction + ?Sized> CubeFunction for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: Point) -> f64 {
        (**self).value(x)
    }
    fn as_coverage(&self) -> Option<&crate::coverage::CoverageFunction> {
        (**self).as_coverage()
    }
}

/// Wraps a closure as a [`CubeFunction`].
pub struct FnFunction<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(Point) -> f64> FnFunction<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnFunction { dim, f }
    }
}

impl<F: Fn(Point) -> f64> CubeFunction for FnFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: Point) -> f64 {
        (self.f)(x)
    }
}

/// A sampling law on the cube. Weight means the number of -1 coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform,
    /// `biases[i] = Pr[x_{i+1} = -1]`, each in (0,1).
    Product { biases: Vec<f64> },
    /// Uniform over points of weight `k`.
    Layer { k: usize },
    /// Layer `k` chosen with probability `weights[k]`, then uniform within it.
    SymmetricMixture { weights: Vec<f64> },
}

impl DistributionSpec {
    pub fn validate(&self, dim: usize) -> Result<(), CubeError> {
        check_dim(dim)?;
        match self {
            DistributionSpec::Uniform => Ok(()),
            DistributionSpec::Product { biases } => {
                if biases.len() != dim {
                    return Err(CubeError::InvalidDistribution(format!(
                        "product.biases has {} entries for dimension {dim}",
                        biases.len()
                    )));
                }
                match biases.iter().position(|&b| !(b > 0.0 && b < 1.0)) {
                    Some(i) => Err(CubeError::InvalidDistribution(format!(
                        "product.biases[{i}] = {} is not in (0,1)",
                        biases[i]
                    ))),
                    None => Ok(()),
                }
            }
            DistributionSpec::Layer { k } => {
                if *k > dim {
                    Err(CubeError::InvalidDistribution(format!("layer.k = {k} exceeds dimension {dim}")))
                } else {
                    Ok(())
                }
            }
            DistributionSpec::SymmetricMixture { weights } => {
                if weights.len() != dim + 1 {
                    return Err(CubeError::InvalidDistribution(format!(
                        "symmetric_mixture.weights has {} entries, expected {}",
                        weights.len(),
                        dim + 1
                    )));
                }
                if let Some(i) = weights.iter().position(|&w| !(w >= 0.0 && w.is_finite())) {
                    return Err(CubeError::InvalidDistribution(format!(
                        "symmetric_mixture.weights[{i}] = {} is negative",
                        weights[i]
                    )));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(CubeError::InvalidDistribution(format!(
                        "symmetric_mixture.weights sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Probability of drawing `x`.
    pub fn probability(&self, x: Point) -> f64 {
        let dim = x.dim();
        match self {
            DistributionSpec::Uniform => 0.5f64.powi(dim as i32),
            DistributionSpec::Product { biases } => (0..dim)
                .map(|i| if x.bits >> i & 1 == 1 { biases[i] } else { 1.0 - biases[i] })
                .product(),
            DistributionSpec::Layer { k } => {
                if x.weight() == *k {
                    1.0 / binomial_coefficient(dim, *k)
                } else {
                    0.0
                }
            }
            DistributionSpec::SymmetricMixture { weights } => {
                let w = x.weight();
                weights[w] / binomial_coefficient(dim, w)
            }
        }
    }

    /// Draws one point.
    pub fn sample(&self, dim: usize, rng: &mut CubeRng) -> Point {
        match self {
            DistributionSpec::Uniform => Point::from_raw(rng.random::<u64>(), dim),
            DistributionSpec::Product { biases } => {
                let mut bits = 0u64;
                for (i, &b) in biases.iter().enumerate() {
                    if rng.random::<f64>() < b {
                        bits |= 1 << i;
                    }
                }
                Point::from_raw(bits, dim)
            }
            DistributionSpec::Layer { k } => sample_layer(dim, *k, rng),
            DistributionSpec::SymmetricMixture { weights } => {
                let k = pick_index(weights, rng);
                sample_layer(dim, k, rng)
            }
        }
    }

    /// Draws `m` points and returns them as distinct points with
    /// multiplicities, sorted by point.
    ///
    /// On small cubes the counts are produced by splitting `m` coordinate by
    /// coordinate with binomial draws, which has exactly the law of `m`
    /// independent draws but costs at most one draw per visited sub-cube.
    pub fn sample_counts(&self, dim: usize, m: u64, rng: &mut CubeRng) -> Result<Vec<(Point, u64)>, CubeError> {
        if m == 0 {
            return Ok(Vec::new());
        }
        let small_cube = dim <= 26 && (1u64 << dim) <= m.saturating_mul(8);
        if !small_cube && m > DIRECT_SAMPLE_CAP {
            return Err(CubeError::SampleTooLarge(m));
        }
        let mut out = Vec::new();
        if small_cube {
            match self {
                DistributionSpec::SymmetricMixture { weights } => {
                    for (k, c) in split_multinomial(weights, m, rng).into_iter().enumerate() {
                        if c > 0 {
                            split_counts(dim, &DistributionSpec::Layer { k }, 0, 0, 0, c, rng, &mut out);
                        }
                    }
                    out.sort_unstable_by_key(|(p, _)| p.bits);
                }
                _ => split_counts(dim, self, 0, 0, 0, m, rng, &mut out),
            }
        } else {
            let mut pts: Vec<u64> = (0..m).map(|_| self.sample(dim, rng).bits).collect();
            pts.sort_unstable();
            for b in pts {
                match out.last_mut() {
                    Some((p, c)) if p.bits == b => *c += 1,
                    _ => out.push((Point::from_raw(b, dim), 1)),
                }
            }
        }
        Ok(out)
    }
}

/// Depth-first binomial splitting. `depth` coordinates are fixed in
/// `prefix`, of which `weight` are -1.
#[allow(clippy::too_many_arguments)]
fn split_counts(
    dim: usize,
    spec: &DistributionSpec,
    depth: usize,
    prefix: u64,
    weight: usize,
    count: u64,
    rng: &mut CubeRng,
    out: &mut Vec<(Point, u64)>,
) {
    if depth == dim {
        out.push((Point::from_raw(prefix, dim), count));
        return;
    }
    let p_minus = match spec {
        DistributionSpec::Uniform => 0.5,
        DistributionSpec::Product { biases } => biases[depth],
        DistributionSpec::Layer { k } => (k - weight) as f64 / (dim - depth) as f64,
        DistributionSpec::SymmetricMixture { .. } => unreachable!("mixtures are split by layer first"),
    };
    let minus = binomial(count, p_minus, rng);
    // Visit the +1 branch first so that output is sorted by bits.
    if count - minus > 0 {
        split_counts(dim, spec, depth + 1, prefix, weight, count - minus, rng, out);
    }
    if minus > 0 {
        split_counts(dim, spec, depth + 1, prefix | 1 << depth, weight + 1, minus, rng, out);
    }
}

pub(crate) fn binomial(n: u64, p: f64, rng: &mut CubeRng) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
    }
}

/// Splits `m` across categories with probabilities `weights` (summing to 1).
pub(crate) fn split_multinomial(weights: &[f64], m: u64, rng: &mut CubeRng) -> Vec<u64> {
    let mut left = m;
    let mut mass_left = 1.0f64;
    let mut out = vec![0u64; weights.len()];
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == weights.len() || mass_left <= w {
            out[i] = left;
            break;
        }
        let c = binomial(left, (w / mass_left).clamp(0.0, 1.0), rng);
        out[i] = c;
        left -= c;
        mass_left -= w;
    }
    out
}

fn pick_index(weights: &[f64], rng: &mut CubeRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Uniform point of weight `k`: a partial Fisher–Yates shuffle picks the
/// `k` coordinates set to -1.
fn sample_layer(dim: usize, k: usize, rng: &mut CubeRng) -> Point {
    let mut idx: Vec<u8> = (0..dim as u8).collect();
    let mut bits = 0u64;
    for j in 0..k {
        let r = rng.random_range(j..dim);
        idx.swap(j, r);
        bits |= 1 << idx[j];
    }
    Point::from_raw(bits, dim)
}

/// `C(n, k)` as a float.
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Derives the seed of logical task `index` from a master seed, so that a
/// task's stream does not depend on which tasks ran before it.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> CubeRng {
    CubeRng::seed_from_u64(seed)
}

/// Every point of `{-1,+1}^dim`, ordered by bitmask. Only for small `dim`.
pub fn all_points(dim: usize) -> impl Iterator<Item = Point> {
    assert!(dim <= 30, "exhaustive enumeration is limited to dim <= 30");
    (0..1u64 << dim).map(move |b| Point::from_raw(b, dim))
}
