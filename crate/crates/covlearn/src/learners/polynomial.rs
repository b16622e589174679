//! Sparse polynomials in the parity basis, optionally split by layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::coverage::walsh_hadamard;
use crate::cube::{parity, CubeError, CubeFunction, IndexSet, Point};
use crate::estimation::compress;

/// Lookup tables are built when their total size stays under this.
const MAX_TABLE_ENTRIES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `Σ a_T χ_T(x)`.
    Parity,
    /// `Σ a_{k,T} [weight(x) = k] χ_T(x)`: one polynomial per layer.
    LayeredParity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub set: IndexSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    pub coefficient: f64,
}

/// A finite combination of (layer-gated) parities. With `clamp_unit` set,
/// values are clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePolynomial {
    dim: usize,
    basis: Basis,
    clamp_unit: bool,
    terms: Vec<PolyTerm>,
}

impl SparsePolynomial {
    pub fn parity(dim: usize, terms: impl IntoIterator<Item = (IndexSet, f64)>) -> Result<Self, LearnError> {
        let terms = terms.into_iter().map(|(set, coefficient)| PolyTerm { set, layer: None, coefficient }).collect();
        SparsePolynomial::from_terms(dim, Basis::Parity, terms)
    }

    pub fn layered(dim: usize, terms: impl IntoIterator<Item = (usize, IndexSet, f64)>) -> Result<Self, LearnError> {
        let terms = terms.into_iter().map(|(k, set, coefficient)| PolyTerm { set, layer: Some(k), coefficient }).collect();
        SparsePolynomial::from_terms(dim, Basis::LayeredParity, terms)
    }

    /// Validates, merges repeated keys and drops zero coefficients.
    pub fn from_terms(dim: usize, basis: Basis, terms: Vec<PolyTerm>) -> Result<Self, LearnError> {
        Point::all_plus(dim)?;
        let mut merged: BTreeMap<(Option<usize>, IndexSet), f64> = BTreeMap::new();
        for t in terms {
            if t.set.max_index() > dim {
                return Err(CubeError::IndexOutOfRange { index: t.set.max_index(), dim }.into());
            }
            match (basis, t.layer) {
                (Basis::Parity, None) => {}
                (Basis::LayeredParity, Some(k)) if k <= dim => {}
                (Basis::Parity, Some(_)) => return Err(LearnError::InvalidHypothesis("parity terms carry no layer".into())),
                (Basis::LayeredParity, k) => {
                    return Err(LearnError::InvalidHypothesis(format!("layer {k:?} is not in 0..={dim}")))
                }
            }
            if !t.coefficient.is_finite() {
                return Err(LearnError::InvalidHypothesis(format!("non-finite coefficient on {:?}", t.set)));
            }
            *merged.entry((t.layer, t.set)).or_insert(0.0) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((layer, set), coefficient)| PolyTerm { set, layer, coefficient })
            .collect();
        Ok(SparsePolynomial { dim, basis, clamp_unit: false, terms })
    }

    pub fn clamped(mut self, clamp_unit: bool) -> Self {
        self.clamp_unit = clamp_unit;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn is_clamped(&self) -> bool {
        self.clamp_unit
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `χ_T` (parity basis) or of `χ_T` on `layer`.
    pub fn coefficient(&self, set: IndexSet, layer: Option<usize>) -> f64 {
        self.terms.iter().find(|t| t.set == set && t.layer == layer).map_or(0.0, |t| t.coefficient)
    }

    /// Union of the sets carrying a term.
    pub fn support(&self) -> IndexSet {
        self.terms.iter().fold(IndexSet::EMPTY, |acc, t| acc.union(t.set))
    }

    /// Drops every parity touching `coords`: the average over uniformly
    /// random values of those coordinates. Only meaningful for the parity
    /// basis, since averaging changes the weight of `x`.
    pub fn average_out(&self, coords: IndexSet) -> Self {
        debug_assert_eq!(self.basis, Basis::Parity);
        let mut out = self.clone();
        out.terms.retain(|t| t.set.intersection(coords).is_empty());
        out
    }

    fn raw(&self, x: Point) -> f64 {
        let bits = x.bits();
        let w = x.weight();
        self.terms
            .iter()
            .filter(|t| t.layer.is_none_or(|k| k == w))
            .map(|t| t.coefficient * parity(t.set.mask(), bits) as f64)
            .sum()
    }

    fn finish(&self, v: f64) -> f64 {
        if self.clamp_unit {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    /// An evaluator that answers from a table when the support is small.
    pub fn compile(&self) -> CompiledPolynomial<'_> {
        let positions: Vec<u32> = self.support().iter().map(|i| (i - 1) as u32).collect();
        let layers: Vec<Option<usize>> = {
            let mut l: Vec<_> = self.terms.iter().map(|t| t.layer).collect();
            l.sort();
            l.dedup();
            l
        };
        let size = 1usize.checked_shl(positions.len() as u32).unwrap_or(usize::MAX);
        let mut tables = Vec::new();
        if positions.len() <= 24 && size.saturating_mul(layers.len().max(1)) <= MAX_TABLE_ENTRIES {
            for layer in layers {
                let mut table = vec![0.0; size];
                for t in self.terms.iter().filter(|t| t.layer == layer) {
                    table[compress(t.set.mask(), &positions)] += t.coefficient;
                }
                walsh_hadamard(&mut table);
                tables.push((layer, table));
            }
        }
        let tabulated = !tables.is_empty() || self.terms.is_empty();
        CompiledPolynomial { poly: self, positions, tables, tabulated }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("polynomials always serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self, LearnError> {
        let raw: SparsePolynomial = serde_json::from_str(text).map_err(|e| LearnError::InvalidHypothesis(e.to_string()))?;
        Ok(SparsePolynomial::from_terms(raw.dim, raw.basis, raw.terms)?.clamped(raw.clamp_unit))
    }
}

impl CubeFunction for SparsePolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: Point) -> f64 {
        self.finish(self.raw(x))
    }
}

/// Table-backed evaluation of a [`SparsePolynomial`].
#[derive(Debug, Clone)]
pub struct CompiledPolynomial<'a> {
    poly: &'a SparsePolynomial,
    positions: Vec<u32>,
    tables: Vec<(Option<usize>, Vec<f64>)>,
    tabulated: bool,
}

impl CubeFunction for CompiledPolynomial<'_> {
    fn dim(&self) -> usize {
        self.poly.dim
    }

    fn value(&self, x: Point) -> f64 {
        if !self.tabulated {
            return self.poly.value(x);
        }
        let idx = compress(x.bits(), &self.positions);
        let w = x.weight();
        let v = self.tables.iter().filter(|(l, _)| l.is_none_or(|k| k == w)).map(|(_, t)| t[idx]).sum();
        self.poly.finish(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::all_points;
    use proptest::prelude::*;

    fn set(ix: &[usize]) -> IndexSet {
        IndexSet::from_indices(ix).unwrap()
    }

    #[test]
    fn evaluates_parities() {
        let p = SparsePolynomial::parity(3, [(IndexSet::EMPTY, 0.5), (set(&[1, 2]), 0.25)]).unwrap();
        let x = Point::from_signs(&[-1, 1, 1]).unwrap();
        assert_eq!(p.value(x), 0.25);
        assert_eq!(p.compile().value(x), 0.25);
        let clamped = SparsePolynomial::parity(1, [(IndexSet::EMPTY, 1.5)]).unwrap().clamped(true);
        assert_eq!(clamped.value(Point::all_plus(1).unwrap()), 1.0);
    }

    #[test]
    fn layers_gate_terms() {
        let p = SparsePolynomial::layered(2, [(0, IndexSet::EMPTY, 0.1), (1, set(&[1]), 0.3)]).unwrap();
        assert_eq!(p.value(Point::all_plus(2).unwrap()), 0.1);
        assert_eq!(p.value(Point::from_signs(&[-1, 1]).unwrap()), -0.3);
        assert_eq!(p.value(Point::all_minus(2).unwrap()), 0.0);
        assert!(SparsePolynomial::layered(2, [(3, IndexSet::EMPTY, 1.0)]).is_err());
        assert!(SparsePolynomial::parity(2, [(set(&[3]), 1.0)]).is_err());
    }

    #[test]
    fn averaging_out_a_coordinate() {
        let p = SparsePolynomial::parity(3, [(IndexSet::EMPTY, 0.5), (set(&[1, 2]), 0.25), (set(&[3]), 0.1)]).unwrap();
        let q = p.average_out(set(&[2]));
        for x in all_points(3) {
            let flipped = Point::new(x.bits() ^ 0b010, 3).unwrap();
            assert!((q.value(x) - 0.5 * (p.value(x) + p.value(flipped))).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip_keeps_layers() {
        let p = SparsePolynomial::layered(4, [(2, set(&[1, 4]), -0.5), (0, IndexSet::EMPTY, 1.0)]).unwrap().clamped(true);
        let text = p.to_json_string();
        assert!(text.contains("layered_parity"));
        assert_eq!(SparsePolynomial::from_json_str(&text).unwrap(), p);
    }

    proptest! {
        #[test]
        fn compiled_matches_direct(dim in 1usize..10, raw in prop::collection::vec((0u64..1024, -1.0f64..1.0, 0usize..11), 0..12), layered: bool) {
            let mask = (1u64 << dim) - 1;
            let p = if layered {
                SparsePolynomial::layered(dim, raw.iter().map(|&(m, c, k)| (k % (dim + 1), IndexSet::from_mask(m & mask), c))).unwrap()
            } else {
                SparsePolynomial::parity(dim, raw.iter().map(|&(m, c, _)| (IndexSet::from_mask(m & mask), c))).unwrap()
            };
            let compiled = p.compile();
            for x in all_points(dim) {
                prop_assert!((compiled.value(x) - p.value(x)).abs() < 1e-12);
            }
        }
    }
}
