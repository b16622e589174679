//! Least-absolute-error linear regression as a linear program.
//!
//! The LP `min Σ wᵢ|yᵢ − φᵢᵀβ|` (optionally with `β ≥ 0`, `1ᵀβ ≤ 1`) is
//! solved by a dense simplex method on the split-residual formulation that
//! keeps only the `k` active constraints in the basis: a vertex is fixed by
//! `k` linearly independent equalities drawn from zero-residual rows,
//! `βⱼ = 0` and `1ᵀβ = 1`. Each pivot releases one of them and walks the
//! piecewise-linear objective along the resulting edge until the slope turns
//! non-negative or a bound blocks. The basis inverse is `k × k`, so the work
//! per pivot is linear in the row count.
//!
//! Duplicate rows are merged by summing weights before solving, which makes
//! samples with many repeated points cheap.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported number of columns.
pub const MAX_COLUMNS: usize = 20_000;

const SLOPE_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-9;
const RESID_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 100;
const PERTURBATION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Unconstrained,
    /// All coefficients ≥ 0 and their sum ≤ 1.
    SimplexLike,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("problem has no rows")]
    NoRows,
    #[error("problem has no columns")]
    NoColumns,
    #[error("{0} columns exceeds the supported maximum of {MAX_COLUMNS}")]
    TooManyColumns(usize),
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("row {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("row {row} has weight {weight}, weights must be positive and finite")]
    BadWeight { row: usize, weight: f64 },
    #[error("internal solver error: {0}")]
    Internal(&'static str),
}

/// A weighted least-absolute-error problem with a materialized design.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Problem {
    columns: usize,
    design: Vec<f64>,
    targets: Vec<f64>,
    weights: Vec<f64>,
    constraint: Constraint,
}

impl L1Problem {
    pub fn new(columns: usize, constraint: Constraint) -> Result<Self, RegressionError> {
        if columns == 0 {
            return Err(RegressionError::NoColumns);
        }
        if columns > MAX_COLUMNS {
            return Err(RegressionError::TooManyColumns(columns));
        }
        Ok(L1Problem { columns, design: Vec::new(), targets: Vec::new(), weights: Vec::new(), constraint })
    }

    /// One sample per row, each of weight one.
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64], constraint: Constraint) -> Result<Self, RegressionError> {
        let columns = rows.first().map_or(0, Vec::len);
        let mut p = L1Problem::new(columns, constraint)?;
        if rows.len() != targets.len() {
            return Err(RegressionError::RaggedRow { row: rows.len().min(targets.len()), expected: rows.len(), got: targets.len() });
        }
        for (r, &y) in rows.iter().zip(targets) {
            p.push_row(r, y, 1.0)?;
        }
        Ok(p)
    }

    /// Appends a row standing for `weight` identical samples.
    pub fn push_row(&mut self, features: &[f64], target: f64, weight: f64) -> Result<(), RegressionError> {
        let row = self.targets.len();
        if features.len() != self.columns {
            return Err(RegressionError::RaggedRow { row, expected: self.columns, got: features.len() });
        }
        if !target.is_finite() || features.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite(row));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(RegressionError::BadWeight { row, weight });
        }
        self.design.extend_from_slice(features);
        self.targets.push(target);
        self.weights.push(weight);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.columns..(i + 1) * self.columns]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Weighted mean absolute residual of `beta`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        (0..self.rows()).map(|i| self.weights[i] * (self.targets[i] - dot(self.row(i), beta)).abs()).sum::<f64>() / total
    }

    /// Whether `beta` satisfies the constraint up to `tol`.
    pub fn is_feasible(&self, beta: &[f64], tol: f64) -> bool {
        match self.constraint {
            Constraint::Unconstrained => true,
            Constraint::SimplexLike => beta.iter().all(|&b| b >= -tol) && beta.iter().sum::<f64>() <= 1.0 + tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// The pivot budget ran out; the incumbent vertex is returned.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub coefficients: Vec<f64>,
    /// Weighted mean absolute residual.
    pub objective: f64,
    /// `uᵀy − λ` for the dual certificate below.
    pub dual_objective: f64,
    pub duality_gap: f64,
    /// Largest violation of a dual constraint by the certificate.
    pub dual_infeasibility: f64,
    /// `uᵢ` per input row, with `|uᵢ| ≤ wᵢ/Σw` and `Φᵀu = λ1 − μ`, `μ ≥ 0`.
    pub row_duals: Vec<f64>,
    /// `λ`, the multiplier of `1ᵀβ ≤ 1` (zero when unconstrained).
    pub sum_dual: f64,
    pub status: SolveStatus,
    pub pivots: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distinct rows with normalized weights.
struct Merged {
    k: usize,
    phi: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    group_of: Vec<usize>,
    total_weight: f64,
}

impl Merged {
    fn new(p: &L1Problem) -> Self {
        let k = p.columns;
        let total_weight: f64 = p.weights.iter().sum();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let (mut phi, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        let mut group_of = Vec::with_capacity(p.rows());
        for i in 0..p.rows() {
            let key: Vec<u64> = p.row(i).iter().chain(std::iter::once(&p.targets[i])).map(|v| (v + 0.0).to_bits()).collect();
            let g = *index.entry(key).or_insert_with(|| {
                phi.extend_from_slice(p.row(i));
                y.push(p.targets[i]);
                w.push(0.0);
                y.len() - 1
            });
            w[g] += p.weights[i] / total_weight;
            group_of.push(g);
        }
        Merged { k, phi, y, w, group_of, total_weight }
    }

    fn rows(&self) -> usize {
        self.y.len()
    }

    fn row(&self, g: usize) -> &[f64] {
        &self.phi[g * self.k..(g + 1) * self.k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Row(usize),
    Coord(usize),
    Sum,
}

struct Candidate {
    t: f64,
    order: usize,
    entering: Slot,
    blocker: bool,
    gain: f64,
}

struct ActiveSet<'a> {
    p: &'a Merged,
    /// Targets in use: perturbed while solving, then the true ones.
    y: Vec<f64>,
    simplex: bool,
    slots: Vec<Slot>,
    /// Column-major inverse of the active constraint matrix.
    inv: Vec<f64>,
    row_active: Vec<bool>,
    coord_active: Vec<bool>,
    sum_active: bool,
    beta: Vec<f64>,
    resid: Vec<f64>,
    sign: Vec<f64>,
    pivots: usize,
    degenerate: usize,
    bland: bool,
}

impl<'a> ActiveSet<'a> {
    fn new(p: &'a Merged, constraint: Constraint) -> Self {
        let k = p.k;
        let mut inv = vec![0.0; k * k];
        (0..k).for_each(|j| inv[j * k + j] = 1.0);
        ActiveSet {
            p,
            y: perturbed(&p.y),
            simplex: constraint == Constraint::SimplexLike,
            slots: (0..k).map(Slot::Coord).collect(),
            inv,
            row_active: vec![false; p.rows()],
            coord_active: vec![true; k],
            sum_active: false,
            beta: vec![0.0; k],
            resid: perturbed(&p.y),
            sign: p.y.iter().map(|&y| if y < 0.0 { -1.0 } else { 1.0 }).collect(),
            pivots: 0,
            degenerate: 0,
            bland: false,
        }
    }

    fn col(&self, c: usize) -> &[f64] {
        let k = self.p.k;
        &self.inv[c * k..(c + 1) * k]
    }

    fn order(&self, s: Slot) -> usize {
        match s {
            Slot::Coord(j) => j,
            Slot::Sum => self.p.k,
            Slot::Row(i) => self.p.k + 1 + i,
        }
    }

    fn slot_vector(&self, s: Slot) -> Vec<f64> {
        let k = self.p.k;
        match s {
            Slot::Row(i) => self.p.row(i).to_vec(),
            Slot::Coord(j) => {
                let mut e = vec![0.0; k];
                e[j] = 1.0;
                e
            }
            Slot::Sum => vec![1.0; k],
        }
    }

    /// `v = A⁻ᵀ g` with `g = Σ wᵢsᵢφᵢ` over the rows off the active set.
    fn price(&self) -> Vec<f64> {
        let k = self.p.k;
        let mut g = vec![0.0; k];
        for i in (0..self.p.rows()).filter(|&i| !self.row_active[i]) {
            let ws = self.p.w[i] * self.sign[i];
            g.iter_mut().zip(self.p.row(i)).for_each(|(gj, &f)| *gj += ws * f);
        }
        (0..k).map(|c| dot(self.col(c), &g)).collect()
    }

    /// Best slope obtainable by releasing position `c`, with its direction.
    fn release_slope(&self, c: usize, v: f64) -> (f64, f64) {
        match self.slots[c] {
            Slot::Row(i) => (self.p.w[i] - v.abs(), if v >= 0.0 { 1.0 } else { -1.0 }),
            Slot::Coord(_) if self.simplex => (-v, 1.0),
            Slot::Coord(_) => (-v.abs(), if v >= 0.0 { 1.0 } else { -1.0 }),
            Slot::Sum => (v, -1.0),
        }
    }

    fn choose(&self, v: &[f64], excluded: &[usize]) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for c in (0..self.p.k).filter(|c| !excluded.contains(c)) {
            let (slope, sigma) = self.release_slope(c, v[c]);
            if slope >= -SLOPE_TOL {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _, _)) if self.bland => self.order(self.slots[c]) < self.order(self.slots[b]),
                Some((_, bs, _)) => slope < bs,
            };
            if better {
                best = Some((c, slope, sigma));
            }
        }
        best
    }

    /// Breakpoints along `d`, sorted by step length then index.
    fn breakpoints(&self, d: &[f64], along: &[f64]) -> Vec<Candidate> {
        let mut out = Vec::new();
        for i in (0..self.p.rows()).filter(|&i| !self.row_active[i]) {
            let a = along[i];
            if self.sign[i] * a > PIVOT_TOL {
                // Round-off residuals count as zero so ties break by index.
                let t = if self.resid[i].abs() <= RESID_TOL { 0.0 } else { (self.resid[i] / a).max(0.0) };
                out.push(Candidate { t, order: self.order(Slot::Row(i)), entering: Slot::Row(i), blocker: false, gain: 2.0 * self.p.w[i] * a.abs() });
            }
        }
        if self.simplex {
            for j in (0..self.p.k).filter(|&j| !self.coord_active[j]) {
                if d[j] < -PIVOT_TOL {
                    let t = (self.beta[j] / -d[j]).max(0.0);
                    out.push(Candidate { t, order: j, entering: Slot::Coord(j), blocker: true, gain: 0.0 });
                }
            }
            let rate: f64 = d.iter().sum();
            if !self.sum_active && rate > PIVOT_TOL {
                let t = ((1.0 - self.beta.iter().sum::<f64>()) / rate).max(0.0);
                out.push(Candidate { t, order: self.p.k, entering: Slot::Sum, blocker: true, gain: 0.0 });
            }
        }
        out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.order.cmp(&b.order)));
        out
    }

    /// One pivot. `Ok(false)` means the vertex is optimal.
    fn step(&mut self) -> Result<bool, RegressionError> {
        let v = self.price();
        let mut excluded = Vec::new();
        loop {
            let Some((c, slope, sigma)) = self.choose(&v, &excluded) else {
                return Ok(false);
            };
            let d: Vec<f64> = self.col(c).iter().map(|x| sigma * x).collect();
            let along: Vec<f64> = (0..self.p.rows())
                .map(|i| if self.row_active[i] { 0.0 } else { dot(self.p.row(i), &d) })
                .collect();
            let bps = self.breakpoints(&d, &along);
            let mut acc = slope;
            let mut stop = None;
            for (idx, bp) in bps.iter().enumerate() {
                // Under Bland's rule only the ratio-test step keeps its
                // termination guarantee, so the walk stops at the first breakpoint.
                if bp.blocker || self.bland {
                    stop = Some(idx);
                    break;
                }
                acc += bp.gain;
                if acc >= -SLOPE_TOL {
                    stop = Some(idx);
                    break;
                }
            }
            let Some(stop) = stop else {
                // Descent along a direction no row sees: only possible through
                // round-off in a rank-deficient design.
                excluded.push(c);
                continue;
            };
            self.apply(c, sigma, &d, &along, &bps[..stop], &bps[stop]);
            return Ok(true);
        }
    }

    fn apply(&mut self, c: usize, sigma: f64, d: &[f64], along: &[f64], passed: &[Candidate], enter: &Candidate) {
        let t = enter.t;
        let k = self.p.k;
        self.beta.iter_mut().zip(d).for_each(|(b, dj)| *b += t * dj);
        for i in (0..self.p.rows()).filter(|&i| !self.row_active[i]) {
            self.resid[i] -= t * along[i];
        }
        for bp in passed {
            if let Slot::Row(i) = bp.entering {
                self.sign[i] = -self.sign[i];
            }
        }

        // Replace row `c` of the active matrix by the entering constraint.
        let a_e = self.slot_vector(enter.entering);
        let z: Vec<f64> = (0..k).map(|l| dot(&a_e, self.col(l))).collect();
        let alpha = z[c];
        let pivot_col: Vec<f64> = self.col(c).to_vec();
        for l in 0..k {
            let factor = if l == c { (z[l] - 1.0) / alpha } else { z[l] / alpha };
            if factor != 0.0 {
                self.inv[l * k..(l + 1) * k].iter_mut().zip(&pivot_col).for_each(|(m, &p)| *m -= p * factor);
            }
        }

        match self.slots[c] {
            Slot::Row(i) => {
                self.row_active[i] = false;
                self.resid[i] = self.y[i] - dot(self.p.row(i), &self.beta);
                self.sign[i] = -sigma;
            }
            Slot::Coord(j) => self.coord_active[j] = false,
            Slot::Sum => self.sum_active = false,
        }
        match enter.entering {
            Slot::Row(i) => {
                self.row_active[i] = true;
                self.resid[i] = 0.0;
            }
            Slot::Coord(j) => {
                self.coord_active[j] = true;
                self.beta[j] = 0.0;
            }
            Slot::Sum => self.sum_active = true,
        }
        self.slots[c] = enter.entering;

        self.pivots += 1;
        if t <= 1e-14 {
            self.degenerate += 1;
        }
    }

    /// Rebuilds the inverse and the iterate from the active set.
    fn refactor(&mut self) -> Result<(), RegressionError> {
        let k = self.p.k;
        let mut a = vec![0.0; k * k];
        for (c, &s) in self.slots.iter().enumerate() {
            a[c * k..(c + 1) * k].copy_from_slice(&self.slot_vector(s));
        }
        let inv_rows = invert(&a, k).ok_or(RegressionError::Internal("singular active set"))?;
        // `invert` returns A⁻¹ row-major; the columns of A⁻¹ are its transpose's rows.
        for r in 0..k {
            for c in 0..k {
                self.inv[c * k + r] = inv_rows[r * k + c];
            }
        }
        let rhs: Vec<f64> = self
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Row(i) => self.y[i],
                Slot::Coord(_) => 0.0,
                Slot::Sum => 1.0,
            })
            .collect();
        self.beta = vec![0.0; k];
        for (c, &b) in rhs.iter().enumerate() {
            if b != 0.0 {
                let col: Vec<f64> = self.col(c).to_vec();
                self.beta.iter_mut().zip(col).for_each(|(x, m)| *x += b * m);
            }
        }
        for i in 0..self.p.rows() {
            let r = self.y[i] - dot(self.p.row(i), &self.beta);
            if self.row_active[i] {
                self.resid[i] = 0.0;
            } else {
                self.resid[i] = r;
                if r.abs() > 1e-11 {
                    self.sign[i] = r.signum();
                }
            }
        }
        Ok(())
    }
}

impl ActiveSet<'_> {
    /// Pivots until optimal, confirming optimality after a refactor.
    fn run(&mut self, limit: usize, bland_after: usize) -> Result<SolveStatus, RegressionError> {
        while self.pivots < limit {
            if !self.step()? {
                self.refactor()?;
                if !self.step()? {
                    return Ok(SolveStatus::Optimal);
                }
            }
            if self.degenerate > bland_after {
                self.bland = true;
            }
            if self.pivots.is_multiple_of(REFACTOR_EVERY) {
                self.refactor()?;
            }
        }
        self.refactor()?;
        Ok(SolveStatus::IterationLimit)
    }
}

/// Targets shifted by deterministic noise of relative size `PERTURBATION`,
/// so that no more than `k` rows fit exactly at a vertex. Without it, fits
/// with many exactly matched rows stall in degenerate pivots.
fn perturbed(y: &[f64]) -> Vec<f64> {
    let scale = PERTURBATION * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            // splitmix64 of the row index, mapped to [−1, 1).
            let mut z = (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            v + scale * ((z >> 11) as f64 / (1u64 << 52) as f64 - 1.0)
        })
        .collect()
}

/// Gauss–Jordan inverse of a row-major `k × k` matrix with partial pivoting.
fn invert(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; k * k];
    (0..k).for_each(|i| inv[i * k + i] = 1.0);
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| m[x * k + col].abs().total_cmp(&m[y * k + col].abs()))?;
        if m[piv * k + col].abs() < 1e-13 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                m.swap(piv * k + j, col * k + j);
                inv.swap(piv * k + j, col * k + j);
            }
        }
        let p = m[col * k + col];
        for j in 0..k {
            m[col * k + j] /= p;
            inv[col * k + j] /= p;
        }
        for r in (0..k).filter(|&r| r != col) {
            let f = m[r * k + col];
            if f != 0.0 {
                for j in 0..k {
                    m[r * k + j] -= f * m[col * k + j];
                    inv[r * k + j] -= f * inv[col * k + j];
                }
            }
        }
    }
    Some(inv)
}

/// Solves the problem to a vertex optimum and returns it with a dual
/// certificate.
pub fn solve_l1(problem: &L1Problem) -> Result<L1Solution, RegressionError> {
    if problem.rows() == 0 {
        return Err(RegressionError::NoRows);
    }
    let merged = Merged::new(problem);
    let k = merged.k;
    let mut s = ActiveSet::new(&merged, problem.constraint);
    let bland_after = 10 * (merged.rows() + k);
    let limit = 50 * (merged.rows() + k) + 1000;
    s.run(limit, bland_after)?;
    // The final signs certify dual feasibility whatever the targets, so the
    // perturbed optimum's active set is optimal for the true targets up to
    // the size of the perturbation; the clean pass below confirms it.
    s.y = merged.y.clone();
    s.refactor()?;
    let status = s.run(limit.max(s.pivots + limit / 10), bland_after)?;

    let v = s.price();
    let mut u: Vec<f64> = (0..merged.rows()).map(|i| if s.row_active[i] { 0.0 } else { merged.w[i] * s.sign[i] }).collect();
    let mut sum_dual = 0.0;
    for (c, &slot) in s.slots.iter().enumerate() {
        match slot {
            Slot::Row(i) => u[i] = -v[c],
            Slot::Sum => sum_dual = v[c],
            Slot::Coord(_) => {}
        }
    }
    let dual_objective = dot(&u, &merged.y) - sum_dual;

    // Dual feasibility, measured on the certificate itself.
    let mut h = vec![0.0; k];
    for (i, &ui) in u.iter().enumerate() {
        h.iter_mut().zip(merged.row(i)).for_each(|(hj, &f)| *hj += ui * f);
    }
    let box_violation = u.iter().zip(&merged.w).map(|(ui, wi)| (ui.abs() - wi).max(0.0)).fold(0.0, f64::max);
    let column_violation = match problem.constraint {
        Constraint::Unconstrained => h.iter().map(|x| x.abs()).fold(0.0, f64::max),
        Constraint::SimplexLike => h.iter().map(|x| (x - sum_dual).max(0.0)).fold((-sum_dual).max(0.0), f64::max),
    };

    let objective = problem.objective(&s.beta);
    let row_duals = merged
        .group_of
        .iter()
        .enumerate()
        .map(|(i, &g)| u[g] * (problem.weights[i] / merged.total_weight) / merged.w[g])
        .collect();
    Ok(L1Solution {
        coefficients: s.beta,
        objective,
        dual_objective,
        duality_gap: objective - dual_objective,
        dual_infeasibility: box_violation.max(column_violation),
        row_duals,
        sum_dual,
        status,
        pivots: s.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_feature_picks_the_median() {
        let rows = vec![vec![1.0]; 3];
        let p = L1Problem::from_rows(&rows, &[0.0, 1.0, 1.0], Constraint::Unconstrained).unwrap();
        let s = solve_l1(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_give_zero() {
        let rows = vec![vec![1.0, 0.5], vec![0.0, 1.0], vec![1.0, 1.0]];
        let p = L1Problem::from_rows(&rows, &[0.0; 3], Constraint::SimplexLike).unwrap();
        let s = solve_l1(&p).unwrap();
        assert_eq!(s.coefficients, vec![0.0, 0.0]);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn recovers_an_exact_coverage_fit() {
        // OR_{1}, OR_{2} over the four points of {−1,1}².
        let points = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)];
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|&(a, b)| vec![if a < 0.0 { 1.0 } else { 0.0 }, if b < 0.0 { 1.0 } else { 0.0 }])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| 0.3 * r[0] + 0.6 * r[1]).collect();
        let p = L1Problem::from_rows(&rows, &targets, Constraint::SimplexLike).unwrap();
        let s = solve_l1(&p).unwrap();
        assert!(s.objective < 1e-12);
        assert!((s.coefficients[0] - 0.3).abs() < 1e-9 && (s.coefficients[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn sum_constraint_binds() {
        // Unconstrained optimum is β = 2; the simplex caps it at 1.
        let rows = vec![vec![0.5]; 4];
        let p = L1Problem::from_rows(&rows, &[1.0; 4], Constraint::SimplexLike).unwrap();
        let s = solve_l1(&p).unwrap();
        assert!((s.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!(s.duality_gap.abs() < 1e-12 && s.dual_infeasibility < 1e-12);
        assert!(s.sum_dual > 0.0);
    }

    #[test]
    fn merged_weights_match_repeated_rows() {
        let mut a = L1Problem::new(2, Constraint::Unconstrained).unwrap();
        let mut b = L1Problem::new(2, Constraint::Unconstrained).unwrap();
        let data = [([1.0, -1.0], 0.2, 3.0), ([1.0, 1.0], 0.9, 1.0), ([1.0, -1.0], 0.7, 2.0)];
        for (x, y, w) in data {
            a.push_row(&x, y, w).unwrap();
            for _ in 0..w as usize {
                b.push_row(&x, y, 1.0).unwrap();
            }
        }
        let (sa, sb) = (solve_l1(&a).unwrap(), solve_l1(&b).unwrap());
        assert!((sa.objective - sb.objective).abs() < 1e-12);
        assert!((a.objective(&sa.coefficients) - sa.objective).abs() < 1e-15);
    }

    #[test]
    fn malformed_problems_are_rejected() {
        assert_eq!(L1Problem::new(0, Constraint::Unconstrained), Err(RegressionError::NoColumns));
        assert_eq!(L1Problem::new(MAX_COLUMNS + 1, Constraint::Unconstrained), Err(RegressionError::TooManyColumns(MAX_COLUMNS + 1)));
        let mut p = L1Problem::new(2, Constraint::Unconstrained).unwrap();
        assert!(matches!(p.push_row(&[1.0], 0.0, 1.0), Err(RegressionError::RaggedRow { .. })));
        assert_eq!(p.push_row(&[1.0, f64::NAN], 0.0, 1.0), Err(RegressionError::NonFinite(0)));
        assert!(matches!(p.push_row(&[1.0, 1.0], 0.0, 0.0), Err(RegressionError::BadWeight { .. })));
        assert_eq!(solve_l1(&p), Err(RegressionError::NoRows));
    }

    /// Recomputes the dual bound from the returned certificate alone.
    pub(crate) fn certified_lower_bound(p: &L1Problem, s: &L1Solution, tol: f64) -> f64 {
        let total: f64 = (0..p.rows()).map(|i| p.weight(i)).sum();
        let mut h = vec![0.0; p.columns()];
        for i in 0..p.rows() {
            assert!(s.row_duals[i].abs() <= p.weight(i) / total + tol);
            h.iter_mut().zip(p.row(i)).for_each(|(hj, f)| *hj += s.row_duals[i] * f);
        }
        match p.constraint() {
            Constraint::Unconstrained => assert!(h.iter().all(|x| x.abs() <= tol), "{h:?}"),
            Constraint::SimplexLike => {
                assert!(s.sum_dual >= -tol);
                assert!(h.iter().all(|x| *x <= s.sum_dual + tol));
            }
        }
        (0..p.rows()).map(|i| s.row_duals[i] * p.target(i)).sum::<f64>() - s.sum_dual
    }

    fn random_problem(rng: &mut ChaCha8Rng, rows: usize, cols: usize, constraint: Constraint, discrete: bool) -> L1Problem {
        let mut p = L1Problem::new(cols, constraint).unwrap();
        for _ in 0..rows {
            let x: Vec<f64> = (0..cols)
                .map(|_| if discrete { rng.random_range(0..2) as f64 } else { rng.random_range(-1.0..1.0) })
                .collect();
            let y = if discrete { rng.random_range(0..3) as f64 / 2.0 } else { rng.random::<f64>() };
            p.push_row(&x, y, 1.0).unwrap();
        }
        p
    }

    fn random_feasible(rng: &mut ChaCha8Rng, cols: usize, constraint: Constraint) -> Vec<f64> {
        match constraint {
            Constraint::Unconstrained => (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect(),
            Constraint::SimplexLike => {
                let raw: Vec<f64> = (0..cols).map(|_| -rng.random::<f64>().ln()).collect();
                let scale = rng.random::<f64>() / raw.iter().sum::<f64>();
                raw.into_iter().map(|r| r * scale).collect()
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_with_certificate(seed: u64, rows in 1usize..40, cols in 1usize..7, simplex: bool, discrete: bool) {
            let constraint = if simplex { Constraint::SimplexLike } else { Constraint::Unconstrained };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, rows, cols, constraint, discrete);
            let s = solve_l1(&p).unwrap();
            prop_assert_eq!(s.status, SolveStatus::Optimal);
            prop_assert!(p.is_feasible(&s.coefficients, 1e-9));
            let bound = certified_lower_bound(&p, &s, 1e-9);
            prop_assert!(s.objective - bound <= 1e-7, "gap {}", s.objective - bound);
            for _ in 0..1000 {
                let b = random_feasible(&mut rng, cols, constraint);
                prop_assert!(s.objective <= p.objective(&b) + 1e-12);
            }
        }

        #[test]
        fn exact_fits_are_found(seed: u64, rows in 1usize..40, cols in 1usize..7, simplex: bool) {
            let constraint = if simplex { Constraint::SimplexLike } else { Constraint::Unconstrained };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = random_feasible(&mut rng, cols, constraint);
            let mut p = L1Problem::new(cols, constraint).unwrap();
            for _ in 0..rows {
                let x: Vec<f64> = (0..cols).map(|_| rng.random_range(0..2) as f64).collect();
                p.push_row(&x, dot(&x, &truth), 1.0).unwrap();
            }
            let s = solve_l1(&p).unwrap();
            prop_assert!(s.objective <= 1e-7);
            prop_assert!(p.is_feasible(&s.coefficients, 1e-9));
        }
    }
}
