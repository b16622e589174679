//! Exhaustive small-cube checks of the structural facts the learners rely on.

use std::fmt::Write as _;

use rand::Rng;

use crate::coverage::{l1_distance_exact, random_coverage, CoverageFunction, FourierTable};
use crate::cube::{self, all_points, CubeFunction, DistributionSpec, IndexSet, Point};
use crate::privacy::{conjunction, counting_query, coverage_of_dataset, Dataset};
use crate::regression::{solve_l1, Constraint, L1Problem, SolveStatus};

const FIXTURES: u64 = 120;
const FIXTURE_MAX_DIM: usize = 9;
const DATASETS: u64 = 30;
const LP_PROBLEMS: u64 = 40;
const SELFTEST_SEED: u64 = 0x5e1f_7e57;
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// A check of one function against its exact spectrum.
pub type FunctionCheck = fn(&CoverageFunction, &FourierTable) -> Result<(), String>;

pub const FUNCTION_CHECKS: [(&str, FunctionCheck); 6] = [
    ("spectral-norm", spectral_norm),
    ("coefficient-order", coefficient_order),
    ("constant-coefficient", constant_coefficient),
    ("junta-approximation", junta_approximation),
    ("parseval", parseval),
    ("transform-agreement", transform_agreement),
];

/// `‖ĉ‖₁ ≤ 2`.
fn spectral_norm(_: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    let norm = table.l1_norm();
    if norm <= 2.0 + 1e-9 {
        Ok(())
    } else {
        Err(format!("spectral norm {norm}"))
    }
}

/// For `∅ ≠ T ⊆ V`: `ĉ(T) ≤ ĉ(V) ≤ 0` and `|ĉ(T)| ≤ 2^{−|T|}`. Checking
/// `V = T ∪ {i}` suffices by transitivity.
fn coefficient_order(_: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    let n = table.dim();
    for t in (1..1u64 << n).map(IndexSet::from_mask) {
        let ct = table.get(t);
        if ct > TOL {
            return Err(format!("coefficient {ct} at {t:?} is positive"));
        }
        if ct.abs() > (-(t.len() as f64)).exp2() + TOL {
            return Err(format!("|coefficient| {} at {t:?} exceeds 2^-{}", ct.abs(), t.len()));
        }
        for i in (1..=n).filter(|&i| !t.contains(i)) {
            let v = t.with(i);
            if table.get(v).abs() > ct.abs() + TOL {
                return Err(format!("|c({v:?})| = {} exceeds |c({t:?})| = {}", table.get(v).abs(), ct.abs()));
            }
        }
    }
    Ok(())
}

/// `ĉ(∅) = E[c] ≥ max c / 2`.
fn constant_coefficient(c: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    let max = all_points(c.dim()).map(|x| c.value(x)).fold(0.0, f64::max);
    let mean = table.get(IndexSet::EMPTY);
    if mean >= max / 2.0 - TOL {
        Ok(())
    } else {
        Err(format!("mean {mean} below half the maximum {max}"))
    }
}

/// With `I = {i : |ĉ({i})| ≥ ε²/2}`, `|I| ≤ 4/ε²` and `‖c − c_I‖₁ ≤ ε`.
fn junta_approximation(c: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    for eps in [0.5, 0.25] {
        let keep = (1..=c.dim())
            .filter(|&i| table.get(IndexSet::singleton(i)).abs() >= eps * eps / 2.0)
            .fold(IndexSet::EMPTY, IndexSet::with);
        if keep.len() as f64 > 4.0 / (eps * eps) {
            return Err(format!("junta of {} coordinates at eps {eps}", keep.len()));
        }
        let gap = l1_distance_exact(c, &c.average_project(keep), &DistributionSpec::Uniform).map_err(|e| e.to_string())?;
        if gap > eps + TOL {
            return Err(format!("junta error {gap} above {eps}"));
        }
    }
    Ok(())
}

/// `Σ ĉ(T)² = E[c²]`.
fn parseval(c: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    let n = c.dim();
    let energy = all_points(n).map(|x| c.value(x).powi(2)).sum::<f64>() / (n as f64).exp2();
    let squares = table.sum_of_squares();
    if (energy - squares).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(format!("sum of squares {squares} against E[c^2] = {energy}"))
    }
}

/// The closed-form spectrum agrees with the Walsh–Hadamard transform.
fn transform_agreement(c: &CoverageFunction, table: &FourierTable) -> Result<(), String> {
    let fwht = c.fourier_by_transform().map_err(|e| e.to_string())?;
    let gap = table.max_abs_difference(&fwht);
    if gap <= 1e-9 {
        Ok(())
    } else {
        Err(format!("largest difference {gap}"))
    }
}

/// Runs every function check over `fixtures`; each check reports its first
/// failure.
pub fn check_functions(fixtures: &[(CoverageFunction, FourierTable)]) -> Vec<Check> {
    FUNCTION_CHECKS
        .iter()
        .map(|&(name, check)| {
            let failure = fixtures.iter().enumerate().find_map(|(i, (c, t))| check(c, t).err().map(|e| format!("fixture {i}: {e}")));
            Check { name, passed: failure.is_none(), detail: failure.unwrap_or_else(|| format!("{} functions", fixtures.len())) }
        })
        .collect()
}

fn fixtures() -> Vec<(CoverageFunction, FourierTable)> {
    (0..FIXTURES)
        .map(|i| {
            let seed = cube::child_seed(SELFTEST_SEED, i);
            let dim = 1 + (i as usize % FIXTURE_MAX_DIM);
            let c = random_coverage(dim, 1 + (i as usize % 7), dim, seed).expect("fixture parameters are valid");
            let t = c.exact_fourier().expect("fixtures are small");
            (c, t)
        })
        .collect()
}

/// `c_D(x) = 1 − CQ_D(AND_{S_x})` on every point.
fn dataset_identity() -> Check {
    let mut rng = cube::rng_from_seed(cube::child_seed(SELFTEST_SEED, FIXTURES));
    let failure = (0..DATASETS).find_map(|i| {
        let dim = 1 + (i as usize % 8);
        let rows: Vec<Point> =
            (0..rng.random_range(1..40)).map(|_| DistributionSpec::Uniform.sample(dim, &mut rng)).collect();
        let d = Dataset::new(dim, &rows).expect("rows match the dimension");
        let c = coverage_of_dataset(&d).expect("datasets are non-empty");
        all_points(dim).find_map(|x| {
            let cq = counting_query(&d, conjunction(x.true_set())).expect("datasets are non-empty");
            ((c.value(x) + cq - 1.0).abs() > TOL).then(|| format!("dataset {i} at {}", x.to_line()))
        })
    });
    Check { name: "dataset-identity", passed: failure.is_none(), detail: failure.unwrap_or_else(|| format!("{DATASETS} datasets")) }
}

/// Optimal solutions come with a dual certificate closing the gap.
fn lp_duality() -> Check {
    let mut rng = cube::rng_from_seed(cube::child_seed(SELFTEST_SEED, FIXTURES + 1));
    let failure = (0..LP_PROBLEMS).find_map(|i| {
        let constraint = if i % 2 == 0 { Constraint::Unconstrained } else { Constraint::SimplexLike };
        let cols = rng.random_range(1..6);
        let mut p = L1Problem::new(cols, constraint).expect("column count is small");
        for _ in 0..rng.random_range(cols..cols + 25) {
            let row: Vec<f64> = (0..cols).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            p.push_row(&row, rng.random::<f64>(), f64::from(rng.random_range(1..4u8))).expect("rows are finite");
        }
        let s = match solve_l1(&p) {
            Ok(s) => s,
            Err(e) => return Some(format!("problem {i}: {e}")),
        };
        if s.status != SolveStatus::Optimal {
            return Some(format!("problem {i} hit the pivot limit"));
        }
        if s.duality_gap.abs() > 1e-7 || s.dual_infeasibility > 1e-9 {
            return Some(format!("problem {i}: gap {} dual infeasibility {}", s.duality_gap, s.dual_infeasibility));
        }
        (!p.is_feasible(&s.coefficients, 1e-9)).then(|| format!("problem {i}: infeasible solution"))
    });
    Check { name: "lp-duality", passed: failure.is_none(), detail: failure.unwrap_or_else(|| format!("{LP_PROBLEMS} problems")) }
}

pub fn run_selftest() -> Vec<Check> {
    let mut checks = check_functions(&fixtures());
    checks.push(dataset_identity());
    checks.push(lp_duality());
    checks
}

pub fn render(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        writeln!(out, "[{}] {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len()).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn fresh_run_passes_and_repeats() {
        let first = run_selftest();
        assert!(first.iter().all(|c| c.passed), "{}", render(&first));
        assert_eq!(render(&first), render(&run_selftest()));
    }

    #[test]
    fn flipped_sign_fails_the_order_check() {
        let c = CoverageFunction::new(3, 0.0, vec![(IndexSet::from_indices(&[1, 2]).unwrap(), 0.8)]).unwrap();
        let table = c.exact_fourier().unwrap();
        let t = IndexSet::from_indices(&[1]).unwrap();
        let corrupted: BTreeMap<IndexSet, f64> =
            table.iter().map(|(s, v)| (s, if s == t { -v } else { v })).collect();
        let checks = check_functions(&[(c, FourierTable::from_map(3, corrupted))]);
        let order = checks.iter().find(|c| c.name == "coefficient-order").unwrap();
        assert!(!order.passed);
        assert!(checks.iter().find(|c| c.name == "spectral-norm").unwrap().passed);
    }
}
