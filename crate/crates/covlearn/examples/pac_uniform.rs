//! Learns a random coverage function on 16 coordinates from uniform
//! examples and prints the learned spectrum next to the true one.

use covlearn::coverage::{l1_distance_mc, random_coverage};
use covlearn::cube::DistributionSpec;
use covlearn::learners::pac_learn_uniform;
use covlearn::oracle::TargetOracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, accuracy) = (16, 0.2);
    let target = random_coverage(n, 20, 5, 42)?;
    let mut oracle = TargetOracle::uniform(target.clone(), 7)?;
    let outcome = pac_learn_uniform(&mut oracle, accuracy)?;
    let h = outcome.hypothesis.clamped(true);

    println!("target: {} terms, support {:?}", target.size(), target.support());
    println!("drew {} examples, kept {} coefficients out of {} estimates", outcome.examples, h.len(), outcome.estimates);
    let exact = target.exact_fourier()?;
    let mut kept: Vec<_> = h.terms().iter().collect();
    kept.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()));
    for term in kept.iter().take(8) {
        println!("  {:?}: learned {:+.4}  true {:+.4}", term.set, term.coefficient, exact.get(term.set));
    }
    let err = l1_distance_mc(&h, &target, &DistributionSpec::Uniform, 100_000, 9)?;
    println!("l1 error {:.4} ± {:.4} (target accuracy {accuracy})", err.mean, err.half_width);
    Ok(())
}
