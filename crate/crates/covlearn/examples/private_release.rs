//! Releases all conjunction counting queries of a large sampled dataset,
//! once as a Fourier summary and once as a synthetic dataset.

use covlearn::cube::{DistributionSpec, IndexSet};
use covlearn::privacy::{average_error, counting_query, conjunction, Dataset, ReleaseBody, ReleaseParams, ReleaseVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 8;
    let distribution = DistributionSpec::Product { biases: vec![0.2, 0.7, 0.5, 0.1, 0.9, 0.4, 0.3, 0.6] };
    let params = ReleaseParams { alpha_bar: 0.25, epsilon: 1.0, delta: 0.1, seed: 5 };

    for variant in [ReleaseVariant::AllMarginals, ReleaseVariant::Synthetic] {
        let size = (2.0 * variant.required_size(n, &params)?).ceil() as u64;
        let data = Dataset::sample(n, &distribution, size, 1)?;
        let summary = variant.release(&data, &params)?;
        let m = &summary.metadata;
        println!("{variant:?}: |D| = {size}, {} of {} queries, noise scale {:.3e}", m.queries_used, m.queries_allowed, m.noise_scale);
        let s = IndexSet::from_indices(&[1, 4])?;
        println!("  CQ(x1 = x4 = -1): released {:.4}, true {:.4}", summary.answer(s), counting_query(&data, conjunction(s))?);
        let err = average_error(&summary, &data, &DistributionSpec::Uniform, 10_000, 3)?;
        println!("  average error {:.4} ± {:.4}", err.mean, err.half_width);
        if let ReleaseBody::SyntheticDataset { dataset, learned_terms, .. } = &summary.body {
            println!("  synthetic dataset of {} rows from {learned_terms} learned terms", dataset.len());
        }
    }
    Ok(())
}
