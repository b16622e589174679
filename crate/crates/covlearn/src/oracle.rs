//! Example oracles: sources of labeled points `(x, y)`.

use thiserror::Error;

use crate::cube::{self, CubeError, CubeFunction, CubeRng, DistributionSpec, Point};

/// A distinct point with a label, repeated `count` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example {
    pub point: Point,
    pub label: f64,
    pub count: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("oracle exhausted: wanted {wanted} examples, accepted {accepted} of {drawn} draws")]
    Exhausted { wanted: u64, accepted: u64, drawn: u64 },
}

/// Anything that hands out labeled examples.
pub trait ExampleOracle {
    fn dim(&self) -> usize;

    /// `m` fresh examples. Rows with equal point and label may be merged, so
    /// the counts, not the row count, add up to `m`.
    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError>;

    /// Total examples handed out so far.
    fn examples_drawn(&self) -> u128;
}

impl<O: ExampleOracle + ?Sized> ExampleOracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        (**self).draw(m)
    }
    fn examples_drawn(&self) -> u128 {
        (**self).examples_drawn()
    }
}

/// Noise-free examples of `target` with points drawn from `distribution`.
pub struct TargetOracle<F> {
    target: F,
    distribution: DistributionSpec,
    rng: CubeRng,
    drawn: u128,
}

impl<F: CubeFunction> TargetOracle<F> {
    pub fn new(target: F, distribution: DistributionSpec, seed: u64) -> Result<Self, CubeError> {
        distribution.validate(target.dim())?;
        Ok(TargetOracle { target, distribution, rng: cube::rng_from_seed(seed), drawn: 0 })
    }

    pub fn uniform(target: F, seed: u64) -> Result<Self, CubeError> {
        Self::new(target, DistributionSpec::Uniform, seed)
    }

    pub fn target(&self) -> &F {
        &self.target
    }
}

impl<F: CubeFunction> ExampleOracle for TargetOracle<F> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        let counts = self.distribution.sample_counts(self.target.dim(), m, &mut self.rng)?;
        self.drawn += m as u128;
        Ok(counts
            .into_iter()
            .map(|(point, count)| Example { point, label: self.target.value(point), count })
            .collect())
    }

    fn examples_drawn(&self) -> u128 {
        self.drawn
    }
}

/// Examples whose labels are `noise(target(x), rng)`, drawn independently
/// for every copy of a point.
pub struct NoisyOracle<F, N> {
    inner: TargetOracle<F>,
    noise: N,
    noise_rng: CubeRng,
}

impl<F: CubeFunction, N: FnMut(f64, &mut CubeRng) -> f64> NoisyOracle<F, N> {
    pub fn new(target: F, distribution: DistributionSpec, seed: u64, noise: N) -> Result<Self, CubeError> {
        Ok(NoisyOracle {
            inner: TargetOracle::new(target, distribution, cube::child_seed(seed, 0))?,
            noise,
            noise_rng: cube::rng_from_seed(cube::child_seed(seed, 1)),
        })
    }
}

impl<F: CubeFunction, N: FnMut(f64, &mut CubeRng) -> f64> ExampleOracle for NoisyOracle<F, N> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn draw(&mut self, m: u64) -> Result<Vec<Example>, OracleError> {
        if m > cube::DIRECT_SAMPLE_CAP {
            return Err(CubeError::SampleTooLarge(m).into());
        }
        let clean = self.inner.draw(m)?;
        let mut out = Vec::with_capacity(m as usize);
        for ex in clean {
            for _ in 0..ex.count {
                let label = (self.noise)(ex.label, &mut self.noise_rng);
                out.push(Example { point: ex.point, label, count: 1 });
            }
        }
        Ok(out)
    }

    fn examples_drawn(&self) -> u128 {
        self.inner.examples_drawn()
    }
}

/// The whole uniform population: every point of the cube exactly once,
/// whatever `m` is. Learners fed by it see the exact distribution.
pub struct PopulationOracle<F> {
    target: F,
    drawn: u128,
}

impl<F: CubeFunction> PopulationOracle<F> {
    pub fn new(target: F) -> Result<Self, CubeError> {
        if target.dim() > 24 {
            return Err(CubeError::BadDimension(target.dim()));
        }
        Ok(PopulationOracle { target, drawn: 0 })
    }
}

impl<F: CubeFunction> ExampleOracle for PopulationOracle<F> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn draw(&mut self, _m: u64) -> Result<Vec<Example>, OracleError> {
        let dim = self.target.dim();
        self.drawn += 1 << dim;
        Ok(cube::all_points(dim).map(|point| Example { point, label: self.target.value(point), count: 1 }).collect())
    }

    fn examples_drawn(&self) -> u128 {
        self.drawn
    }
}

/// Laplace noise of scale `b` by inversion.
pub fn laplace(b: f64, rng: &mut CubeRng) -> f64 {
    use rand::Rng;
    if b == 0.0 {
        return 0.0;
    }
    // u uniform on (-1/2, 1/2); 1 - 2|u| stays in (0, 1].
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CoverageFunction;
    use crate::cube::IndexSet;

    #[test]
    fn target_oracle_counts_add_up() {
        let c = CoverageFunction::new(5, 0.0, vec![(IndexSet::singleton(2), 1.0)]).unwrap();
        let mut o = TargetOracle::uniform(c.clone(), 4).unwrap();
        let ex = o.draw(12_345).unwrap();
        assert_eq!(ex.iter().map(|e| e.count).sum::<u64>(), 12_345);
        assert!(ex.iter().all(|e| e.label == c.value(e.point)));
        assert_eq!(o.examples_drawn(), 12_345);
    }

    #[test]
    fn noisy_oracle_emits_one_row_per_example() {
        let c = CoverageFunction::new(3, 0.5, vec![]).unwrap();
        let mut o = NoisyOracle::new(c, DistributionSpec::Uniform, 1, |y, r: &mut CubeRng| y + laplace(0.1, r)).unwrap();
        let ex = o.draw(500).unwrap();
        assert_eq!(ex.len(), 500);
        assert!(ex.iter().any(|e| e.label != 0.5));
    }

    #[test]
    fn laplace_has_expected_absolute_mean() {
        let mut rng = cube::rng_from_seed(8);
        let m = 200_000;
        let mean_abs: f64 = (0..m).map(|_| laplace(0.05, &mut rng).abs()).sum::<f64>() / m as f64;
        assert!((mean_abs - 0.05).abs() < 0.001);
        assert_eq!(laplace(0.0, &mut rng), 0.0);
    }
}
