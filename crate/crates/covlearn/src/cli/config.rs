//! Experiment configs: one JSON document with a block per command.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::coverage::CoverageJson;
use crate::cube::DistributionSpec;
use crate::privacy::ReleaseVariant;

/// Default evaluation sizes for learned hypotheses and releases.
pub const LEARN_EVAL_SAMPLES: u64 = 100_000;
pub const RELEASE_EVAL_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Cube dimension.
    pub n: usize,
    #[serde(default = "one")]
    pub trials: usize,
    /// Distribution of training and evaluation points.
    #[serde(default = "uniform")]
    pub distribution: DistributionSpec,
    pub target: Option<TargetSpec>,
    pub dataset: Option<DatasetSpec>,
    pub learner: Option<LearnerSpec>,
    pub release: Option<ReleaseSpec>,
    /// Fresh points used to evaluate each trial.
    pub eval_samples: Option<u64>,
    /// Mean absolute value of the Laplace noise added to training labels,
    /// which are then clipped to `[0, 1]`.
    #[serde(default)]
    pub label_noise: f64,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

fn one() -> usize {
    1
}

fn uniform() -> DistributionSpec {
    DistributionSpec::Uniform
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// A coverage function written out in full.
    Inline { function: CoverageJson },
    /// A coverage-function JSON file.
    File { path: PathBuf },
    /// A fresh random coverage function per trial.
    Random { max_terms: usize, max_arity: usize },
    /// A fresh random disjoint DNF per trial, for the reduction learner.
    Dnf { max_terms: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// A dataset text file, one point per line.
    File { path: PathBuf },
    /// `size` rows from the config distribution.
    Sample { size: u64 },
    /// `multiple` times the release's minimum size, from the config
    /// distribution.
    GateMultiple { multiple: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerSpec {
    Pac { epsilon: f64 },
    Pmac { gamma: f64, delta: f64 },
    Proper { epsilon: f64, size_bound: Option<f64> },
    Agnostic { epsilon: f64 },
    ProperAgnostic { epsilon: f64, kappa: f64 },
    DnfReduction {
        epsilon: f64,
        #[serde(default = "three")]
        max_len: usize,
        /// Fit the full population instead of a sample.
        #[serde(default)]
        exact: bool,
    },
}

fn three() -> usize {
    3
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Pac { .. } => "pac",
            LearnerSpec::Pmac { .. } => "pmac",
            LearnerSpec::Proper { .. } => "proper",
            LearnerSpec::Agnostic { .. } => "agnostic",
            LearnerSpec::ProperAgnostic { .. } => "proper-agnostic",
            LearnerSpec::DnfReduction { .. } => "dnf-reduction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    AllMarginals,
    KWay,
    Synthetic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleaseSpec {
    pub variant: VariantName,
    /// Conjunction length, for `k-way` only.
    pub k: Option<usize>,
    pub alpha_bar: f64,
    /// Privacy parameter.
    pub epsilon: f64,
    pub delta: f64,
}

impl ReleaseSpec {
    pub fn variant(&self) -> Result<ReleaseVariant, CliError> {
        match (self.variant, self.k) {
            (VariantName::AllMarginals, None) => Ok(ReleaseVariant::AllMarginals),
            (VariantName::Synthetic, None) => Ok(ReleaseVariant::Synthetic),
            (VariantName::KWay, Some(k)) => Ok(ReleaseVariant::KWay { k }),
            (VariantName::KWay, None) => Err(CliError::Schema("release.k is required for the k-way variant".into())),
            (_, Some(_)) => Err(CliError::Schema("release.k only applies to the k-way variant".into())),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut config = ExperimentConfig::parse(&text)?;
        config.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Schema("trials must be at least 1".into()));
        }
        self.distribution.validate(self.n).map_err(|e| CliError::Schema(format!("distribution: {e}")))?;
        if let Some(l) = &self.learner {
            let unit: &[(&str, f64)] = match *l {
                LearnerSpec::Pac { epsilon } | LearnerSpec::Agnostic { epsilon } => &[("learner.epsilon", epsilon)],
                LearnerSpec::Proper { epsilon, .. } | LearnerSpec::DnfReduction { epsilon, .. } => {
                    &[("learner.epsilon", epsilon)]
                }
                LearnerSpec::Pmac { gamma, delta } => &[("learner.gamma", gamma), ("learner.delta", delta)],
                LearnerSpec::ProperAgnostic { epsilon, kappa } => &[("learner.epsilon", epsilon), ("learner.kappa", kappa)],
            };
            for &(name, v) in unit {
                probability(name, v)?;
            }
        }
        if !(self.label_noise >= 0.0 && self.label_noise.is_finite()) {
            return Err(CliError::Schema(format!("label_noise = {} must be a finite non-negative number", self.label_noise)));
        }
        if self.eval_samples == Some(0) {
            return Err(CliError::Schema("eval_samples must be at least 1".into()));
        }
        if let Some(r) = &self.release {
            r.variant()?;
            probability("release.alpha_bar", r.alpha_bar)?;
            probability("release.delta", r.delta)?;
            if !(r.epsilon > 0.0) {
                return Err(CliError::Schema(format!("release.epsilon = {} must be positive", r.epsilon)));
            }
        }
        Ok(())
    }
}

fn probability(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Schema(format!("{name} = {v} must lie in (0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_bias_names_the_field() {
        let err = ExperimentConfig::parse(r#"{"n": 2, "distribution": {"kind": "product", "biases": [0.5, 1.5]}}"#).unwrap_err();
        assert!(matches!(&err, CliError::Schema(m) if m.contains("bias")), "{err}");
    }

    #[test]
    fn unknown_learner_lists_the_valid_names() {
        let err = ExperimentConfig::parse(r#"{"n": 4, "learner": {"name": "boost", "epsilon": 0.1}}"#).unwrap_err();
        let msg = err.to_string();
        for name in ["pac", "pmac", "proper", "agnostic", "proper-agnostic", "dnf-reduction"] {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn release_block() {
        let c = ExperimentConfig::parse(
            r#"{"n": 6, "release": {"variant": "k-way", "k": 2, "alpha_bar": 0.2, "epsilon": 1, "delta": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(c.release.unwrap().variant().unwrap(), ReleaseVariant::KWay { k: 2 });
        assert!(ExperimentConfig::parse(r#"{"n": 6, "release": {"variant": "k-way", "alpha_bar": 0.2, "epsilon": 1, "delta": 0.1}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"n": 4, "trials": 0}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"n": 4, "learner": {"name": "pac", "epsilon": 1.2}}"#).is_err());
    }
}
