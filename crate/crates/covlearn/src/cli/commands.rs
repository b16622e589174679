//! The `generate`, `learn` and `release` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DatasetSpec, ExperimentConfig, LearnerSpec, TargetSpec, LEARN_EVAL_SAMPLES, RELEASE_EVAL_SAMPLES};
use super::report::{write_file, Comparison, Criterion, Report, TrialRow};
use super::CliError;
use crate::coverage::{hoeffding_half_width, l1_distance_mc, random_coverage, CoverageFunction, MonteCarloEstimate};
use crate::cube::{self, CubeFunction, CubeRng, DistributionSpec};
use crate::learners::pmac::multiplicative_coverage;
use crate::learners::{
    agnostic_learn, dnf_reduction_learn, pac_learn, pmac_learn, proper_agnostic_learn, proper_learn, AgnosticParams,
    DisjointDnf, DisjunctionRegression, LearnError, PacParams, PmacParams, ProperAgnosticParams, ProperParams,
    SampledAccess,
};
use crate::oracle::{laplace, ExampleOracle, NoisyOracle, PopulationOracle, TargetOracle};
use crate::privacy::{average_error, Dataset, PrivacyError, ReleaseBody, ReleaseParams, ReleaseVariant};

/// Child-seed slots inside one trial.
const TARGET_STREAM: u64 = 0;
const DATA_STREAM: u64 = 1;
const ALGORITHM_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

enum Target {
    Coverage(CoverageFunction),
    Dnf(DisjointDnf),
}

fn schema(e: impl std::fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

fn read(config: &ExperimentConfig, path: &Path) -> Result<String, CliError> {
    let full = config.resolve(path);
    std::fs::read_to_string(&full).map_err(|e| CliError::Io(format!("{}: {e}", full.display())))
}

fn make_target(config: &ExperimentConfig, spec: &TargetSpec, seed: u64) -> Result<Target, CliError> {
    let target = match spec {
        TargetSpec::Inline { function } => Target::Coverage(CoverageFunction::from_json(function).map_err(schema)?),
        TargetSpec::File { path } => Target::Coverage(CoverageFunction::from_json_str(&read(config, path)?).map_err(schema)?),
        TargetSpec::Random { max_terms, max_arity } => {
            Target::Coverage(random_coverage(config.n, *max_terms, *max_arity, seed).map_err(schema)?)
        }
        TargetSpec::Dnf { max_terms } => Target::Dnf(DisjointDnf::random(config.n, *max_terms, seed).map_err(schema)?),
    };
    let dim = match &target {
        Target::Coverage(c) => c.dim(),
        Target::Dnf(d) => d.dim(),
    };
    if dim != config.n {
        return Err(CliError::Schema(format!("target has dimension {dim} but n = {}", config.n)));
    }
    Ok(target)
}

fn dataset_size(config: &ExperimentConfig, multiple: f64) -> Result<u64, CliError> {
    let spec = config.release.as_ref().ok_or_else(|| schema("a gate_multiple dataset needs a release block"))?;
    let required = spec.variant()?.required_size(config.n, &release_params(config, 0)?).map_err(schema)?;
    Ok((multiple * required).ceil().max(1.0) as u64)
}

fn release_params(config: &ExperimentConfig, seed: u64) -> Result<ReleaseParams, CliError> {
    let r = config.release.as_ref().ok_or_else(|| schema("missing release block"))?;
    Ok(ReleaseParams { alpha_bar: r.alpha_bar, epsilon: r.epsilon, delta: r.delta, seed })
}

/// Writes `target.json` (plus `target_dnf.json` for DNF targets) and
/// `dataset.txt`, as the config asks.
pub fn generate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    if config.target.is_none() && config.dataset.is_none() {
        return Err(schema("nothing to generate: give a target or a dataset block"));
    }
    if let Some(spec) = &config.target {
        let coverage = match make_target(config, spec, cube::child_seed(config.seed, TARGET_STREAM))? {
            Target::Coverage(c) => c,
            Target::Dnf(d) => {
                let path = out.join("target_dnf.json");
                write_file(&path, &(serde_json::to_string_pretty(&d).expect("formulas serialize") + "\n"))?;
                written.push(path);
                d.as_coverage().map_err(schema)?
            }
        };
        let path = out.join("target.json");
        write_file(&path, &(coverage.to_json_string() + "\n"))?;
        written.push(path);
    }
    if let Some(spec) = &config.dataset {
        let size = match spec {
            DatasetSpec::Sample { size } => *size,
            DatasetSpec::GateMultiple { multiple } => dataset_size(config, *multiple)?,
            DatasetSpec::File { .. } => return Err(schema("dataset: a file dataset cannot be generated")),
        };
        let data = Dataset::sample(config.n, &config.distribution, size, cube::child_seed(config.seed, DATA_STREAM))
            .map_err(schema)?;
        let path = out.join("dataset.txt");
        write_file(&path, &data.to_text())?;
        written.push(path);
    }
    Ok(written)
}

struct TrialOutput {
    row: TrialRow,
    files: Vec<(String, String)>,
    millis: u128,
}

fn write_trials(out: &Path, outputs: &[TrialOutput]) -> Result<(), CliError> {
    let mut timings = String::from("trial,runtime_ms\n");
    for o in outputs {
        for (name, text) in &o.files {
            write_file(&out.join(name), text)?;
        }
        timings.push_str(&format!("{},{}\n", o.row.trial, o.millis));
    }
    write_file(&out.join("timings.csv"), &timings)
}

fn criterion(learner: &LearnerSpec, label_noise: f64) -> Criterion {
    let at_most = |metric, threshold| Criterion { metric, comparison: Comparison::AtMost, threshold };
    match *learner {
        LearnerSpec::Pac { epsilon } | LearnerSpec::Proper { epsilon, .. } => at_most("l1_error", epsilon),
        // The target is in the class, so the best achievable error is at most the noise level.
        LearnerSpec::Agnostic { epsilon } | LearnerSpec::ProperAgnostic { epsilon, .. } => {
            at_most("l1_error", epsilon + label_noise)
        }
        LearnerSpec::Pmac { delta, .. } => Criterion { metric: "coverage_fraction", comparison: Comparison::AtLeast, threshold: 1.0 - delta },
        LearnerSpec::DnfReduction { epsilon, .. } => at_most("classification_error", epsilon),
    }
}

fn check_learn_config(config: &ExperimentConfig, learner: &LearnerSpec) -> Result<(), CliError> {
    let target = config.target.as_ref().ok_or_else(|| schema("learn needs a target block"))?;
    let dnf_target = matches!(target, TargetSpec::Dnf { .. });
    let dnf_learner = matches!(learner, LearnerSpec::DnfReduction { .. });
    if dnf_target != dnf_learner {
        return Err(schema("dnf targets go with the dnf-reduction learner and only with it"));
    }
    let uniform_only = matches!(
        learner,
        LearnerSpec::Pac { .. } | LearnerSpec::Pmac { .. } | LearnerSpec::Proper { .. } | LearnerSpec::DnfReduction { exact: true, .. }
    );
    if uniform_only && config.distribution != DistributionSpec::Uniform {
        return Err(schema(format!("the {} learner needs the uniform distribution", learner.name())));
    }
    Ok(())
}

fn example_oracle<'t, F: CubeFunction + 't>(
    target: F,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Box<dyn ExampleOracle + 't>, CliError> {
    let b = config.label_noise;
    Ok(if b > 0.0 {
        let noise = move |y: f64, rng: &mut CubeRng| (y + laplace(b, rng)).clamp(0.0, 1.0);
        Box::new(NoisyOracle::new(target, config.distribution.clone(), seed, noise).map_err(schema)?)
    } else {
        Box::new(TargetOracle::new(target, config.distribution.clone(), seed).map_err(schema)?)
    })
}

/// `E|h(x) − y|` over fresh examples drawn the way the training ones were.
fn label_error(h: &dyn CubeFunction, target: &CoverageFunction, config: &ExperimentConfig, samples: u64, seed: u64) -> Result<MonteCarloEstimate, CliError> {
    if config.label_noise == 0.0 {
        return l1_distance_mc(h, target, &config.distribution, samples, seed).map_err(schema);
    }
    let rows = example_oracle(target, config, seed)?.draw(samples).map_err(schema)?;
    let total: f64 = rows.iter().map(|r| r.count as f64 * (h.value(r.point) - r.label).abs()).sum();
    Ok(MonteCarloEstimate { mean: total / samples as f64, half_width: hoeffding_half_width(samples), samples })
}

struct Learned {
    metric: MonteCarloEstimate,
    hypothesis: String,
    samples: u128,
}

fn learn_once(config: &ExperimentConfig, learner: &LearnerSpec, trial_seed: u64) -> Result<Learned, CliError> {
    let spec = config.target.as_ref().expect("checked before the trials");
    let target = make_target(config, spec, cube::child_seed(trial_seed, TARGET_STREAM))?;
    let data_seed = cube::child_seed(trial_seed, DATA_STREAM);
    let eval_seed = cube::child_seed(trial_seed, EVAL_STREAM);
    let eval = config.eval_samples.unwrap_or(LEARN_EVAL_SAMPLES);
    let failed = |e: LearnError| CliError::Contract(e.to_string());

    let dnf = match target {
        Target::Dnf(d) => d,
        Target::Coverage(c) => {
            let mut oracle = example_oracle(&c, config, data_seed)?;
            let (h, hypothesis): (Box<dyn CubeFunction>, String) = match *learner {
                LearnerSpec::Pac { epsilon } => {
                    let params = PacParams::new(epsilon).map_err(schema)?;
                    let out = pac_learn(&mut SampledAccess::new(&mut *oracle), &params).map_err(failed)?;
                    let h = out.hypothesis.clamped(true);
                    let text = pretty(&h);
                    (Box::new(h), text)
                }
                LearnerSpec::Proper { epsilon, size_bound } => {
                    let params = ProperParams::new(epsilon, size_bound).map_err(schema)?;
                    let out = proper_learn(&mut SampledAccess::new(&mut *oracle), &params).map_err(failed)?;
                    let text = out.hypothesis.to_json_string();
                    (Box::new(out.hypothesis), text)
                }
                LearnerSpec::Agnostic { epsilon } => {
                    let params = AgnosticParams::new(epsilon).map_err(schema)?;
                    let out = agnostic_learn(&mut SampledAccess::new(&mut *oracle), &config.distribution, &params).map_err(failed)?;
                    let text = pretty(&out.hypothesis);
                    (Box::new(out.hypothesis), text)
                }
                LearnerSpec::ProperAgnostic { epsilon, kappa } => {
                    let params = ProperAgnosticParams::new(epsilon, kappa).map_err(schema)?;
                    let out = proper_agnostic_learn(&mut SampledAccess::new(&mut *oracle), &config.distribution, &params)
                        .map_err(failed)?;
                    let text = out.hypothesis.to_json_string();
                    (Box::new(out.hypothesis), text)
                }
                LearnerSpec::Pmac { gamma, delta } => {
                    let params = PmacParams::new(gamma, delta).map_err(schema)?;
                    let h = pmac_learn(&mut *oracle, &params, cube::child_seed(trial_seed, ALGORITHM_STREAM)).map_err(failed)?;
                    let samples = oracle.examples_drawn();
                    let mut rng = cube::rng_from_seed(eval_seed);
                    let points = DistributionSpec::Uniform.sample_counts(config.n, eval, &mut rng).map_err(schema)?;
                    let fraction = multiplicative_coverage(&h.compile(), &c, gamma, &points);
                    let metric = MonteCarloEstimate { mean: fraction, half_width: hoeffding_half_width(eval), samples: eval };
                    return Ok(Learned { metric, hypothesis: h.to_json_string(), samples });
                }
                LearnerSpec::DnfReduction { .. } => unreachable!("checked before the trials"),
            };
            let samples = oracle.examples_drawn();
            drop(oracle);
            let metric = label_error(&*h, &c, config, eval, eval_seed)?;
            return Ok(Learned { metric, hypothesis, samples });
        }
    };

    let LearnerSpec::DnfReduction { epsilon, max_len, exact } = *learner else {
        unreachable!("checked before the trials")
    };
    let terms = dnf.terms().len().max(1);
    let inner = DisjunctionRegression { max_len };
    let (classifier, samples) = if exact {
        let mut oracle = PopulationOracle::new(&dnf).map_err(schema)?;
        (dnf_reduction_learn(&mut oracle, terms, epsilon, &inner).map_err(failed)?, oracle.examples_drawn())
    } else {
        let mut oracle = TargetOracle::new(&dnf, config.distribution.clone(), data_seed).map_err(schema)?;
        (dnf_reduction_learn(&mut oracle, terms, epsilon, &inner).map_err(failed)?, oracle.examples_drawn())
    };
    let mut rng = cube::rng_from_seed(eval_seed);
    let points = config.distribution.sample_counts(config.n, eval, &mut rng).map_err(schema)?;
    let wrong: u64 = points.iter().filter(|(x, _)| classifier.classify(*x) != dnf.eval(*x)).map(|p| p.1).sum();
    let metric = MonteCarloEstimate { mean: wrong as f64 / eval as f64, half_width: hoeffding_half_width(eval), samples: eval };
    let hypothesis = serde_json::json!({
        "terms": terms,
        "target": dnf,
        "doubled_hypothesis": classifier.inner().as_coverage().map(CoverageFunction::to_json),
    });
    Ok(Learned { metric, hypothesis: pretty(&hypothesis), samples })
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("hypotheses serialize")
}

/// Runs the configured learner once per trial and writes `report.*`,
/// `hypothesis_<trial>.json` and `timings.csv`.
pub fn learn(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let learner = config.learner.as_ref().ok_or_else(|| schema("learn needs a learner block"))?;
    check_learn_config(config, learner)?;
    let crit = criterion(learner, config.label_noise);
    let eval = config.eval_samples.unwrap_or(LEARN_EVAL_SAMPLES);
    let outputs: Vec<TrialOutput> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialOutput, CliError> {
            let seed = cube::child_seed(config.seed, trial as u64);
            let start = Instant::now();
            let mut row = TrialRow { trial, seed, eval_samples: eval, ..Default::default() };
            let mut files = Vec::new();
            match learn_once(config, learner, seed) {
                Ok(l) => {
                    let value = Some(l.metric.mean);
                    match crit.metric {
                        "coverage_fraction" => row.coverage_fraction = value,
                        "classification_error" => row.classification_error = value,
                        _ => row.l1_error = value,
                    }
                    row.half_width = Some(l.metric.half_width);
                    row.samples_consumed = Some(l.samples);
                    row.passed = crit.accepts(l.metric.mean);
                    files.push((format!("hypothesis_{trial}.json"), l.hypothesis + "\n"));
                }
                Err(CliError::Contract(e)) => row.error = Some(e),
                Err(e) => return Err(e),
            }
            Ok(TrialOutput { row, files, millis: start.elapsed().as_millis() })
        })
        .collect::<Result<_, _>>()?;
    write_trials(out, &outputs)?;
    let report = Report::new("learn", learner.name().into(), config.n, config.seed, crit, outputs.into_iter().map(|o| o.row).collect());
    report.write(out)?;
    Ok(report)
}

fn variant_name(v: &ReleaseVariant) -> String {
    match v {
        ReleaseVariant::AllMarginals => "all-marginals".into(),
        ReleaseVariant::KWay { k } => format!("k-way(k={k})"),
        ReleaseVariant::Synthetic => "synthetic".into(),
    }
}

/// Runs the configured release once per trial and writes `report.*`,
/// `summary_<trial>.json`, `synthetic_<trial>.txt` for synthetic releases
/// and `timings.csv`. Datasets below the privacy gate are refused before any
/// trial runs.
pub fn release(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let spec = config.release.as_ref().ok_or_else(|| schema("release needs a release block"))?;
    let variant = spec.variant()?;
    let data_spec = config.dataset.as_ref().ok_or_else(|| schema("release needs a dataset block"))?;
    let base = release_params(config, 0)?;
    let required = variant.required_size(config.n, &base).map_err(schema)?;
    let (queries, _) = variant.budget(config.n, spec.alpha_bar).map_err(schema)?;
    let shared = match data_spec {
        DatasetSpec::File { path } => {
            let data = Dataset::parse(&read(config, path)?).map_err(schema)?;
            if data.dim() != config.n {
                return Err(CliError::Schema(format!("dataset has dimension {} but n = {}", data.dim(), config.n)));
            }
            Some(data)
        }
        _ => None,
    };
    let size = match data_spec {
        DatasetSpec::File { .. } => shared.as_ref().map_or(0, Dataset::len),
        DatasetSpec::Sample { size } => *size,
        DatasetSpec::GateMultiple { multiple } => dataset_size(config, *multiple)?,
    };
    if (size as f64) < required {
        return Err(CliError::Gate { required: required.ceil(), actual: size, queries });
    }
    let eval = config.eval_samples.unwrap_or(RELEASE_EVAL_SAMPLES);
    let crit = Criterion { metric: "average_error", comparison: Comparison::AtMost, threshold: spec.alpha_bar };
    let queries_dist = variant.query_distribution();

    let outputs: Vec<TrialOutput> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialOutput, CliError> {
            let seed = cube::child_seed(config.seed, trial as u64);
            let start = Instant::now();
            let sampled;
            let data = match &shared {
                Some(d) => d,
                None => {
                    sampled = Dataset::sample(config.n, &config.distribution, size, cube::child_seed(seed, DATA_STREAM))
                        .map_err(schema)?;
                    &sampled
                }
            };
            let params = ReleaseParams { seed: cube::child_seed(seed, ALGORITHM_STREAM), ..base };
            let mut row = TrialRow { trial, seed, eval_samples: eval, privacy_epsilon: Some(spec.epsilon), ..Default::default() };
            let mut files = Vec::new();
            match variant.release(data, &params) {
                Ok(summary) => {
                    let err = average_error(&summary, data, &queries_dist, eval, cube::child_seed(seed, EVAL_STREAM))
                        .map_err(schema)?;
                    row.average_error = Some(err.mean);
                    row.half_width = Some(err.half_width);
                    row.queries_used = Some(summary.metadata.queries_used);
                    row.queries_allowed = Some(summary.metadata.queries_allowed);
                    row.passed = crit.accepts(err.mean) && summary.metadata.queries_used <= summary.metadata.queries_allowed;
                    if let ReleaseBody::SyntheticDataset { dataset, .. } = &summary.body {
                        files.push((format!("synthetic_{trial}.txt"), dataset.to_text()));
                    }
                    files.push((format!("summary_{trial}.json"), summary.to_json_string() + "\n"));
                }
                Err(PrivacyError::Gate { required, actual, queries }) => return Err(CliError::Gate { required, actual, queries }),
                Err(e) => row.error = Some(e.to_string()),
            }
            Ok(TrialOutput { row, files, millis: start.elapsed().as_millis() })
        })
        .collect::<Result<_, _>>()?;
    write_trials(out, &outputs)?;
    let report = Report::new("release", variant_name(&variant), config.n, config.seed, crit, outputs.into_iter().map(|o| o.row).collect());
    report.write(out)?;
    Ok(report)
}
