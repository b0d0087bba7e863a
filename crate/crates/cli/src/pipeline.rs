//! End-to-end experiment pipeline: split the data, tune or load the
//! classifier, generate a counterfactual for every test row denied the
//! desired outcome, anonymize each one, and emit CSV reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;

use cfk_core::metrics::{self, NcpWeights};
use cfk_core::mondrian::{baseline_explanation, mondrian, AnonymizedDataset};
use cfk_core::neighbors::{
    nearest_unlike_neighbor, AttributeMask, CounterfactualResult, DistanceMetric, PredictionCache,
};
use cfk_core::predictor::{train, TreeEnsembleModel};
use cfk_core::schema::{DatasetConfig, Group};
use cfk_core::seed;
use cfk_core::{Anonymizer, CfkParams, Dataset, Record};

use crate::report::{self, Method, ReportRow};

pub const DEFAULT_K_SWEEP: [usize; 4] = [2, 5, 10, 20];
pub const DEFAULT_MAX_EXPLANATIONS: usize = 1_000;

/// Seed stream tag for baseline pureness estimates, distinct from the tags
/// the anonymizer uses internally.
const BASELINE_PURENESS_TAG: u64 = 0xba5e;

/// Everything one experiment run needs beyond the dataset config itself.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset_config: PathBuf,
    /// Per-explanation anonymization parameters; the `k` field is overridden
    /// by each entry of `k_sweep`.
    pub cfk: CfkParams,
    pub k_sweep: Vec<usize>,
    pub max_explanations: usize,
    /// Also anonymize the whole training set and score the equivalent
    /// whole-dataset explanation for every instance.
    pub baseline: bool,
    pub out_dir: PathBuf,
    /// Reuse a saved model when the file exists; train and save otherwise.
    pub model_path: Option<PathBuf>,
    /// Record wall-clock seconds in reports. Off by default so identical
    /// runs emit identical bytes.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(dataset_config: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset_config: dataset_config.into(),
            cfk: CfkParams::default(),
            k_sweep: DEFAULT_K_SWEEP.to_vec(),
            max_explanations: DEFAULT_MAX_EXPLANATIONS,
            baseline: false,
            out_dir: out_dir.into(),
            model_path: None,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.k_sweep.is_empty(), "k_sweep must not be empty");
        ensure!(
            self.k_sweep.windows(2).all(|w| w[0] < w[1]),
            "k_sweep must be strictly ascending"
        );
        ensure!(self.k_sweep[0] >= 1, "k values must be at least 1");
        ensure!(self.max_explanations >= 1, "max_explanations must be at least 1");
        self.cfk.validate()?;
        Ok(())
    }
}

/// Loaded dataset with its split, ready for training and explanation.
pub struct PreparedData {
    pub config: DatasetConfig,
    pub full: Dataset,
    pub train_half: Dataset,
    pub test_half: Dataset,
}

impl PreparedData {
    pub fn desired(&self) -> Result<&str> {
        self.config
            .desired_outcome
            .as_deref()
            .context("dataset config must set desired_outcome to run explanations")
    }
}

/// Validates the config, loads the CSV, and splits it.
pub fn prepare(config_path: &Path) -> Result<PreparedData> {
    let config = DatasetConfig::from_file(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    let full = Dataset::load(&config).context("loading dataset CSV")?;
    let (train_half, test_half) = full
        .split(config.split_fraction, config.split_seed)
        .context("splitting dataset")?;
    Ok(PreparedData {
        config,
        full,
        train_half,
        test_half,
    })
}

/// Loads the model from `model_path` when present, otherwise trains on the
/// training half (saving to `model_path` when one is configured).
pub fn obtain_model(cfg: &ExperimentConfig, prepared: &PreparedData) -> Result<TreeEnsembleModel> {
    if let Some(path) = &cfg.model_path {
        if path.exists() {
            return TreeEnsembleModel::load(path)
                .with_context(|| format!("loading model {}", path.display()));
        }
    }
    let grid = prepared.config.tuning.clone().unwrap_or_default();
    let model = train(&prepared.train_half, &grid).context("training model")?;
    if let Some(path) = &cfg.model_path {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        model.save(path).with_context(|| format!("saving model {}", path.display()))?;
    }
    Ok(model)
}

/// A test instance denied the desired outcome, with its native
/// counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// The factual's row id doubles as the explanation id.
    pub id: usize,
    pub group: Group,
    pub predicted: String,
    pub cf: CounterfactualResult,
}

/// Native counterfactuals for the first `max` test rows (in row order) whose
/// prediction is not the desired outcome.
pub fn native_explanations(
    prepared: &PreparedData,
    cache: &PredictionCache,
    metric: &DistanceMetric,
    max: usize,
) -> Result<Vec<Explanation>> {
    let desired = prepared.desired()?;
    let schema = prepared.test_half.schema();
    let mut out = Vec::new();
    for factual in prepared.test_half.records() {
        let predicted = cache.model().predict(&factual.values).to_string();
        if predicted == desired {
            continue;
        }
        let cf = nearest_unlike_neighbor(factual, cache, metric)
            .with_context(|| format!("explanation {}: counterfactual search", factual.row_id))?;
        ensure!(
            cf.desired_outcome == desired,
            "explanation {}: nearest unlike neighbor is predicted '{}', not the desired '{}' \
             (only binary outcomes are supported end to end)",
            factual.row_id,
            cf.desired_outcome,
            desired
        );
        out.push(Explanation {
            id: factual.row_id,
            group: schema.group_of(factual),
            predicted,
            cf,
        });
        if out.len() == max {
            break;
        }
    }
    Ok(out)
}

pub fn write_explanations(path: &Path, explanations: &[Explanation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "explanation_id",
        "factual_row_id",
        "group",
        "predicted",
        "desired_outcome",
        "counterfactual_row_id",
        "distance",
    ])?;
    for e in explanations {
        w.write_record([
            e.id.to_string(),
            e.cf.factual.row_id.to_string(),
            e.group.to_string(),
            e.predicted.clone(),
            e.cf.desired_outcome.clone(),
            e.cf.counterfactual.row_id.to_string(),
            format!("{:.6}", e.cf.distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn record_by_row_id<'a>(data: &'a Dataset, row_id: usize) -> Result<&'a Record> {
    // Records stay sorted by row_id through splits.
    data.records()
        .binary_search_by_key(&row_id, |r| r.row_id)
        .map(|i| &data.records()[i])
        .map_err(|_| anyhow::anyhow!("row {row_id} not found in this split"))
}

/// Rebuilds explanations saved by [`write_explanations`], recomputing the
/// distance from the stored rows rather than trusting the rounded text.
pub fn load_explanations(
    path: &Path,
    prepared: &PreparedData,
    metric: &DistanceMetric,
) -> Result<Vec<Explanation>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let schema = prepared.test_half.schema();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .with_context(|| format!("explanations file missing column {i}"))
        };
        let factual_id: usize = field(1)?.parse().context("bad factual_row_id")?;
        let predicted = field(3)?.to_string();
        let desired = field(4)?.to_string();
        let counterfactual_id: usize = field(5)?.parse().context("bad counterfactual_row_id")?;
        let factual = record_by_row_id(&prepared.test_half, factual_id)
            .context("factual row must be in the test half")?;
        let counterfactual = record_by_row_id(&prepared.train_half, counterfactual_id)
            .context("counterfactual row must be in the training half")?;
        out.push(Explanation {
            id: factual_id,
            group: schema.group_of(factual),
            predicted,
            cf: CounterfactualResult {
                factual: factual.clone(),
                counterfactual: counterfactual.clone(),
                desired_outcome: desired,
                distance: metric.distance(factual, counterfactual),
            },
        });
    }
    Ok(out)
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub rows: Vec<ReportRow>,
    /// Files written, report.csv first.
    pub files: Vec<PathBuf>,
}

/// Full run against a freshly trained (or reloaded) forest.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let prepared = prepare(&cfg.dataset_config)?;
    let model = obtain_model(cfg, &prepared)?;
    let cache = PredictionCache::new(&prepared.train_half, &model);
    let metric = DistanceMetric::new(&prepared.train_half, AttributeMask::Predictors);
    let explanations = native_explanations(&prepared, &cache, &metric, cfg.max_explanations)?;
    run_with_explanations(cfg, &prepared, &cache, &metric, &explanations)
}

/// Pipeline core shared by the subcommands: anonymize the given explanations
/// at every k in the sweep and write all report files.
pub fn run_with_explanations(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    cache: &PredictionCache,
    predictor_metric: &DistanceMetric,
    explanations: &[Explanation],
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let desired = prepared.desired()?;
    let train = &prepared.train_half;
    let weights = NcpWeights::from_schema(train.schema());
    if explanations.is_empty() {
        bail!("no test instance is denied the desired outcome; nothing to explain");
    }

    let mut rows: Vec<ReportRow> = Vec::new();
    for &k in &cfg.k_sweep {
        let anonymizer = Anonymizer::new(cache, CfkParams { k, ..cfg.cfk.clone() })?;
        let anonymized: Option<AnonymizedDataset> = match cfg.baseline {
            true => Some(mondrian(train, k).with_context(|| format!("baseline partitioning at k={k}"))?),
            false => None,
        };
        let per_explanation: Vec<Result<Vec<ReportRow>>> = explanations
            .par_iter()
            .map(|e| {
                let mut out = Vec::with_capacity(2);
                let solution = anonymizer
                    .anonymize(&e.cf)
                    .with_context(|| format!("explanation {}: anonymization at k={k}", e.id))?;
                ensure!(
                    solution.instance.k_degree(train) >= k,
                    "explanation {}: solution fails the k-anonymity recheck at k={k}",
                    e.id
                );
                out.push(ReportRow {
                    explanation_id: e.id,
                    group: e.group,
                    method: Method::Cfk,
                    k,
                    ncp: solution.report.ncp,
                    pureness: solution.report.pureness.value,
                    k_degree: solution.report.k_degree,
                    elapsed_seconds: if cfg.record_timing { solution.report.elapsed } else { 0.0 },
                });
                if let Some(anonymized) = &anonymized {
                    let started = Instant::now();
                    let g = baseline_explanation(&e.cf.factual, anonymized, cache, predictor_metric, desired)
                        .with_context(|| format!("explanation {}: baseline at k={k}", e.id))?;
                    let k_degree = g.k_degree(train);
                    ensure!(
                        k_degree >= k,
                        "explanation {}: baseline partition fails the k-anonymity recheck at k={k}",
                        e.id
                    );
                    let pureness = metrics::pureness_sampled(
                        &g,
                        train,
                        cache.model(),
                        desired,
                        cfg.cfk.pureness_samples,
                        seed::mix(cfg.cfk.seed, BASELINE_PURENESS_TAG),
                    );
                    out.push(ReportRow {
                        explanation_id: e.id,
                        group: e.group,
                        method: Method::Mondrian,
                        k,
                        ncp: metrics::ncp(&g, train, &weights),
                        pureness: pureness.value,
                        k_degree,
                        elapsed_seconds: if cfg.record_timing {
                            started.elapsed().as_secs_f64()
                        } else {
                            0.0
                        },
                    });
                }
                Ok(out)
            })
            .collect();
        for result in per_explanation {
            rows.extend(result?);
        }
    }

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let report_path = cfg.out_dir.join("report.csv");
    report::write_report(&report_path, &rows)?;
    let aggregate_path = cfg.out_dir.join("aggregate.csv");
    report::write_aggregate(&aggregate_path, &report::aggregate(&rows))?;
    let mut files = vec![report_path, aggregate_path];
    files.extend(report::write_sorted_ncp_curves(&cfg.out_dir, &rows)?);
    let (per_group, gaps) = report::fairness_report(&rows);
    files.extend(report::write_fairness(&cfg.out_dir, &per_group, &gaps)?);
    Ok(PipelineOutput { rows, files })
}
