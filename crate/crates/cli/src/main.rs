use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cfk_cli::attack::linkage_attack;
use cfk_cli::pipeline::{self, ExperimentConfig};
use cfk_cli::report::{self, ReportRow};
use cfk_core::generalization::GeneralizedInstance;
use cfk_core::neighbors::{AttributeMask, DistanceMetric, PredictionCache};
use cfk_core::predictor::Classifier;
use cfk_core::schema::Group;
use cfk_core::{Anonymizer, CfkParams, Dataset, ObjectiveMode};

#[derive(Parser)]
#[command(
    name = "cfk",
    version,
    about = "k-anonymous counterfactual explanations for tabular classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Anonymity degree for single-k commands
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Candidate-list size for the randomized construction
    #[arg(long, default_value_t = 20)]
    alpha: usize,
    /// Construction + local-search rounds per explanation
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Base seed for every randomized stage
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample budget for reported pureness estimates
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Cap on the number of explained test instances
    #[arg(long, default_value_t = 1000)]
    max_explanations: usize,
    /// Output directory for reports
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Save the trained model here and reuse it when the file exists
    #[arg(long)]
    model: Option<PathBuf>,
    /// Record wall-clock seconds in reports (off keeps reruns byte-identical)
    #[arg(long)]
    timing: bool,
    /// Optimize information loss only instead of pureness-then-loss
    #[arg(long)]
    ncp_only: bool,
}

impl Common {
    fn experiment(&self, k_sweep: Vec<usize>, baseline: bool) -> ExperimentConfig {
        ExperimentConfig {
            dataset_config: self.config.clone(),
            cfk: CfkParams {
                k: self.k,
                alpha: self.alpha,
                max_iter: self.iters,
                pureness_samples: self.samples,
                seed: self.seed,
                objective_mode: if self.ncp_only {
                    ObjectiveMode::NcpOnly
                } else {
                    ObjectiveMode::LexicographicPurenessThenNcp
                },
            },
            k_sweep,
            max_explanations: self.max_explanations,
            baseline,
            out_dir: self.out.clone(),
            model_path: self.model.clone(),
            record_timing: self.timing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate the dataset config and CSV, printing a summary
    Prepare {
        #[command(flatten)]
        common: Common,
    },
    /// Fit and tune the classifier, saving it for reuse
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Generate native counterfactual explanations only
    Explain {
        #[command(flatten)]
        common: Common,
    },
    /// Make explanations k-anonymous (reusing saved ones when present)
    Anonymize {
        #[command(flatten)]
        common: Common,
        /// Explanations file from a previous `explain` run
        #[arg(long)]
        explanations: Option<PathBuf>,
    },
    /// Compare against whole-dataset generalization at one k
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep anonymity degrees and emit trade-off reports
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Anonymity degrees, ascending
        #[arg(long, value_delimiter = ',', default_values_t = pipeline::DEFAULT_K_SWEEP)]
        k_sweep: Vec<usize>,
        /// Also score the whole-dataset baseline at each k
        #[arg(long)]
        baseline: bool,
    },
    /// Per-group aggregates and the minority/majority gap
    Fairness {
        #[command(flatten)]
        common: Common,
        /// Anonymity degrees, ascending
        #[arg(long, value_delimiter = ',', default_values_t = pipeline::DEFAULT_K_SWEEP)]
        k_sweep: Vec<usize>,
    },
    /// Demonstrate the explanation linkage attack on one explanation
    Attack {
        #[command(flatten)]
        common: Common,
        /// Test row id to attack (default: the first explained instance)
        #[arg(long)]
        row: Option<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Prepare { common } => cmd_prepare(&common),
        Command::Train { common } => cmd_train(&common),
        Command::Explain { common } => cmd_explain(&common),
        Command::Anonymize { common, explanations } => cmd_anonymize(&common, explanations),
        Command::Baseline { common } => cmd_run(&common.experiment(vec![common.k], true)),
        Command::Sweep { common, k_sweep, baseline } => {
            cmd_run(&common.experiment(k_sweep, baseline))
        }
        Command::Fairness { common, k_sweep } => cmd_fairness(&common.experiment(k_sweep, false)),
        Command::Attack { common, row } => cmd_attack(&common, row),
    }
}

fn cmd_prepare(common: &Common) -> Result<()> {
    let prepared = pipeline::prepare(&common.config)?;
    let schema = prepared.full.schema();
    println!("config OK: {}", common.config.display());
    println!(
        "rows: {} loaded, {} skipped for empty fields",
        prepared.full.len(),
        prepared.full.skipped_rows()
    );
    println!(
        "split: {} train / {} test (fraction {}, seed {})",
        prepared.train_half.len(),
        prepared.test_half.len(),
        prepared.config.split_fraction,
        prepared.config.split_seed
    );
    println!(
        "attributes: {} stored, {} quasi-identifier(s), {} private, target '{}'",
        schema.attributes.len(),
        schema.qid_indices.len(),
        schema.private_indices.len(),
        schema.attributes[schema.target_index].name
    );
    let minority = prepared
        .full
        .records()
        .iter()
        .filter(|r| schema.group_of(r) == Group::Minority)
        .count();
    println!(
        "minority group ('{}' = '{}'): {} of {} rows",
        schema.attributes[schema.sensitive_index].name,
        schema.minority_value,
        minority,
        prepared.full.len()
    );
    match &prepared.config.desired_outcome {
        Some(d) => println!("desired outcome: {d}"),
        None => println!("desired outcome: not set (explanation commands will refuse)"),
    }
    Ok(())
}

fn cmd_train(common: &Common) -> Result<()> {
    let prepared = pipeline::prepare(&common.config)?;
    let grid = prepared.config.tuning.clone().unwrap_or_default();
    let model = cfk_core::predictor::train(&prepared.train_half, &grid)?;
    let model_path = common
        .model
        .clone()
        .unwrap_or_else(|| common.out.join("model.json"));
    if let Some(dir) = model_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    model.save(&model_path)?;
    let accuracy = |data: &Dataset| {
        let target = data.schema().target_index;
        let hits = data
            .records()
            .iter()
            .filter(|r| model.predict(&r.values) == r.label(target))
            .count();
        hits as f64 / data.len() as f64
    };
    println!(
        "tuned model: {} trees, max_leaf_nodes {}",
        model.n_estimators,
        model
            .max_leaf_nodes
            .map_or_else(|| "unbounded".to_string(), |m| m.to_string())
    );
    println!(
        "accuracy: {:.3} train / {:.3} test",
        accuracy(&prepared.train_half),
        accuracy(&prepared.test_half)
    );
    if let Some((name, importance)) = model.feature_importance_rank().first() {
        println!("top feature: {name} (importance {importance:.3})");
    }
    println!("saved: {}", model_path.display());
    Ok(())
}

fn cmd_explain(common: &Common) -> Result<()> {
    let cfg = common.experiment(vec![common.k], false);
    let prepared = pipeline::prepare(&common.config)?;
    let model = pipeline::obtain_model(&cfg, &prepared)?;
    let cache = PredictionCache::new(&prepared.train_half, &model);
    let metric = DistanceMetric::new(&prepared.train_half, AttributeMask::Predictors);
    let explanations =
        pipeline::native_explanations(&prepared, &cache, &metric, common.max_explanations)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("explanations.csv");
    pipeline::write_explanations(&path, &explanations)?;
    println!(
        "{} native counterfactual(s) -> {}",
        explanations.len(),
        path.display()
    );
    Ok(())
}

fn cmd_anonymize(common: &Common, explanations_path: Option<PathBuf>) -> Result<()> {
    let cfg = common.experiment(vec![common.k], false);
    let prepared = pipeline::prepare(&common.config)?;
    let model = pipeline::obtain_model(&cfg, &prepared)?;
    let cache = PredictionCache::new(&prepared.train_half, &model);
    let metric = DistanceMetric::new(&prepared.train_half, AttributeMask::Predictors);
    let saved = explanations_path.or_else(|| {
        let default = common.out.join("explanations.csv");
        default.exists().then_some(default)
    });
    let explanations = match &saved {
        Some(path) => {
            let loaded = pipeline::load_explanations(path, &prepared, &metric)?;
            println!("reusing {} explanation(s) from {}", loaded.len(), path.display());
            loaded
        }
        None => pipeline::native_explanations(&prepared, &cache, &metric, common.max_explanations)?,
    };
    let output = pipeline::run_with_explanations(&cfg, &prepared, &cache, &metric, &explanations)?;
    print_summary(&output.rows);
    print_files(&output.files);
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<()> {
    let output = pipeline::run_pipeline(cfg)?;
    print_summary(&output.rows);
    print_files(&output.files);
    Ok(())
}

fn cmd_fairness(cfg: &ExperimentConfig) -> Result<()> {
    let output = pipeline::run_pipeline(cfg)?;
    let (per_group, gaps) = report::fairness_report(&output.rows);
    for row in &per_group {
        println!(
            "k={} {}: mean NCP {:.4}, mean pureness {:.4} ({} explanation(s))",
            row.k, row.group, row.mean_ncp, row.mean_pureness, row.explanations
        );
    }
    for gap in &gaps {
        println!(
            "k={} gap (minority - majority): NCP {:+.4}, pureness {:+.4}",
            gap.k, gap.ncp_gap, gap.pureness_gap
        );
    }
    if gaps.is_empty() {
        println!("gap: absent (a group received no explanations)");
    }
    print_files(&output.files);
    Ok(())
}

fn cmd_attack(common: &Common, row: Option<usize>) -> Result<()> {
    let cfg = common.experiment(vec![common.k], false);
    let prepared = pipeline::prepare(&common.config)?;
    let desired = prepared.desired()?.to_string();
    let model = pipeline::obtain_model(&cfg, &prepared)?;
    let cache = PredictionCache::new(&prepared.train_half, &model);
    let metric = DistanceMetric::new(&prepared.train_half, AttributeMask::Predictors);
    let explanations =
        pipeline::native_explanations(&prepared, &cache, &metric, common.max_explanations)?;
    let explanation = match row {
        Some(id) => explanations
            .iter()
            .find(|e| e.id == id)
            .with_context(|| format!("test row {id} is not among the explained instances"))?,
        None => explanations
            .first()
            .context("no test instance is denied the desired outcome")?,
    };
    let schema = prepared.train_half.schema();
    println!(
        "explanation {}: predicted '{}', desired '{}'",
        explanation.id, explanation.predicted, desired
    );
    let native =
        GeneralizedInstance::ungeneralized(schema, explanation.cf.counterfactual.clone());
    println!(
        "native counterfactual {}: {}",
        native.render(),
        linkage_attack(&native, &prepared.train_half).render()
    );
    let anonymizer = Anonymizer::new(&cache, CfkParams { k: common.k, ..cfg.cfk.clone() })?;
    let solution = anonymizer.anonymize(&explanation.cf)?;
    println!(
        "{}-anonymous {}: {}",
        common.k,
        solution.instance.render(),
        linkage_attack(&solution.instance, &prepared.train_half).render()
    );
    Ok(())
}

fn print_summary(rows: &[ReportRow]) {
    for agg in report::aggregate(rows) {
        if agg.group.is_none() {
            println!(
                "{} k={}: mean NCP {:.4}, mean pureness {:.4}, mean k-degree {:.1} ({} explanation(s))",
                agg.method,
                agg.k,
                agg.mean_ncp,
                agg.mean_pureness,
                agg.mean_k_degree,
                agg.explanations
            );
        }
    }
}

fn print_files(files: &[std::path::PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}
