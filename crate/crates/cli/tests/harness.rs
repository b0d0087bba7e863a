//! Pipeline-level integration tests over the shipped toy data and small
//! synthetic fixtures.

use std::path::{Path, PathBuf};

use cfk_core::fixtures;
use cfk_core::schema::DatasetConfig;
use cfk_core::synthetic;

use cfk_cli::pipeline::{self, ExperimentConfig};
use cfk_cli::report::Method;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

#[test]
fn shipped_toy_csv_matches_the_fixture() {
    let shipped = std::fs::read_to_string(data_dir().join("toy_credit.csv")).unwrap();
    assert_eq!(shipped, fixtures::TOY_CSV);
}

#[test]
fn shipped_toy_config_matches_the_fixture_schema() {
    let shipped = DatasetConfig::from_file(&data_dir().join("toy_credit.toml")).unwrap();
    let fixture = fixtures::toy_config();
    assert_eq!(shipped.attributes, fixture.attributes);
    assert_eq!(shipped.sensitive_attribute, fixture.sensitive_attribute);
    assert_eq!(shipped.minority_value, fixture.minority_value);
    assert_eq!(shipped.desired_outcome, fixture.desired_outcome);
    assert_eq!(shipped.split_fraction, fixture.split_fraction);
    assert_eq!(shipped.split_seed, fixture.split_seed);
    assert!(shipped.csv_path.ends_with("toy_credit.csv"));
}

#[test]
fn toy_pipeline_at_k3_reports_only_rejected_test_rows() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(data_dir().join("toy_credit.toml"), out.path());
    cfg.k_sweep = vec![3];
    let output = pipeline::run_pipeline(&cfg).unwrap();
    assert!(!output.rows.is_empty());
    assert!(output.rows.len() <= 4, "{} rows", output.rows.len());
    for row in &output.rows {
        assert_eq!(row.method, Method::Cfk);
        assert_eq!(row.k, 3);
        assert!(row.k_degree >= 3);
    }
}

#[test]
fn baseline_rows_pair_with_cfk_rows_by_explanation_id() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synthetic::credit_scoring(120, 21);
    let config_path = fixture.write_to(dir.path()).unwrap();
    let mut cfg = ExperimentConfig::new(config_path, dir.path().join("out"));
    cfg.k_sweep = vec![4];
    cfg.baseline = true;
    cfg.max_explanations = 10;
    let output = pipeline::run_pipeline(&cfg).unwrap();
    let ids = |method: Method| -> Vec<usize> {
        output
            .rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.explanation_id)
            .collect()
    };
    let cfk = ids(Method::Cfk);
    assert!(!cfk.is_empty());
    assert_eq!(cfk, ids(Method::Mondrian));
}

#[test]
fn sweep_mean_ncp_is_non_decreasing_on_a_small_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synthetic::credit_scoring(150, 22);
    let config_path = fixture.write_to(dir.path()).unwrap();
    let mut cfg = ExperimentConfig::new(config_path, dir.path().join("out"));
    cfg.k_sweep = vec![2, 5, 10];
    cfg.max_explanations = 12;
    let output = pipeline::run_pipeline(&cfg).unwrap();
    let means: Vec<f64> = cfg
        .k_sweep
        .iter()
        .map(|&k| {
            let slice: Vec<f64> = output
                .rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.ncp)
                .collect();
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    assert!(
        means.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        "means not monotone: {means:?}"
    );
}

#[test]
fn rerun_is_byte_identical_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synthetic::credit_scoring(100, 23);
    let config_path = fixture.write_to(dir.path()).unwrap();
    let run = |out: &Path| {
        let mut cfg = ExperimentConfig::new(&config_path, out);
        cfg.k_sweep = vec![2, 5];
        cfg.baseline = true;
        cfg.max_explanations = 8;
        pipeline::run_pipeline(&cfg).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a.files.len(), b.files.len());
    for (fa, fb) in a.files.iter().zip(&b.files) {
        assert_eq!(
            std::fs::read(fa).unwrap(),
            std::fs::read(fb).unwrap(),
            "{} differs from {}",
            fa.display(),
            fb.display()
        );
    }
}

#[test]
fn timing_mode_differs_only_in_the_elapsed_column() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synthetic::credit_scoring(80, 24);
    let config_path = fixture.write_to(dir.path()).unwrap();
    let run = |out: &Path, timing: bool| {
        let mut cfg = ExperimentConfig::new(&config_path, out);
        cfg.k_sweep = vec![3];
        cfg.max_explanations = 5;
        cfg.record_timing = timing;
        pipeline::run_pipeline(&cfg).unwrap()
    };
    let silent = run(&dir.path().join("silent"), false);
    let timed = run(&dir.path().join("timed"), true);
    for (a, b) in silent.rows.iter().zip(&timed.rows) {
        assert_eq!(a.explanation_id, b.explanation_id);
        assert_eq!(a.ncp, b.ncp);
        assert_eq!(a.pureness, b.pureness);
        assert_eq!(a.k_degree, b.k_degree);
        assert_eq!(a.elapsed_seconds, 0.0);
        assert!(b.elapsed_seconds > 0.0);
    }
}

#[test]
fn pipeline_requires_a_desired_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let mut fixture = synthetic::credit_scoring(60, 25);
    fixture.config.desired_outcome = None;
    let config_path = fixture.write_to(dir.path()).unwrap();
    let cfg = ExperimentConfig::new(config_path, dir.path().join("out"));
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().contains("desired_outcome"), "{err:#}");
}

#[test]
fn model_reuse_reproduces_the_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = synthetic::credit_scoring(100, 26);
    let config_path = fixture.write_to(dir.path()).unwrap();
    let model_path = dir.path().join("model.json");
    let run = |out: &Path| {
        let mut cfg = ExperimentConfig::new(&config_path, out);
        cfg.k_sweep = vec![3];
        cfg.max_explanations = 6;
        cfg.model_path = Some(model_path.clone());
        pipeline::run_pipeline(&cfg).unwrap()
    };
    let trained = run(&dir.path().join("first"));
    assert!(model_path.exists());
    let reloaded = run(&dir.path().join("second"));
    assert_eq!(trained.rows, reloaded.rows);
}
