//! Seeded synthetic datasets for experiments and tests.
//!
//! Each generator returns the dataset, its config, and a rule classifier
//! that labels exactly like the generating rule, so experiments can run
//! either against the perfect rule model or against a forest trained on the
//! generated labels. Value universes are kept small (coarse grids, few
//! labels) so exhaustive oracles over the generalization space stay cheap.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Value};
use crate::error::Result;
use crate::predictor::{Classifier, TuningGrid};
use crate::schema::{AttributeRole, AttributeSchema, DatasetConfig, Schema};
use std::sync::Arc;

/// A classifier defined by a fixed decision function over stored values.
#[derive(Clone)]
pub struct RuleModel {
    classes: Vec<String>,
    decide: fn(&[Value]) -> usize,
}

impl RuleModel {
    pub fn new(classes: Vec<String>, decide: fn(&[Value]) -> usize) -> Self {
        RuleModel { classes, decide }
    }
}

impl Classifier for RuleModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict(&self, values: &[Value]) -> &str {
        &self.classes[(self.decide)(values)]
    }
}

/// A generated dataset bundled with its config and generating-rule model.
pub struct SyntheticFixture {
    /// Stem for the files written by [`SyntheticFixture::write_to`].
    pub name: &'static str,
    pub config: DatasetConfig,
    pub dataset: Dataset,
    pub model: RuleModel,
}

impl SyntheticFixture {
    /// Writes `<name>.csv` and `<name>.toml` into `dir` and returns the
    /// config path, ready for the experiment pipeline.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let csv_name = format!("{}.csv", self.name);
        self.dataset.write_csv(&dir.join(&csv_name))?;
        let config_path = dir.join(format!("{}.toml", self.name));
        std::fs::write(&config_path, config_toml(&self.config, &csv_name))?;
        Ok(config_path)
    }
}

fn toml_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders a config as the TOML the loader accepts, pointing at `csv_name`
/// next to the config file.
pub fn config_toml(config: &DatasetConfig, csv_name: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("csv_path = {}\n", toml_quote(csv_name)));
    out.push_str(&format!(
        "sensitive_attribute = {}\n",
        toml_quote(&config.sensitive_attribute)
    ));
    out.push_str(&format!(
        "minority_value = {}\n",
        toml_quote(&config.minority_value)
    ));
    if let Some(desired) = &config.desired_outcome {
        out.push_str(&format!("desired_outcome = {}\n", toml_quote(desired)));
    }
    out.push_str(&format!("split_fraction = {}\n", config.split_fraction));
    out.push_str(&format!("split_seed = {}\n", config.split_seed));
    for attr in &config.attributes {
        out.push_str("\n[[attribute]]\n");
        out.push_str(&format!("name = {}\n", toml_quote(&attr.name)));
        let kind = match attr.kind {
            crate::schema::AttributeKind::Numeric => "numeric",
            crate::schema::AttributeKind::Categorical => "categorical",
        };
        out.push_str(&format!("kind = {}\n", toml_quote(kind)));
        let role = match attr.role {
            AttributeRole::Identifier => "identifier",
            AttributeRole::QuasiIdentifier => "quasi",
            AttributeRole::Private => "private",
            AttributeRole::Target => "target",
        };
        out.push_str(&format!("role = {}\n", toml_quote(role)));
        if let Some(w) = attr.weight {
            out.push_str(&format!("weight = {w}\n"));
        }
    }
    if let Some(grid) = &config.tuning {
        out.push_str("\n[tuning]\n");
        let ne: Vec<String> = grid
            .n_estimators_options
            .iter()
            .map(|n| n.to_string())
            .collect();
        out.push_str(&format!("n_estimators = [{}]\n", ne.join(", ")));
        let ml: Vec<String> = grid
            .max_leaf_nodes_options
            .iter()
            .map(|m| m.map_or(0, |v| v).to_string())
            .collect();
        out.push_str(&format!("max_leaf_nodes = [{}]\n", ml.join(", ")));
        out.push_str(&format!("cv_folds = {}\n", grid.cv_folds));
        out.push_str(&format!("tuning_seed = {}\n", grid.tuning_seed));
    }
    out
}

fn build(config: DatasetConfig, rows: Vec<Vec<Value>>) -> (DatasetConfig, Dataset) {
    config.validate().expect("generator config is valid");
    let schema = Arc::new(Schema::from_config(&config));
    let dataset = Dataset::from_records(schema, rows).expect("generator rows are valid");
    (config, dataset)
}

fn num(x: i64) -> Value {
    Value::Number(x as f64)
}

fn lab(s: &str) -> Value {
    Value::Label(s.to_string())
}

/// Two numeric attributes, label decided by a single threshold on X1. Good
/// for checking that a trained model recovers a noiseless rule.
pub fn linearly_separable(rows: usize, seed: u64) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x1 = rng.random_range(0..100i64);
        let x2 = rng.random_range(0..100i64);
        let c = if rng.random_range(0..4) == 0 { "b" } else { "a" };
        let label = if x1 >= 50 { "Pos" } else { "Neg" };
        data.push(vec![num(x1), num(x2), lab(c), lab(label)]);
    }
    let config = DatasetConfig {
        csv_path: "separable.csv".into(),
        attributes: vec![
            AttributeSchema::numeric("X1", AttributeRole::QuasiIdentifier),
            AttributeSchema::numeric("X2", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("C", AttributeRole::Private),
            AttributeSchema::categorical("Y", AttributeRole::Target),
        ],
        sensitive_attribute: "C".into(),
        minority_value: "b".into(),
        desired_outcome: Some("Pos".into()),
        split_fraction: 0.6,
        split_seed: 0,
        tuning: None,
    };
    let (config, dataset) = build(config, data);
    let model = RuleModel::new(vec!["Neg".into(), "Pos".into()], |values| {
        usize::from(values[0].as_number().unwrap() >= 50.0)
    });
    SyntheticFixture {
        name: "separable",
        config,
        dataset,
        model,
    }
}

/// Loan dataset with three quasi-identifiers over small value universes
/// (13 ages, 2 genders, 4 regions): acceptance depends on savings and age.
pub fn credit_scoring(rows: usize, seed: u64) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = ["East", "North", "South", "West"];
    let statuses = ["Divorced", "Married", "Single"];
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let age = 20 + 5 * rng.random_range(0..13i64);
        let gender = if rng.random_range(0..2) == 0 { "F" } else { "M" };
        let region = regions[rng.random_range(0..regions.len())];
        let savings = rng.random_range(0..101i64);
        let status = statuses[rng.random_range(0..statuses.len())];
        let label = credit_label(savings as f64, age as f64);
        data.push(vec![
            num(age),
            lab(gender),
            lab(region),
            num(savings),
            lab(status),
            lab(label),
        ]);
    }
    let config = DatasetConfig {
        csv_path: "credit.csv".into(),
        attributes: vec![
            AttributeSchema::numeric("Age", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Gender", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Region", AttributeRole::QuasiIdentifier),
            AttributeSchema::numeric("Savings", AttributeRole::Private),
            AttributeSchema::categorical("Status", AttributeRole::Private),
            AttributeSchema::categorical("Outcome", AttributeRole::Target),
        ],
        sensitive_attribute: "Gender".into(),
        minority_value: "F".into(),
        desired_outcome: Some("Accept".into()),
        split_fraction: 0.6,
        split_seed: 0,
        tuning: None,
    };
    let (config, dataset) = build(config, data);
    let model = RuleModel::new(vec!["Accept".into(), "Reject".into()], |values| {
        let age = values[0].as_number().unwrap();
        let savings = values[3].as_number().unwrap();
        usize::from(credit_label(savings, age) == "Reject")
    });
    SyntheticFixture {
        name: "credit",
        config,
        dataset,
        model,
    }
}

fn credit_label(savings: f64, age: f64) -> &'static str {
    if savings + 0.3 * age >= 70.0 {
        "Accept"
    } else {
        "Reject"
    }
}

/// Survey-style dataset (1,473-row scale in the original) whose outcome
/// depends mostly on the quasi-identifiers, so generalization genuinely
/// erodes pureness: wife's age and number of children drive the label.
pub fn cmc_like(rows: usize, seed: u64) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupations = ["O1", "O2", "O3", "O4"];
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let age = 16 + rng.random_range(0..34i64);
        let children = rng.random_range(0..13i64);
        let religion = if rng.random_range(0..10) < 7 { "Islam" } else { "Other" };
        let edu = 1 + rng.random_range(0..4i64);
        let occupation = occupations[rng.random_range(0..occupations.len())];
        let standard = 1 + rng.random_range(0..4i64);
        let label = cmc_label(age as f64, children as f64, standard as f64);
        data.push(vec![
            num(age),
            num(children),
            lab(religion),
            num(edu),
            lab(occupation),
            num(standard),
            lab(label),
        ]);
    }
    let config = DatasetConfig {
        csv_path: "cmc.csv".into(),
        attributes: vec![
            AttributeSchema::numeric("WifeAge", AttributeRole::QuasiIdentifier),
            AttributeSchema::numeric("Children", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Religion", AttributeRole::QuasiIdentifier),
            AttributeSchema::numeric("WifeEdu", AttributeRole::Private),
            AttributeSchema::categorical("HusbOcc", AttributeRole::Private),
            AttributeSchema::numeric("Standard", AttributeRole::Private),
            AttributeSchema::categorical("Use", AttributeRole::Target),
        ],
        sensitive_attribute: "Religion".into(),
        minority_value: "Other".into(),
        desired_outcome: Some("Yes".into()),
        split_fraction: 0.6,
        split_seed: 0,
        tuning: Some(
            TuningGrid {
                n_estimators_options: vec![20],
                max_leaf_nodes_options: vec![None],
                cv_folds: 3,
                tuning_seed: 0,
            },
        ),
    };
    let (config, dataset) = build(config, data);
    let model = RuleModel::new(vec!["No".into(), "Yes".into()], |values| {
        let age = values[0].as_number().unwrap();
        let children = values[1].as_number().unwrap();
        let standard = values[5].as_number().unwrap();
        usize::from(cmc_label(age, children, standard) == "Yes")
    });
    SyntheticFixture {
        name: "cmc",
        config,
        dataset,
        model,
    }
}

fn cmc_label(age: f64, children: f64, standard: f64) -> &'static str {
    let mut score = 0;
    if (22.0..=36.0).contains(&age) {
        score += 2;
    }
    if (1.0..=6.0).contains(&children) {
        score += 2;
    }
    if standard >= 3.0 {
        score += 1;
    }
    if score >= 3 {
        "Yes"
    } else {
        "No"
    }
}

/// Dataset with a 10% minority living in a sparse quasi-identifier region
/// (old sparse ages, rare zips) while the outcome depends only on the
/// private wealth attribute. Used for the fairness analysis: anonymizing
/// minority explanations costs more information, while pureness stays flat.
pub fn minority_skewed(rows: usize, seed: u64) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows);
    for i in 0..rows {
        let minority = i % 10 == 0;
        let (age, zip, origin) = if minority {
            let age = 70 + 4 * rng.random_range(0..6i64);
            let zip = if rng.random_range(0..2) == 0 { "Z8" } else { "Z9" };
            (age, zip, "min")
        } else {
            let age = 20 + rng.random_range(0..35i64);
            let zip = ["Z1", "Z2", "Z3", "Z4", "Z5", "Z6"][rng.random_range(0..6)];
            (age, zip, "maj")
        };
        let wealth = rng.random_range(0..101i64);
        let label = if wealth >= 50 { "Accept" } else { "Reject" };
        data.push(vec![num(age), lab(zip), lab(origin), num(wealth), lab(label)]);
    }
    let config = DatasetConfig {
        csv_path: "skewed.csv".into(),
        attributes: vec![
            AttributeSchema::numeric("Age", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Zip", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Origin", AttributeRole::Private),
            AttributeSchema::numeric("Wealth", AttributeRole::Private),
            AttributeSchema::categorical("Outcome", AttributeRole::Target),
        ],
        sensitive_attribute: "Origin".into(),
        minority_value: "min".into(),
        desired_outcome: Some("Accept".into()),
        split_fraction: 0.6,
        split_seed: 0,
        tuning: Some(
            TuningGrid {
                n_estimators_options: vec![15],
                max_leaf_nodes_options: vec![None],
                cv_folds: 3,
                tuning_seed: 0,
            },
        ),
    };
    let (config, dataset) = build(config, data);
    let model = RuleModel::new(vec!["Accept".into(), "Reject".into()], |values| {
        usize::from(values[3].as_number().unwrap() < 50.0)
    });
    SyntheticFixture {
        name: "skewed",
        config,
        dataset,
        model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = credit_scoring(100, 1);
        let b = credit_scoring(100, 1);
        assert_eq!(a.dataset.records(), b.dataset.records());
    }

    #[test]
    fn rule_models_agree_with_generated_labels() {
        for fixture in [
            linearly_separable(80, 2),
            credit_scoring(80, 2),
            cmc_like(80, 2),
            minority_skewed(80, 2),
        ] {
            let target = fixture.dataset.schema().target_index;
            for r in fixture.dataset.records() {
                assert_eq!(fixture.model.predict(&r.values), r.label(target));
            }
        }
    }

    #[test]
    fn minority_fraction_is_ten_percent() {
        let fixture = minority_skewed(200, 3);
        let schema = fixture.dataset.schema();
        let minority = fixture
            .dataset
            .records()
            .iter()
            .filter(|r| schema.group_of(r) == crate::schema::Group::Minority)
            .count();
        assert_eq!(minority, 20);
    }

    #[test]
    fn fixture_round_trips_through_files() {
        let fixture = credit_scoring(60, 4);
        let dir = tempfile::tempdir().unwrap();
        let config_path = fixture.write_to(dir.path()).unwrap();
        let config = DatasetConfig::from_file(&config_path).unwrap();
        let reloaded = Dataset::load(&config).unwrap();
        assert_eq!(reloaded.records(), fixture.dataset.records());
        assert_eq!(config.desired_outcome.as_deref(), Some("Accept"));
    }

    #[test]
    fn both_outcomes_are_represented() {
        for fixture in [credit_scoring(150, 5), cmc_like(150, 5), minority_skewed(150, 5)] {
            let target = fixture.dataset.schema().target_index;
            let classes: std::collections::BTreeSet<&str> = fixture
                .dataset
                .records()
                .iter()
                .map(|r| r.label(target))
                .collect();
            assert_eq!(classes.len(), 2, "{}", fixture.name);
        }
    }
}
