//! The ten-row credit-scoring demo dataset used across tests and docs.
//!
//! The set is small enough to verify every quantity by hand: Age spans 23-70
//! (range 47), Salary 30-100 (range 70, in thousands), and the quasi-
//! identifiers are Age, Gender and City. Lisa is the walk-through applicant
//! whose rejection gets explained.

use std::sync::Arc;

use crate::dataset::{Dataset, Record, Value};
use crate::predictor::TableModel;
use crate::schema::{AttributeRole, AttributeSchema, DatasetConfig, Schema};

/// CSV form of the demo training set, as shipped for the CLI.
pub const TOY_CSV: &str = "\
Name,Age,Gender,City,Salary,Status,Outcome
Alfred,25,M,Brussels,50,Single,Reject
Boris,23,M,Antwerp,40,Separated,Reject
Casper,34,M,Brussels,30,Cohabiting,Reject
Derek,47,M,Antwerp,100,Married,Accept
Edward,70,M,Brussels,90,Single,Accept
Fiona,24,F,Antwerp,60,Single,Accept
Gina,27,F,Antwerp,80,Married,Accept
Hilda,38,F,Brussels,60,Widowed,Reject
Ingrid,26,F,Antwerp,60,Single,Reject
Jade,50,F,Brussels,100,Married,Accept
";

pub const ALFRED: usize = 0;
pub const BORIS: usize = 1;
pub const CASPER: usize = 2;
pub const DEREK: usize = 3;
pub const EDWARD: usize = 4;
pub const FIONA: usize = 5;
pub const GINA: usize = 6;
pub const HILDA: usize = 7;
pub const INGRID: usize = 8;
pub const JADE: usize = 9;

/// Schema config for the demo set. `csv_path` is a placeholder; tests build
/// the dataset in memory via [`toy_dataset`] or point the path at a copy of
/// [`TOY_CSV`].
pub fn toy_config() -> DatasetConfig {
    let config = DatasetConfig {
        csv_path: "toy_credit.csv".into(),
        attributes: vec![
            AttributeSchema::categorical("Name", AttributeRole::Identifier),
            AttributeSchema::numeric("Age", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("Gender", AttributeRole::QuasiIdentifier),
            AttributeSchema::categorical("City", AttributeRole::QuasiIdentifier),
            AttributeSchema::numeric("Salary", AttributeRole::Private),
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
    config.validate().expect("fixture config is valid");
    config
}

fn row(age: f64, gender: &str, city: &str, salary: f64, status: &str, outcome: &str) -> Vec<Value> {
    vec![
        Value::Number(age),
        Value::Label(gender.into()),
        Value::Label(city.into()),
        Value::Number(salary),
        Value::Label(status.into()),
        Value::Label(outcome.into()),
    ]
}

/// The demo training set as an in-memory dataset (row ids 0-9 in the order
/// of [`TOY_CSV`]).
pub fn toy_dataset() -> Dataset {
    let schema = Arc::new(Schema::from_config(&toy_config()));
    let rows = vec![
        row(25.0, "M", "Brussels", 50.0, "Single", "Reject"),
        row(23.0, "M", "Antwerp", 40.0, "Separated", "Reject"),
        row(34.0, "M", "Brussels", 30.0, "Cohabiting", "Reject"),
        row(47.0, "M", "Antwerp", 100.0, "Married", "Accept"),
        row(70.0, "M", "Brussels", 90.0, "Single", "Accept"),
        row(24.0, "F", "Antwerp", 60.0, "Single", "Accept"),
        row(27.0, "F", "Antwerp", 80.0, "Married", "Accept"),
        row(38.0, "F", "Brussels", 60.0, "Widowed", "Reject"),
        row(26.0, "F", "Antwerp", 60.0, "Single", "Reject"),
        row(50.0, "F", "Brussels", 100.0, "Married", "Accept"),
    ];
    Dataset::from_records(schema, rows).expect("fixture dataset is valid")
}

/// Lisa, the rejected applicant of the walk-through. Not part of the
/// training set; her row id is one past the last training row.
pub fn lisa() -> Record {
    Record {
        row_id: 10,
        values: row(21.0, "F", "Brussels", 50.0, "Single", "Reject"),
    }
}

/// Lookup-table classifier for the demo set: every training row keeps its
/// label, Lisa is rejected, and the four value combinations covered by the
/// generalized Fiona explanation (Age 24-27, F, Antwerp, with Fiona's salary
/// and status) split two Accept / two Reject. Unknown rows default to
/// Reject.
pub fn toy_model(schema: &Schema) -> TableModel {
    let mut model = TableModel::new(
        schema,
        vec!["Accept".into(), "Reject".into()],
        "Reject".into(),
    );
    for record in toy_dataset().records() {
        let outcome = record.label(schema.target_index).to_string();
        model.insert(&record.values, &outcome);
    }
    model.insert(&lisa().values, "Reject");
    model.insert(&row(25.0, "F", "Antwerp", 60.0, "Single", "Accept"), "Accept");
    model.insert(&row(27.0, "F", "Antwerp", 60.0, "Single", "Reject"), "Reject");
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;

    #[test]
    fn csv_and_in_memory_fixture_agree() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("toy_credit.csv");
        std::fs::write(&csv_path, TOY_CSV).unwrap();
        let mut config = toy_config();
        config.csv_path = csv_path;
        let from_csv = Dataset::load(&config).unwrap();
        let in_memory = toy_dataset();
        assert_eq!(from_csv.records(), in_memory.records());
        assert_eq!(from_csv.summaries(), in_memory.summaries());
    }

    #[test]
    fn named_rows_line_up() {
        let data = toy_dataset();
        assert_eq!(data.records()[FIONA].number(0), 24.0);
        assert_eq!(data.records()[GINA].number(0), 27.0);
        assert_eq!(data.records()[INGRID].label(1), "F");
        assert_eq!(data.records()[JADE].number(3), 100.0);
    }
}
