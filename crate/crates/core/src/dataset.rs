//! Records, datasets, CSV ingestion and the seeded train/test split.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{AttributeKind, AttributeRole, DatasetConfig, Schema};

/// A single attribute value. Numeric values keep the attribute's native
/// units; categorical values are opaque labels.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Number(_) => None,
            Value::Label(s) => Some(s),
        }
    }

    /// Renders the value as it appears in CSV output. Integral numbers print
    /// without a decimal point ("24", not "24.0").
    pub fn render(&self) -> String {
        match self {
            Value::Number(x) => render_number(*x),
            Value::Label(s) => s.clone(),
        }
    }
}

pub(crate) fn render_number(x: f64) -> String {
    format!("{x}")
}

/// One data row. Kinds are validated against the schema at construction, so
/// the typed accessors below panic only on schema-violating internal misuse.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Stable position of the row within its dataset; ties and seeds key off
    /// it, so it survives splits unchanged.
    pub row_id: usize,
    pub values: Vec<Value>,
}

impl Record {
    pub fn number(&self, attribute: usize) -> f64 {
        match &self.values[attribute] {
            Value::Number(x) => *x,
            Value::Label(l) => panic!("attribute {attribute} holds label '{l}', expected a number"),
        }
    }

    pub fn label(&self, attribute: usize) -> &str {
        match &self.values[attribute] {
            Value::Label(s) => s,
            Value::Number(x) => panic!("attribute {attribute} holds number {x}, expected a label"),
        }
    }
}

/// Per-attribute summary over a dataset: the normalization denominators for
/// distance and information loss.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeSummary {
    Numeric { min: f64, max: f64 },
    Categorical { values: BTreeSet<String> },
}

impl AttributeSummary {
    /// max − min for numeric attributes.
    pub fn range(&self) -> f64 {
        match self {
            AttributeSummary::Numeric { min, max } => max - min,
            AttributeSummary::Categorical { .. } => panic!("range of a categorical attribute"),
        }
    }

    /// Number of distinct values for categorical attributes.
    pub fn cardinality(&self) -> usize {
        match self {
            AttributeSummary::Categorical { values } => values.len(),
            AttributeSummary::Numeric { .. } => panic!("cardinality of a numeric attribute"),
        }
    }
}

/// Sorted distinct values actually present in a dataset's own records, per
/// attribute. Unlike [`AttributeSummary`], these never come from a parent
/// dataset: generalization moves and combination spaces snap to the values of
/// the split they run against.
#[derive(Debug, Clone, PartialEq)]
pub enum PresentValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl PresentValues {
    pub fn numeric(&self) -> &[f64] {
        match self {
            PresentValues::Numeric(v) => v,
            PresentValues::Categorical(_) => panic!("numeric values of a categorical attribute"),
        }
    }

    pub fn categorical(&self) -> &[String] {
        match self {
            PresentValues::Categorical(v) => v,
            PresentValues::Numeric(_) => panic!("categorical values of a numeric attribute"),
        }
    }
}

/// An immutable, schema-typed collection of records.
///
/// Summaries travel with the dataset: a split half keeps the parent's
/// summaries so that normalization denominators stay those of the dataset the
/// adversary is assumed to see, while `present` values are always recomputed
/// from the half's own records.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<Schema>,
    records: Vec<Record>,
    summaries: Vec<AttributeSummary>,
    present: Vec<PresentValues>,
    /// Rows rejected at load time because of missing values.
    skipped_rows: usize,
}

impl Dataset {
    /// Loads the CSV named by the config. The header must contain every
    /// schema attribute (order-insensitive); identifier columns may be
    /// omitted since they are dropped anyway; unknown columns are an error.
    /// Rows with empty fields are skipped and counted; unparseable values
    /// abort the load with the offending 1-based data row.
    pub fn load(config: &DatasetConfig) -> Result<Self> {
        let schema = Arc::new(Schema::from_config(config));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&config.csv_path)?;

        let headers = reader.headers()?.clone();
        let mut column_of = vec![None; schema.attributes.len()];
        let mut claimed = vec![false; headers.len()];
        for (i, attr) in schema.attributes.iter().enumerate() {
            match headers.iter().position(|h| h == attr.name) {
                Some(c) => {
                    column_of[i] = Some(c);
                    claimed[c] = true;
                }
                None => {
                    return Err(Error::SchemaMismatch(format!(
                        "column '{}' missing from CSV header",
                        attr.name
                    )))
                }
            }
        }
        for (c, header) in headers.iter().enumerate() {
            if claimed[c] {
                continue;
            }
            let is_identifier = config
                .attributes
                .iter()
                .any(|a| a.role == AttributeRole::Identifier && a.name == header);
            if !is_identifier {
                return Err(Error::SchemaMismatch(format!(
                    "CSV column '{header}' is not declared in the schema"
                )));
            }
        }

        let mut records = Vec::new();
        let mut skipped_rows = 0usize;
        for (row_index, row) in reader.records().enumerate() {
            let row = row?;
            let data_row = row_index + 1;
            let mut values = Vec::with_capacity(schema.attributes.len());
            let mut missing = false;
            for (i, attr) in schema.attributes.iter().enumerate() {
                let column = column_of[i].expect("every stored attribute is mapped");
                let field = row.get(column).unwrap_or("");
                if field.is_empty() {
                    missing = true;
                    break;
                }
                match attr.kind {
                    AttributeKind::Numeric => {
                        let parsed: f64 = field.parse().map_err(|_| Error::ParseValue {
                            row: data_row,
                            attribute: attr.name.clone(),
                            reason: format!("'{field}' is not a number"),
                        })?;
                        if !parsed.is_finite() {
                            return Err(Error::ParseValue {
                                row: data_row,
                                attribute: attr.name.clone(),
                                reason: format!("'{field}' is not finite"),
                            });
                        }
                        values.push(Value::Number(parsed));
                    }
                    AttributeKind::Categorical => values.push(Value::Label(field.to_string())),
                }
            }
            if missing {
                skipped_rows += 1;
                continue;
            }
            records.push(Record {
                row_id: records.len(),
                values,
            });
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let summaries = compute_summaries(&schema, &records);
        let present = compute_present(&schema, &records);
        Ok(Dataset {
            schema,
            records,
            summaries,
            present,
            skipped_rows,
        })
    }

    /// Builds a dataset from in-memory records, recomputing summaries.
    /// Records are renumbered 0..n in the given order.
    pub fn from_records(schema: Arc<Schema>, rows: Vec<Vec<Value>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut records = Vec::with_capacity(rows.len());
        for (row_id, values) in rows.into_iter().enumerate() {
            if values.len() != schema.attributes.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {row_id} has {} values, schema has {} attributes",
                    values.len(),
                    schema.attributes.len()
                )));
            }
            for (i, attr) in schema.attributes.iter().enumerate() {
                let ok = match attr.kind {
                    AttributeKind::Numeric => matches!(values[i], Value::Number(_)),
                    AttributeKind::Categorical => matches!(values[i], Value::Label(_)),
                };
                if !ok {
                    return Err(Error::SchemaMismatch(format!(
                        "row {row_id}, attribute '{}': value kind does not match schema",
                        attr.name
                    )));
                }
            }
            records.push(Record { row_id, values });
        }
        let summaries = compute_summaries(&schema, &records);
        let present = compute_present(&schema, &records);
        Ok(Dataset {
            schema,
            records,
            summaries,
            present,
            skipped_rows: 0,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skipped_rows(&self) -> usize {
        self.skipped_rows
    }

    pub fn summary(&self, attribute: usize) -> &AttributeSummary {
        &self.summaries[attribute]
    }

    pub fn summaries(&self) -> &[AttributeSummary] {
        &self.summaries
    }

    /// Sorted distinct values present in this dataset's own records.
    pub fn present(&self, attribute: usize) -> &PresentValues {
        &self.present[attribute]
    }

    /// Splits into disjoint train and test halves with |train| =
    /// round(fraction * n). Both halves keep this dataset's summaries; their
    /// records keep their row_ids and are ordered by row_id.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::FractionOutOfRange(fraction));
        }
        let n = self.records.len();
        let n_train = (fraction * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Config(format!(
                "split of {n} rows at fraction {fraction} leaves an empty half"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut train_ids: Vec<usize> = order[..n_train].to_vec();
        let mut test_ids: Vec<usize> = order[n_train..].to_vec();
        train_ids.sort_unstable();
        test_ids.sort_unstable();
        let half = |ids: &[usize]| -> Dataset {
            let records: Vec<Record> = ids.iter().map(|&i| self.records[i].clone()).collect();
            let present = compute_present(&self.schema, &records);
            Dataset {
                schema: Arc::clone(&self.schema),
                records,
                summaries: self.summaries.clone(),
                present,
                skipped_rows: 0,
            }
        };
        Ok((half(&train_ids), half(&test_ids)))
    }

    /// Writes the stored attributes back to CSV (identifiers are gone, so
    /// they do not reappear). Reloading with the same config yields
    /// value-identical records.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(self.schema.attributes.iter().map(|a| a.name.as_str()))?;
        for record in &self.records {
            writer.write_record(record.values.iter().map(|v| v.render()))?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn compute_summaries(schema: &Schema, records: &[Record]) -> Vec<AttributeSummary> {
    schema
        .attributes
        .iter()
        .enumerate()
        .map(|(i, attr)| match attr.kind {
            AttributeKind::Numeric => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for r in records {
                    let x = r.number(i);
                    min = min.min(x);
                    max = max.max(x);
                }
                AttributeSummary::Numeric { min, max }
            }
            AttributeKind::Categorical => {
                let values = records.iter().map(|r| r.label(i).to_string()).collect();
                AttributeSummary::Categorical { values }
            }
        })
        .collect()
}

fn compute_present(schema: &Schema, records: &[Record]) -> Vec<PresentValues> {
    schema
        .attributes
        .iter()
        .enumerate()
        .map(|(i, attr)| match attr.kind {
            AttributeKind::Numeric => {
                let mut values: Vec<f64> = records.iter().map(|r| r.number(i)).collect();
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                values.dedup();
                PresentValues::Numeric(values)
            }
            AttributeKind::Categorical => {
                let set: BTreeSet<String> =
                    records.iter().map(|r| r.label(i).to_string()).collect();
                PresentValues::Categorical(set.into_iter().collect())
            }
        })
        .collect()
}
