//! Generalized instances: a counterfactual whose quasi-identifiers are
//! widened to intervals (numeric) or value sets (categorical).
//!
//! A generalized instance stays grounded in its base record, the real
//! training row it explains with: every quasi-identifier generalization
//! covers the base value, and non-quasi-identifier attributes keep the base's
//! concrete values. The rows whose quasi-identifiers fall inside the
//! generalization form its anonymity set; their count is the k-degree.

use std::collections::BTreeSet;

use crate::dataset::{render_number, Dataset, Record, Value};
use crate::error::{Error, Result};
use crate::schema::{AttributeKind, Schema};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneralizedValue {
    /// Closed numeric interval in attribute units, lo <= hi.
    Interval { lo: f64, hi: f64 },
    /// Nonempty set of categorical labels.
    ValueSet(BTreeSet<String>),
}

impl GeneralizedValue {
    pub fn point(value: &Value) -> Self {
        match value {
            Value::Number(x) => GeneralizedValue::Interval { lo: *x, hi: *x },
            Value::Label(l) => {
                let mut set = BTreeSet::new();
                set.insert(l.clone());
                GeneralizedValue::ValueSet(set)
            }
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order");
        GeneralizedValue::Interval { lo, hi }
    }

    pub fn value_set<I: IntoIterator<Item = S>, S: Into<String>>(labels: I) -> Self {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        assert!(!set.is_empty(), "empty value set");
        GeneralizedValue::ValueSet(set)
    }

    pub fn covers(&self, value: &Value) -> bool {
        match (self, value) {
            (GeneralizedValue::Interval { lo, hi }, Value::Number(x)) => lo <= x && x <= hi,
            (GeneralizedValue::ValueSet(set), Value::Label(l)) => set.contains(l),
            _ => false,
        }
    }

    /// True for the ungeneralized case (a single value).
    pub fn is_singleton(&self) -> bool {
        match self {
            GeneralizedValue::Interval { lo, hi } => lo == hi,
            GeneralizedValue::ValueSet(set) => set.len() == 1,
        }
    }

    /// Report rendering: singletons print bare ("24", "F"), intervals as
    /// "lo-hi", multi-value sets as "{a|b}".
    pub fn render(&self) -> String {
        match self {
            GeneralizedValue::Interval { lo, hi } => {
                if lo == hi {
                    render_number(*lo)
                } else {
                    format!("{}-{}", render_number(*lo), render_number(*hi))
                }
            }
            GeneralizedValue::ValueSet(set) => {
                if set.len() == 1 {
                    set.iter().next().unwrap().clone()
                } else {
                    let labels: Vec<&str> = set.iter().map(String::as_str).collect();
                    format!("{{{}}}", labels.join("|"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedInstance {
    /// The native counterfactual this explanation is grounded in. Its
    /// non-quasi-identifier values are the instance's fixed values.
    pub base: Record,
    /// One generalization per quasi-identifier, in `schema.qid_indices`
    /// order.
    pub qid_values: Vec<GeneralizedValue>,
}

impl GeneralizedInstance {
    /// The fully singleton instance of a record.
    pub fn ungeneralized(schema: &Schema, base: Record) -> Self {
        let qid_values = schema
            .qid_indices
            .iter()
            .map(|&i| GeneralizedValue::point(&base.values[i]))
            .collect();
        GeneralizedInstance { base, qid_values }
    }

    /// Builds an instance from explicit generalizations, enforcing kind
    /// agreement and base coverage.
    pub fn from_parts(
        schema: &Schema,
        base: Record,
        qid_values: Vec<GeneralizedValue>,
    ) -> Result<Self> {
        if qid_values.len() != schema.qid_indices.len() {
            return Err(Error::Config(format!(
                "expected {} quasi-identifier generalizations, got {}",
                schema.qid_indices.len(),
                qid_values.len()
            )));
        }
        for (p, &i) in schema.qid_indices.iter().enumerate() {
            let attr = &schema.attributes[i];
            let kind_ok = match (&qid_values[p], attr.kind) {
                (GeneralizedValue::Interval { .. }, AttributeKind::Numeric) => true,
                (GeneralizedValue::ValueSet(_), AttributeKind::Categorical) => true,
                _ => false,
            };
            if !kind_ok {
                return Err(Error::Config(format!(
                    "generalization kind does not match attribute '{}'",
                    attr.name
                )));
            }
            if !qid_values[p].covers(&base.values[i]) {
                return Err(Error::Config(format!(
                    "generalization of '{}' does not cover the base value",
                    attr.name
                )));
            }
        }
        Ok(GeneralizedInstance { base, qid_values })
    }

    /// The generalization in effect for a stored attribute: the widened
    /// quasi-identifier, or the base's fixed value for everything else.
    pub fn value_of(&self, schema: &Schema, attribute: usize) -> GeneralizedValue {
        match schema.qid_indices.iter().position(|&i| i == attribute) {
            Some(p) => self.qid_values[p].clone(),
            None => GeneralizedValue::point(&self.base.values[attribute]),
        }
    }

    /// True iff the record's quasi-identifier values all fall inside this
    /// instance's generalizations. Other attributes are ignored: linkage is
    /// about public knowledge only.
    pub fn covers(&self, schema: &Schema, record: &Record) -> bool {
        schema
            .qid_indices
            .iter()
            .zip(&self.qid_values)
            .all(|(&i, g)| g.covers(&record.values[i]))
    }

    /// The size of the anonymity set: how many training rows this
    /// explanation links to.
    pub fn k_degree(&self, train: &Dataset) -> usize {
        train
            .records()
            .iter()
            .filter(|r| self.covers(train.schema(), r))
            .count()
    }

    /// Widens each quasi-identifier just enough to cover `record`.
    pub fn merge(&self, schema: &Schema, record: &Record) -> Self {
        let qid_values = schema
            .qid_indices
            .iter()
            .zip(&self.qid_values)
            .map(|(&i, g)| match (g, &record.values[i]) {
                (GeneralizedValue::Interval { lo, hi }, Value::Number(x)) => {
                    GeneralizedValue::Interval {
                        lo: lo.min(*x),
                        hi: hi.max(*x),
                    }
                }
                (GeneralizedValue::ValueSet(set), Value::Label(l)) => {
                    let mut set = set.clone();
                    set.insert(l.clone());
                    GeneralizedValue::ValueSet(set)
                }
                _ => panic!("record value kind does not match schema"),
            })
            .collect();
        GeneralizedInstance {
            base: self.base.clone(),
            qid_values,
        }
    }

    /// The one-step local-search neighborhood. Numeric intervals may extend
    /// either endpoint to the adjacent distinct value present in `train`, or
    /// (when non-singleton) shrink an endpoint to the adjacent covered
    /// value; shrinking never passes the base value. Categorical singletons
    /// may add any one label present in `train`; non-singleton sets may drop
    /// any one label except the base's. Every move still covers the base.
    pub fn moves(&self, train: &Dataset) -> Vec<GeneralizedInstance> {
        let schema = train.schema();
        let mut out = Vec::new();
        let mut push = |p: usize, value: GeneralizedValue| {
            let mut qid_values = self.qid_values.clone();
            qid_values[p] = value;
            out.push(GeneralizedInstance {
                base: self.base.clone(),
                qid_values,
            });
        };
        for (p, &i) in schema.qid_indices.iter().enumerate() {
            match &self.qid_values[p] {
                GeneralizedValue::Interval { lo, hi } => {
                    let values = train.present(i).numeric();
                    let base = self.base.number(i);
                    // Extend lo down / hi up to the adjacent distinct value.
                    if let Some(&below) = values.iter().rev().find(|&&v| v < *lo) {
                        push(p, GeneralizedValue::Interval { lo: below, hi: *hi });
                    }
                    if let Some(&above) = values.iter().find(|&&v| v > *hi) {
                        push(p, GeneralizedValue::Interval { lo: *lo, hi: above });
                    }
                    if lo < hi {
                        // Shrink lo up / hi down to the adjacent covered
                        // value, but never past the base.
                        if let Some(&up) = values.iter().find(|&&v| v > *lo && v <= *hi) {
                            if up <= base {
                                push(p, GeneralizedValue::Interval { lo: up, hi: *hi });
                            }
                        }
                        if let Some(&down) = values.iter().rev().find(|&&v| v < *hi && v >= *lo) {
                            if down >= base {
                                push(p, GeneralizedValue::Interval { lo: *lo, hi: down });
                            }
                        }
                    }
                }
                GeneralizedValue::ValueSet(set) => {
                    let base = self.base.label(i);
                    if set.len() == 1 {
                        for label in train.present(i).categorical() {
                            if !set.contains(label) {
                                let mut grown = set.clone();
                                grown.insert(label.clone());
                                push(p, GeneralizedValue::ValueSet(grown));
                            }
                        }
                    } else {
                        for label in set {
                            if label != base {
                                let mut shrunk = set.clone();
                                shrunk.remove(label);
                                push(p, GeneralizedValue::ValueSet(shrunk));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Report rendering, e.g. "(24-27, F, Antwerp)".
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.qid_values.iter().map(GeneralizedValue::render).collect();
        format!("({})", parts.join(", "))
    }

    /// Canonical byte encoding of the generalization state, for deriving
    /// per-state RNG seeds.
    pub fn seed_material(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(self.base.row_id as u64).to_le_bytes());
        for g in &self.qid_values {
            match g {
                GeneralizedValue::Interval { lo, hi } => {
                    bytes.push(b'I');
                    bytes.extend_from_slice(&lo.to_bits().to_le_bytes());
                    bytes.extend_from_slice(&hi.to_bits().to_le_bytes());
                }
                GeneralizedValue::ValueSet(set) => {
                    bytes.push(b'S');
                    for label in set {
                        bytes.extend_from_slice(label.as_bytes());
                        bytes.push(0x1f);
                    }
                }
            }
            bytes.push(0x1e);
        }
        bytes
    }
}
