//! Attribute schema and dataset configuration.
//!
//! Attribute roles drive everything downstream: identifiers are dropped at
//! ingestion, quasi-identifiers are the attributes an adversary is assumed to
//! know (and the only ones ever generalized), private attributes are what a
//! linkage attack would disclose, and the single target attribute carries the
//! class label. Roles are a modeling choice per dataset, so they live in a
//! TOML config file next to the CSV rather than being inferred from data.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::predictor::TuningGrid;

/// Weights over quasi-identifiers must sum to 1 within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeRole {
    /// Directly identifying (a name, an SSN); dropped at ingestion.
    Identifier,
    /// Publicly knowable; the linkage surface, and the only generalized part.
    QuasiIdentifier,
    /// What the adversary wants to learn.
    Private,
    /// The class label the model predicts.
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    pub role: AttributeRole,
    /// Information-loss weight; only meaningful on quasi-identifiers.
    pub weight: Option<f64>,
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, kind: AttributeKind, role: AttributeRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
            weight: None,
        }
    }

    pub fn numeric(name: impl Into<String>, role: AttributeRole) -> Self {
        Self::new(name, AttributeKind::Numeric, role)
    }

    pub fn categorical(name: impl Into<String>, role: AttributeRole) -> Self {
        Self::new(name, AttributeKind::Categorical, role)
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = Some(weight);
        self
    }
}

/// Membership in the fairness analysis groups, decided by the sensitive
/// attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Minority,
    Majority,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::Minority => write!(f, "Minority"),
            Group::Majority => write!(f, "Majority"),
        }
    }
}

/// Validated dataset configuration: attribute roles plus the experiment-level
/// designations (sensitive attribute, favorable outcome, split policy).
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub csv_path: PathBuf,
    /// All attributes in CSV-schema order, identifiers included.
    pub attributes: Vec<AttributeSchema>,
    /// Name of the categorical attribute that defines minority membership.
    pub sensitive_attribute: String,
    /// Value of the sensitive attribute marking the minority group.
    pub minority_value: String,
    /// Favorable target value counterfactuals should reach, when configured.
    pub desired_outcome: Option<String>,
    pub split_fraction: f64,
    pub split_seed: u64,
    /// Optional model-tuning override; the trainer falls back to
    /// [`TuningGrid::default`] when absent.
    pub tuning: Option<TuningGrid>,
}

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.6;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    csv_path: String,
    sensitive_attribute: String,
    minority_value: String,
    desired_outcome: Option<String>,
    split_fraction: Option<f64>,
    split_seed: Option<u64>,
    #[serde(rename = "attribute")]
    attributes: Vec<RawAttribute>,
    tuning: Option<RawTuning>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttribute {
    name: String,
    kind: String,
    role: String,
    weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTuning {
    n_estimators: Option<Vec<usize>>,
    /// 0 stands for "unbounded leaves".
    max_leaf_nodes: Option<Vec<usize>>,
    cv_folds: Option<usize>,
    tuning_seed: Option<u64>,
}

impl DatasetConfig {
    /// Parses and validates a TOML config. `base_dir` anchors a relative
    /// `csv_path`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("toml parse: {e}")))?;
        let mut attributes = Vec::with_capacity(raw.attributes.len());
        for a in &raw.attributes {
            let kind = match a.kind.as_str() {
                "numeric" => AttributeKind::Numeric,
                "categorical" => AttributeKind::Categorical,
                other => {
                    return Err(Error::Config(format!(
                        "attribute '{}': unknown kind '{other}' (expected 'numeric' or 'categorical')",
                        a.name
                    )))
                }
            };
            let role = match a.role.as_str() {
                "identifier" => AttributeRole::Identifier,
                "quasi" => AttributeRole::QuasiIdentifier,
                "private" => AttributeRole::Private,
                "target" => AttributeRole::Target,
                other => {
                    return Err(Error::Config(format!(
                        "attribute '{}': unknown role '{other}' (expected 'identifier', 'quasi', 'private' or 'target')",
                        a.name
                    )))
                }
            };
            attributes.push(AttributeSchema {
                name: a.name.clone(),
                kind,
                role,
                weight: a.weight,
            });
        }
        let tuning = match raw.tuning {
            None => None,
            Some(t) => {
                let default = TuningGrid::default();
                Some(TuningGrid {
                    n_estimators_options: t.n_estimators.unwrap_or(default.n_estimators_options),
                    max_leaf_nodes_options: t
                        .max_leaf_nodes
                        .map(|opts| {
                            opts.into_iter()
                                .map(|m| if m == 0 { None } else { Some(m) })
                                .collect()
                        })
                        .unwrap_or(default.max_leaf_nodes_options),
                    cv_folds: t.cv_folds.unwrap_or(default.cv_folds),
                    tuning_seed: t.tuning_seed.unwrap_or(default.tuning_seed),
                })
            }
        };
        let config = DatasetConfig {
            csv_path: {
                let p = PathBuf::from(&raw.csv_path);
                if p.is_absolute() {
                    p
                } else {
                    base_dir.join(p)
                }
            },
            attributes,
            sensitive_attribute: raw.sensitive_attribute,
            minority_value: raw.minority_value,
            desired_outcome: raw.desired_outcome,
            split_fraction: raw.split_fraction.unwrap_or(DEFAULT_SPLIT_FRACTION),
            split_seed: raw.split_seed.unwrap_or(0),
            tuning,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base_dir)
    }

    /// Checks the structural invariants; programmatically built configs
    /// should call this before use.
    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::Config("no attributes declared".into()));
        }
        let mut names = BTreeSet::new();
        for a in &self.attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Config(format!("duplicate attribute name '{}'", a.name)));
            }
        }
        let targets: Vec<_> = self
            .attributes
            .iter()
            .filter(|a| a.role == AttributeRole::Target)
            .collect();
        if targets.len() != 1 {
            return Err(Error::Config(format!(
                "expected exactly one target attribute, found {}",
                targets.len()
            )));
        }
        if targets[0].kind != AttributeKind::Categorical {
            return Err(Error::Config(format!(
                "target attribute '{}' must be categorical",
                targets[0].name
            )));
        }
        let qids: Vec<_> = self
            .attributes
            .iter()
            .filter(|a| a.role == AttributeRole::QuasiIdentifier)
            .collect();
        if qids.is_empty() {
            return Err(Error::Config("at least one quasi-identifier is required".into()));
        }
        for a in &self.attributes {
            if a.weight.is_some() && a.role != AttributeRole::QuasiIdentifier {
                return Err(Error::Config(format!(
                    "attribute '{}' has a weight but is not a quasi-identifier",
                    a.name
                )));
            }
        }
        let weighted = qids.iter().filter(|a| a.weight.is_some()).count();
        if weighted != 0 {
            if weighted != qids.len() {
                return Err(Error::Config(
                    "either all quasi-identifiers carry a weight or none do".into(),
                ));
            }
            let mut sum = 0.0;
            for a in &qids {
                let w = a.weight.unwrap();
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Config(format!(
                        "weight of '{}' is {w}, outside [0, 1]",
                        a.name
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::Config(format!(
                    "quasi-identifier weights sum to {sum}, expected 1"
                )));
            }
        }
        let sensitive = self
            .attributes
            .iter()
            .find(|a| a.name == self.sensitive_attribute)
            .ok_or_else(|| {
                Error::Config(format!(
                    "sensitive_attribute '{}' is not a declared attribute",
                    self.sensitive_attribute
                ))
            })?;
        if sensitive.role == AttributeRole::Identifier {
            return Err(Error::Config(format!(
                "sensitive_attribute '{}' is an identifier, which is dropped at ingestion",
                self.sensitive_attribute
            )));
        }
        if sensitive.kind != AttributeKind::Categorical {
            return Err(Error::Config(format!(
                "sensitive_attribute '{}' must be categorical",
                self.sensitive_attribute
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::FractionOutOfRange(self.split_fraction));
        }
        if let Some(t) = &self.tuning {
            t.validate()?;
        }
        Ok(())
    }
}

/// The stored-attribute view a loaded dataset works with: identifier columns
/// are gone and the remaining attributes keep their config order.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub attributes: Vec<AttributeSchema>,
    /// Indices into `attributes` of the quasi-identifiers, ascending.
    pub qid_indices: Vec<usize>,
    /// All non-target attributes (model inputs), ascending.
    pub predictor_indices: Vec<usize>,
    pub private_indices: Vec<usize>,
    pub target_index: usize,
    pub sensitive_index: usize,
    pub minority_value: String,
    pub desired_outcome: Option<String>,
}

impl Schema {
    /// Derives the stored-attribute schema from a validated config.
    pub fn from_config(config: &DatasetConfig) -> Self {
        let attributes: Vec<AttributeSchema> = config
            .attributes
            .iter()
            .filter(|a| a.role != AttributeRole::Identifier)
            .cloned()
            .collect();
        let idx = |pred: &dyn Fn(&AttributeSchema) -> bool| -> Vec<usize> {
            attributes
                .iter()
                .enumerate()
                .filter(|(_, a)| pred(a))
                .map(|(i, _)| i)
                .collect()
        };
        let qid_indices = idx(&|a| a.role == AttributeRole::QuasiIdentifier);
        let predictor_indices = idx(&|a| a.role != AttributeRole::Target);
        let private_indices = idx(&|a| a.role == AttributeRole::Private);
        let target_index = attributes
            .iter()
            .position(|a| a.role == AttributeRole::Target)
            .expect("validated config has a target");
        let sensitive_index = attributes
            .iter()
            .position(|a| a.name == config.sensitive_attribute)
            .expect("validated config has a stored sensitive attribute");
        Schema {
            attributes,
            qid_indices,
            predictor_indices,
            private_indices,
            target_index,
            sensitive_index,
            minority_value: config.minority_value.clone(),
            desired_outcome: config.desired_outcome.clone(),
        }
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn group_of(&self, record: &Record) -> Group {
        if record.label(self.sensitive_index) == self.minority_value {
            Group::Minority
        } else {
            Group::Majority
        }
    }

    /// Per-quasi-identifier information-loss weights, aligned with
    /// `qid_indices`. Defaults to equal weights when the config sets none.
    pub fn ncp_weights(&self) -> Vec<f64> {
        let d = self.qid_indices.len();
        if self.qid_indices.iter().all(|&i| self.attributes[i].weight.is_some()) {
            self.qid_indices
                .iter()
                .map(|&i| self.attributes[i].weight.unwrap())
                .collect()
        } else {
            vec![1.0 / d as f64; d]
        }
    }
}
