//! k-anonymous counterfactual explanations for tabular classifiers.
//!
//! Instance-based counterfactual explanations point at a real training row,
//! so releasing one lets an adversary with public quasi-identifier knowledge
//! re-identify that row and read its private attributes. This crate
//! generalizes the quasi-identifiers of the counterfactual instance until its
//! QID combination matches at least `k` training rows, and scores the result:
//!
//! * [`cfk`] — the CF-K anonymizer, a GRASP-style multi-start search
//!   (randomized greedy merge construction + best-improvement local search),
//! * [`metrics`] — NCP information loss and pureness (counterfactual
//!   validity) with an exact enumerator and a seeded sampling estimator,
//! * [`mondrian`] — a whole-dataset Mondrian baseline for comparison,
//! * [`predictor`] — a self-contained CART random forest with grid-tuned
//!   cross-validation, behind the minimal [`Classifier`] trait,
//! * [`neighbors`] — mixed-type distance and nearest-unlike-neighbor search,
//! * [`schema`] / [`dataset`] — attribute roles (quasi-identifier, private,
//!   target), CSV ingestion and the seeded train/test split.
//!
//! [`fixtures`] bundles a ten-row credit-scoring demo set, [`synthetic`]
//! generates larger seeded datasets for experiments and tests.

pub mod cfk;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod generalization;
pub mod metrics;
pub mod mondrian;
pub mod neighbors;
pub mod predictor;
pub mod schema;
pub mod seed;
pub mod synthetic;

pub use cfk::{Anonymizer, CfkParams, CfkSolution, ObjectiveMode};
pub use dataset::{Dataset, Record, Value};
pub use error::{Error, Result};
pub use generalization::{GeneralizedInstance, GeneralizedValue};
pub use metrics::{MetricReport, NcpWeights, PurenessEstimate};
pub use mondrian::AnonymizedDataset;
pub use neighbors::{AttributeMask, CounterfactualResult, DistanceMetric, PredictionCache};
pub use predictor::{Classifier, TableModel, TreeEnsembleModel, TuningGrid};
pub use schema::{AttributeKind, AttributeRole, AttributeSchema, DatasetConfig, Group, Schema};
