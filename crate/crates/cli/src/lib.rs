//! Experiment harness for k-anonymous counterfactual explanations: the
//! pipeline driving [`cfk_core`], CSV report emission, and the linkage-attack
//! demonstration behind the `cfk` binary.

pub mod attack;
pub mod pipeline;
pub mod report;

pub use attack::{linkage_attack, AttackOutcome};
pub use pipeline::{run_pipeline, ExperimentConfig, PipelineOutput};
pub use report::{Method, ReportRow};
