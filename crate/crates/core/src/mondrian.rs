//! Whole-dataset Mondrian k-anonymization, the baseline CF-K is compared
//! against.
//!
//! Mondrian partitions the dataset top-down: at each step it picks the
//! quasi-identifier with the widest normalized span, splits the rows at the
//! median (numeric, relaxed: tied rows may land on either side to balance
//! the halves) or into two halves of the sorted label list (categorical),
//! and recurses while both halves keep at least k rows. Each final partition
//! is summarized by per-quasi-identifier coverage, and a baseline
//! explanation is the partition summary of the factual's nearest
//! desired-outcome row.

use std::collections::HashMap;
use std::path::Path;

use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::generalization::{GeneralizedInstance, GeneralizedValue};
use crate::neighbors::{DistanceMetric, PredictionCache};
use crate::schema::AttributeKind;

/// An equivalence class of the anonymized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Sorted row_ids of the members.
    pub member_row_ids: Vec<usize>,
    /// Coverage summary per quasi-identifier, in `qid_indices` order.
    pub summaries: Vec<GeneralizedValue>,
}

/// A dataset plus its Mondrian partitioning.
#[derive(Debug, Clone)]
pub struct AnonymizedDataset {
    partitions: Vec<Partition>,
    source: Dataset,
    k: usize,
    partition_of: HashMap<usize, usize>,
}

impl AnonymizedDataset {
    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn source(&self) -> &Dataset {
        &self.source
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The partition containing a source row.
    pub fn partition_of(&self, row_id: usize) -> &Partition {
        &self.partitions[self.partition_of[&row_id]]
    }

    /// Writes the anonymized view: quasi-identifier columns carry their
    /// partition summaries, everything else keeps original values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let schema = self.source.schema();
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(schema.attributes.iter().map(|a| a.name.as_str()))?;
        for record in self.source.records() {
            let partition = self.partition_of(record.row_id);
            let fields: Vec<String> = (0..schema.attributes.len())
                .map(|i| match schema.qid_indices.iter().position(|&q| q == i) {
                    Some(p) => partition.summaries[p].render(),
                    None => record.values[i].render(),
                })
                .collect();
            writer.write_record(&fields)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Partitions `data` into equivalence classes of at least k rows each.
pub fn mondrian(data: &Dataset, k: usize) -> Result<AnonymizedDataset> {
    assert!(k >= 1);
    if data.len() < k {
        return Err(Error::PartitionTooSmall {
            size: data.len(),
            k,
        });
    }
    let mut partitions = Vec::new();
    let all: Vec<usize> = (0..data.len()).collect();
    partition_recursive(data, k, all, &mut partitions);
    let mut partition_of = HashMap::new();
    for (p, partition) in partitions.iter().enumerate() {
        for &row_id in &partition.member_row_ids {
            partition_of.insert(row_id, p);
        }
    }
    Ok(AnonymizedDataset {
        partitions,
        source: data.clone(),
        k,
        partition_of,
    })
}

/// Candidate split axes in descending normalized width; only axes that can
/// conceivably split (numeric spread, or at least two labels) qualify.
fn ranked_axes(data: &Dataset, members: &[usize]) -> Vec<usize> {
    let schema = data.schema();
    let mut widths: Vec<(f64, usize)> = Vec::new();
    for (p, &i) in schema.qid_indices.iter().enumerate() {
        match schema.attributes[i].kind {
            AttributeKind::Numeric => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &m in members {
                    let x = data.records()[m].number(i);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                let range = data.summary(i).range();
                if hi > lo && range > 0.0 {
                    widths.push(((hi - lo) / range, p));
                }
            }
            AttributeKind::Categorical => {
                let distinct: std::collections::BTreeSet<&str> = members
                    .iter()
                    .map(|&m| data.records()[m].label(i))
                    .collect();
                if distinct.len() >= 2 {
                    widths.push((
                        distinct.len() as f64 / data.summary(i).cardinality() as f64,
                        p,
                    ));
                }
            }
        }
    }
    // Descending width; ties keep schema order (stable sort on equal keys).
    widths.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite widths"));
    widths.into_iter().map(|(_, p)| p).collect()
}

fn partition_recursive(data: &Dataset, k: usize, members: Vec<usize>, out: &mut Vec<Partition>) {
    let schema = data.schema();
    for p in ranked_axes(data, &members) {
        let i = schema.qid_indices[p];
        let split = match schema.attributes[i].kind {
            AttributeKind::Numeric => {
                // Relaxed median cut: order by (value, row_id) and cut the
                // sequence in half, so median ties spread across both
                // children.
                let mut ordered = members.clone();
                ordered.sort_by(|&a, &b| {
                    let (ra, rb) = (&data.records()[a], &data.records()[b]);
                    ra.number(i)
                        .partial_cmp(&rb.number(i))
                        .expect("finite values")
                        .then(ra.row_id.cmp(&rb.row_id))
                });
                let cut = ordered.len() / 2;
                let right = ordered.split_off(cut);
                Some((ordered, right))
            }
            AttributeKind::Categorical => {
                let distinct: Vec<&str> = {
                    let set: std::collections::BTreeSet<&str> = members
                        .iter()
                        .map(|&m| data.records()[m].label(i))
                        .collect();
                    set.into_iter().collect()
                };
                let left_labels: std::collections::BTreeSet<&str> =
                    distinct[..distinct.len() / 2].iter().copied().collect();
                let (left, right): (Vec<usize>, Vec<usize>) = members
                    .iter()
                    .partition(|&&m| left_labels.contains(data.records()[m].label(i)));
                Some((left, right))
            }
        };
        if let Some((left, right)) = split {
            if left.len() >= k && right.len() >= k {
                partition_recursive(data, k, left, out);
                partition_recursive(data, k, right, out);
                return;
            }
        }
    }
    out.push(summarize(data, members));
}

fn summarize(data: &Dataset, members: Vec<usize>) -> Partition {
    let schema = data.schema();
    let summaries = schema
        .qid_indices
        .iter()
        .map(|&i| match schema.attributes[i].kind {
            AttributeKind::Numeric => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &m in &members {
                    let x = data.records()[m].number(i);
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                GeneralizedValue::Interval { lo, hi }
            }
            AttributeKind::Categorical => GeneralizedValue::ValueSet(
                members
                    .iter()
                    .map(|&m| data.records()[m].label(i).to_string())
                    .collect(),
            ),
        })
        .collect();
    let mut member_row_ids: Vec<usize> =
        members.iter().map(|&m| data.records()[m].row_id).collect();
    member_row_ids.sort_unstable();
    Partition {
        member_row_ids,
        summaries,
    }
}

/// The baseline k-anonymous explanation: select the nearest desired-outcome
/// row by original values (full predictor metric, row_id tie-break), then
/// release its partition's summaries.
pub fn baseline_explanation(
    factual: &Record,
    anonymized: &AnonymizedDataset,
    cache: &PredictionCache,
    metric: &DistanceMetric,
    desired: &str,
) -> Result<GeneralizedInstance> {
    let source = anonymized.source();
    debug_assert!(std::ptr::eq(cache.train(), source) || cache.train().len() == source.len());
    let mut best: Option<(f64, &Record)> = None;
    for (position, record) in source.records().iter().enumerate() {
        if cache.predicted(position) != desired {
            continue;
        }
        let d = metric.distance(factual, record);
        let closer = match &best {
            None => true,
            Some((bd, br)) => d < *bd || (d == *bd && record.row_id < br.row_id),
        };
        if closer {
            best = Some((d, record));
        }
    }
    let (_, selected) = best.ok_or_else(|| Error::NoCandidates {
        desired: desired.to_string(),
    })?;
    let partition = anonymized.partition_of(selected.row_id);
    GeneralizedInstance::from_parts(
        source.schema(),
        selected.clone(),
        partition.summaries.clone(),
    )
}
