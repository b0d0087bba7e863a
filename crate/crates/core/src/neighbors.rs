//! Mixed-type distance and nearest-unlike-neighbor search.
//!
//! Distance is heterogeneous: numeric attributes contribute |a-b| normalized
//! by the training range, categorical attributes contribute 0/1 overlap.
//! The native counterfactual of a factual instance is its nearest training
//! row with a different predicted class; the anonymizer's candidate lists
//! reuse the same metric restricted to quasi-identifiers.

use crate::dataset::{AttributeSummary, Dataset, Record, Value};
use crate::error::{Error, Result};
use crate::generalization::{GeneralizedInstance, GeneralizedValue};
use crate::predictor::Classifier;

/// Which attributes a metric sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeMask {
    /// All model inputs: counterfactual search sees what the model sees.
    Predictors,
    /// Quasi-identifiers only: candidate search during anonymization cares
    /// about the linkage surface.
    QuasiIdentifiers,
}

/// Range-normalized heterogeneous distance. Normalization denominators come
/// from the summaries carried by the training dataset, so every numeric
/// contribution lies in [0,1] for training pairs; zero-range attributes
/// contribute 0.
#[derive(Debug, Clone)]
pub struct DistanceMetric {
    /// (attribute index, numeric range) pairs; `None` range marks a
    /// categorical attribute.
    attributes: Vec<(usize, Option<f64>)>,
}

impl DistanceMetric {
    pub fn new(train: &Dataset, mask: AttributeMask) -> Self {
        let schema = train.schema();
        let indices = match mask {
            AttributeMask::Predictors => &schema.predictor_indices,
            AttributeMask::QuasiIdentifiers => &schema.qid_indices,
        };
        let attributes = indices
            .iter()
            .map(|&i| match train.summary(i) {
                AttributeSummary::Numeric { .. } => (i, Some(train.summary(i).range())),
                AttributeSummary::Categorical { .. } => (i, None),
            })
            .collect();
        DistanceMetric { attributes }
    }

    pub fn distance(&self, a: &Record, b: &Record) -> f64 {
        self.distance_values(&a.values, &b.values)
    }

    pub fn distance_values(&self, a: &[Value], b: &[Value]) -> f64 {
        self.attributes
            .iter()
            .map(|&(i, range)| match range {
                Some(range) => {
                    let (x, y) = match (&a[i], &b[i]) {
                        (Value::Number(x), Value::Number(y)) => (*x, *y),
                        _ => panic!("numeric attribute holds a label"),
                    };
                    if range == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() / range
                    }
                }
                None => {
                    let (x, y) = match (&a[i], &b[i]) {
                        (Value::Label(x), Value::Label(y)) => (x, y),
                        _ => panic!("categorical attribute holds a number"),
                    };
                    if x == y {
                        0.0
                    } else {
                        1.0
                    }
                }
            })
            .sum()
    }

    /// Distance from a generalized instance to a concrete record: each
    /// generalized attribute contributes the distance to its nearest covered
    /// point, so a covered value costs 0.
    pub fn generalized_distance(
        &self,
        g: &GeneralizedInstance,
        schema: &crate::schema::Schema,
        record: &Record,
    ) -> f64 {
        self.attributes
            .iter()
            .map(|&(i, range)| {
                let generalized = g.value_of(schema, i);
                match (generalized, &record.values[i]) {
                    (GeneralizedValue::Interval { lo, hi }, Value::Number(x)) => {
                        let gap = if *x < lo {
                            lo - x
                        } else if *x > hi {
                            x - hi
                        } else {
                            0.0
                        };
                        let range = range.expect("interval on numeric attribute");
                        if range == 0.0 {
                            0.0
                        } else {
                            gap / range
                        }
                    }
                    (GeneralizedValue::ValueSet(set), Value::Label(l)) => {
                        if set.contains(l) {
                            0.0
                        } else {
                            1.0
                        }
                    }
                    _ => panic!("generalization kind does not match record value"),
                }
            })
            .sum()
    }
}

/// A training dataset with every row's model prediction precomputed.
pub struct PredictionCache<'a> {
    train: &'a Dataset,
    model: &'a dyn Classifier,
    predicted: Vec<String>,
}

impl<'a> PredictionCache<'a> {
    pub fn new(train: &'a Dataset, model: &'a dyn Classifier) -> Self {
        let predicted = train
            .records()
            .iter()
            .map(|r| model.predict(&r.values).to_string())
            .collect();
        PredictionCache {
            train,
            model,
            predicted,
        }
    }

    pub fn train(&self) -> &Dataset {
        self.train
    }

    pub fn model(&self) -> &dyn Classifier {
        self.model
    }

    /// Predicted class of the i-th training record (by position, not
    /// row_id).
    pub fn predicted(&self, position: usize) -> &str {
        &self.predicted[position]
    }
}

/// A native counterfactual: the factual's nearest training row with a
/// different predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualResult {
    pub factual: Record,
    /// A real training row ("native" counterfactual).
    pub counterfactual: Record,
    /// The counterfactual's predicted class, which the explanation promises.
    pub desired_outcome: String,
    pub distance: f64,
}

/// Scans the training set for the minimum-distance row whose prediction
/// differs from the factual's; ties break to the lowest row_id.
pub fn nearest_unlike_neighbor(
    factual: &Record,
    cache: &PredictionCache,
    metric: &DistanceMetric,
) -> Result<CounterfactualResult> {
    let factual_class = cache.model().predict(&factual.values).to_string();
    let mut best: Option<(f64, &Record, &str)> = None;
    for (position, record) in cache.train().records().iter().enumerate() {
        let predicted = cache.predicted(position);
        if predicted == factual_class {
            continue;
        }
        let d = metric.distance(factual, record);
        let closer = match &best {
            None => true,
            Some((bd, br, _)) => d < *bd || (d == *bd && record.row_id < br.row_id),
        };
        if closer {
            best = Some((d, record, predicted));
        }
    }
    let (distance, counterfactual, outcome) = best.ok_or(Error::NoUnlikeRows {
        desired: factual_class,
    })?;
    Ok(CounterfactualResult {
        factual: factual.clone(),
        counterfactual: counterfactual.clone(),
        desired_outcome: outcome.to_string(),
        distance,
    })
}

/// The up-to-`alpha` training rows predicted as `desired` that are closest
/// to `center` (nearest covered point per attribute), excluding rows already
/// covered; sorted by (distance, row_id).
pub fn candidate_list<'a>(
    center: &GeneralizedInstance,
    cache: &'a PredictionCache,
    metric: &DistanceMetric,
    desired: &str,
    alpha: usize,
) -> Result<Vec<&'a Record>> {
    assert!(alpha >= 1, "alpha must be at least 1");
    let schema = cache.train().schema();
    let mut eligible: Vec<(f64, &Record)> = cache
        .train()
        .records()
        .iter()
        .enumerate()
        .filter(|(position, r)| {
            cache.predicted(*position) == desired && !center.covers(schema, r)
        })
        .map(|(_, r)| (metric.generalized_distance(center, schema, r), r))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoCandidates {
            desired: desired.to_string(),
        });
    }
    eligible.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.row_id.cmp(&b.1.row_id))
    });
    eligible.truncate(alpha);
    Ok(eligible.into_iter().map(|(_, r)| r).collect())
}
