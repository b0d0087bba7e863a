//! Explanation quality metrics: NCP information loss and pureness.
//!
//! NCP charges each quasi-identifier for how much of the training-wide value
//! range (numeric) or value universe (categorical) its generalization spans,
//! combined as a weighted sum. Pureness asks how much of the generalization
//! still explains the desired outcome: the fraction of covered value
//! combinations (training-present values only) the model maps to the desired
//! class, enumerated exactly below a cap and estimated by seeded sampling
//! above it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Value};
use crate::error::{Error, Result};
use crate::generalization::{GeneralizedInstance, GeneralizedValue};
use crate::predictor::Classifier;
use crate::schema::{Schema, WEIGHT_SUM_TOLERANCE};
use crate::seed;

/// Per-quasi-identifier information-loss weights, aligned with
/// `schema.qid_indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct NcpWeights(Vec<f64>);

impl NcpWeights {
    pub fn equal(d: usize) -> Self {
        assert!(d > 0);
        NcpWeights(vec![1.0 / d as f64; d])
    }

    pub fn from_schema(schema: &Schema) -> Self {
        NcpWeights(schema.ncp_weights())
    }

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::Config("weights must be fractions in [0, 1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Config(format!("weights sum to {sum}, expected 1")));
        }
        Ok(NcpWeights(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Weighted information loss in [0,1]. A numeric quasi-identifier costs
/// (hi-lo) / training range (0 when the training range is 0); a categorical
/// one costs 0 when singleton, |set| / |training universe| otherwise.
pub fn ncp(g: &GeneralizedInstance, train: &Dataset, weights: &NcpWeights) -> f64 {
    let schema = train.schema();
    assert_eq!(weights.as_slice().len(), schema.qid_indices.len());
    schema
        .qid_indices
        .iter()
        .zip(&g.qid_values)
        .zip(weights.as_slice())
        .map(|((&i, value), w)| {
            let contribution = match value {
                GeneralizedValue::Interval { lo, hi } => {
                    let range = train.summary(i).range();
                    if range == 0.0 {
                        0.0
                    } else {
                        (hi - lo) / range
                    }
                }
                GeneralizedValue::ValueSet(set) => {
                    if set.len() == 1 {
                        0.0
                    } else {
                        set.len() as f64 / train.summary(i).cardinality() as f64
                    }
                }
            };
            w * contribution
        })
        .sum()
}

/// Per-quasi-identifier lists of the concrete values a generalized instance
/// covers: training-present values inside the interval (always including the
/// base value) and the labels of the value set.
pub fn combination_space(g: &GeneralizedInstance, train: &Dataset) -> Vec<Vec<Value>> {
    let schema = train.schema();
    schema
        .qid_indices
        .iter()
        .zip(&g.qid_values)
        .map(|(&i, value)| match value {
            GeneralizedValue::Interval { lo, hi } => {
                let mut values: Vec<Value> = train
                    .present(i)
                    .numeric()
                    .iter()
                    .filter(|&&v| *lo <= v && v <= *hi)
                    .map(|&v| Value::Number(v))
                    .collect();
                if values.is_empty() {
                    // A base outside the training split still yields a
                    // well-defined single-point space.
                    values.push(Value::Number(g.base.number(i)));
                }
                values
            }
            GeneralizedValue::ValueSet(set) => {
                set.iter().map(|l| Value::Label(l.clone())).collect()
            }
        })
        .collect()
}

/// Number of value combinations the generalization covers.
pub fn combination_space_size(g: &GeneralizedInstance, train: &Dataset) -> u128 {
    combination_space(g, train)
        .iter()
        .map(|values| values.len() as u128)
        .product()
}

/// Default cap on exact pureness enumeration; larger spaces must be sampled.
pub const DEFAULT_EXACT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PurenessEstimate {
    /// Fraction of combinations predicted as the desired outcome.
    pub value: f64,
    /// Model queries behind the value; equals the space size when exact.
    pub samples: usize,
    pub exact: bool,
    pub combination_space_size: u128,
}

/// Exact pureness by full enumeration of the combination space. Fails when
/// the space exceeds `cap` model queries.
pub fn pureness_exact(
    g: &GeneralizedInstance,
    train: &Dataset,
    model: &dyn Classifier,
    desired: &str,
    cap: usize,
) -> Result<PurenessEstimate> {
    let space = combination_space(g, train);
    let size: u128 = space.iter().map(|v| v.len() as u128).product();
    if size > cap as u128 {
        return Err(Error::CombinationSpaceTooLarge { size, cap });
    }
    let schema = train.schema();
    let mut values = g.base.values.clone();
    let mut cursor = vec![0usize; space.len()];
    let mut hits = 0u64;
    let total = size as u64;
    for _ in 0..total {
        for (p, &i) in schema.qid_indices.iter().enumerate() {
            values[i] = space[p][cursor[p]].clone();
        }
        if model.predict(&values) == desired {
            hits += 1;
        }
        // Mixed-radix increment over the per-attribute lists.
        for p in (0..cursor.len()).rev() {
            cursor[p] += 1;
            if cursor[p] < space[p].len() {
                break;
            }
            cursor[p] = 0;
        }
    }
    Ok(PurenessEstimate {
        value: hits as f64 / total as f64,
        samples: size as usize,
        exact: true,
        combination_space_size: size,
    })
}

/// Sampled pureness: n combinations drawn with replacement, each attribute
/// independently uniform over its covered list. Sample s draws from its own
/// seed stream, so the estimate is reproducible and order-independent. When
/// the space has at most n combinations the exact enumeration is returned
/// instead (cheaper and strictly better), flagged by `exact`.
pub fn pureness_sampled(
    g: &GeneralizedInstance,
    train: &Dataset,
    model: &dyn Classifier,
    desired: &str,
    n: usize,
    sample_seed: u64,
) -> PurenessEstimate {
    assert!(n >= 1, "sample count must be at least 1");
    let space = combination_space(g, train);
    let size: u128 = space.iter().map(|v| v.len() as u128).product();
    if size <= n as u128 {
        return pureness_exact(g, train, model, desired, n)
            .expect("space fits within the sample budget");
    }
    let schema = train.schema();
    let mut values = g.base.values.clone();
    let mut hits = 0usize;
    for s in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(sample_seed, s as u64));
        for (p, &i) in schema.qid_indices.iter().enumerate() {
            let list = &space[p];
            values[i] = list[rng.random_range(0..list.len())].clone();
        }
        if model.predict(&values) == desired {
            hits += 1;
        }
    }
    PurenessEstimate {
        value: hits as f64 / n as f64,
        samples: n,
        exact: false,
        combination_space_size: size,
    }
}

/// The metric bundle attached to every anonymized explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub k_degree: usize,
    pub ncp: f64,
    pub pureness: PurenessEstimate,
    /// Wall-clock seconds spent producing the explanation.
    pub elapsed: f64,
}
