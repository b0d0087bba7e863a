//! The black-box classifier: a CART-style random forest with cross-validated
//! grid tuning, plus a lookup-table model for fixtures.
//!
//! Everything downstream (counterfactual search, pureness, CF-K) depends only
//! on the [`Classifier`] trait, so the ensemble is swappable for the table
//! model in tests.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Record, Value};
use crate::error::{Error, Result};
use crate::schema::{AttributeKind, Schema};
use crate::seed;

/// Minimal prediction interface. `values` is a full stored-schema row; the
/// model reads only predictor attributes, so the target slot may hold
/// anything.
pub trait Classifier: Send + Sync {
    /// Target classes, sorted ascending.
    fn classes(&self) -> &[String];
    fn predict(&self, values: &[Value]) -> &str;
}

/// Hyperparameter grid searched by [`train`]. `None` in
/// `max_leaf_nodes_options` means unbounded growth (stop at pure nodes only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuningGrid {
    pub n_estimators_options: Vec<usize>,
    pub max_leaf_nodes_options: Vec<Option<usize>>,
    pub cv_folds: usize,
    pub tuning_seed: u64,
}

impl Default for TuningGrid {
    /// Desk-scale grid; see [`TuningGrid::large`] for full experiments.
    fn default() -> Self {
        TuningGrid {
            n_estimators_options: vec![10, 50],
            max_leaf_nodes_options: vec![Some(10), Some(100), None],
            cv_folds: 5,
            tuning_seed: 0,
        }
    }
}

impl TuningGrid {
    /// The heavyweight grid used for full experiment runs.
    pub fn large() -> Self {
        TuningGrid {
            n_estimators_options: vec![10, 50, 100, 500, 1000, 5000],
            max_leaf_nodes_options: vec![Some(10), Some(100), Some(500), None],
            cv_folds: 5,
            tuning_seed: 0,
        }
    }

    /// A single fixed cell, for tests that want no tuning at all.
    pub fn fixed(n_estimators: usize, max_leaf_nodes: Option<usize>) -> Self {
        TuningGrid {
            n_estimators_options: vec![n_estimators],
            max_leaf_nodes_options: vec![max_leaf_nodes],
            cv_folds: 5,
            tuning_seed: 0,
        }
    }

    pub fn with_seed(mut self, tuning_seed: u64) -> Self {
        self.tuning_seed = tuning_seed;
        self
    }

    pub fn with_folds(mut self, cv_folds: usize) -> Self {
        self.cv_folds = cv_folds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators_options.is_empty() || self.max_leaf_nodes_options.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.n_estimators_options.iter().any(|&n| n == 0) {
            return Err(Error::Config("n_estimators options must be positive".into()));
        }
        if self
            .max_leaf_nodes_options
            .iter()
            .any(|m| matches!(m, Some(0)))
        {
            return Err(Error::Config(
                "max_leaf_nodes options must be positive (use 0 in TOML for unbounded)".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitTest {
    /// Numeric attribute value <= threshold goes left.
    NumericLe(f64),
    /// Categorical attribute value == label goes left.
    CategoryEq(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        attribute: usize,
        test: SplitTest,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training-row counts per class, aligned with the model's classes.
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Index of the winning class at the leaf this row routes to; ties go to
    /// the lowest class index.
    fn vote(&self, values: &[Value]) -> usize {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { counts } => return argmax(counts.iter().map(|&c| c as f64)),
                TreeNode::Split {
                    attribute,
                    test,
                    left,
                    right,
                } => {
                    let goes_left = match test {
                        SplitTest::NumericLe(threshold) => match &values[*attribute] {
                            Value::Number(x) => x <= threshold,
                            Value::Label(_) => panic!("numeric split on a label value"),
                        },
                        SplitTest::CategoryEq(label) => match &values[*attribute] {
                            Value::Label(l) => l == label,
                            Value::Number(_) => panic!("categorical split on a numeric value"),
                        },
                    };
                    node = if goes_left { *left } else { *right };
                }
            }
        }
    }
}

/// A bagged ensemble of CART trees trained by [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub trees: Vec<DecisionTree>,
    pub n_estimators: usize,
    pub max_leaf_nodes: Option<usize>,
    /// Sorted distinct target values seen at training time.
    pub classes: Vec<String>,
    /// Mean normalized impurity decrease per stored attribute (target slot is
    /// always 0); sums to 1 unless no tree ever split.
    pub feature_importances: Vec<f64>,
    /// Stored-attribute names, for save/load sanity checks.
    pub attribute_names: Vec<String>,
}

impl Classifier for TreeEnsembleModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict(&self, values: &[Value]) -> &str {
        let mut votes = vec![0u32; self.classes.len()];
        for tree in &self.trees {
            votes[tree.vote(values)] += 1;
        }
        &self.classes[argmax(votes.iter().map(|&v| v as f64))]
    }
}

impl TreeEnsembleModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: TreeEnsembleModel =
            serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if model.classes.is_empty() || model.trees.is_empty() {
            return Err(Error::ModelFormat("model has no classes or no trees".into()));
        }
        Ok(model)
    }

    /// Attributes ordered by descending importance; ties keep schema order.
    pub fn feature_importance_rank(&self) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self
            .attribute_names
            .iter()
            .cloned()
            .zip(self.feature_importances.iter().copied())
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite importances"));
        ranked
    }
}

/// First index of the maximum; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Grid-searches the tuning grid with `cv_folds`-fold cross-validated
/// accuracy and refits the best cell on the full training set. Ties prefer
/// smaller `n_estimators`, then smaller `max_leaf_nodes` (unbounded last).
/// Fully deterministic for a fixed `tuning_seed`, independent of record
/// order.
pub fn train(data: &Dataset, grid: &TuningGrid) -> Result<TreeEnsembleModel> {
    grid.validate()?;
    let schema = data.schema();
    let target = schema.target_index;

    let classes: Vec<String> = data
        .records()
        .iter()
        .map(|r| r.label(target).to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for class in &classes {
        let rows = data
            .records()
            .iter()
            .filter(|r| r.label(target) == class)
            .count();
        if rows < grid.cv_folds {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                rows,
                folds: grid.cv_folds,
            });
        }
    }

    // Work over a row_id-sorted view so that shuffled inputs train the same
    // model: the seed alone determines folds and bootstraps.
    let mut rows: Vec<&Record> = data.records().iter().collect();
    rows.sort_by_key(|r| r.row_id);

    let fold_of = assign_folds(rows.len(), grid.cv_folds, grid.tuning_seed);

    let mut best: Option<(f64, usize, Option<usize>)> = None;
    for &n_estimators in &grid.n_estimators_options {
        for &max_leaf_nodes in &grid.max_leaf_nodes_options {
            let mut correct = 0usize;
            let mut total = 0usize;
            for fold in 0..grid.cv_folds {
                let train_rows: Vec<&Record> = rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| fold_of[*i] != fold)
                    .map(|(_, r)| *r)
                    .collect();
                let held_out = rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| fold_of[*i] == fold)
                    .map(|(_, r)| *r);
                let cell_seed = cell_seed(grid.tuning_seed, n_estimators, max_leaf_nodes, fold as u64);
                let (trees, _) = fit_ensemble(
                    &train_rows,
                    schema,
                    &classes,
                    n_estimators,
                    max_leaf_nodes,
                    cell_seed,
                    true,
                );
                let cell = TreeEnsembleModel {
                    trees,
                    n_estimators,
                    max_leaf_nodes,
                    classes: classes.clone(),
                    feature_importances: vec![],
                    attribute_names: vec![],
                };
                for r in held_out {
                    total += 1;
                    if cell.predict(&r.values) == r.label(target) {
                        correct += 1;
                    }
                }
            }
            let accuracy = correct as f64 / total as f64;
            let candidate = (accuracy, n_estimators, max_leaf_nodes);
            let better = match &best {
                None => true,
                Some(current) => {
                    candidate.0 > current.0
                        || (candidate.0 == current.0
                            && (candidate.1 < current.1
                                || (candidate.1 == current.1
                                    && leaf_bound(candidate.2) < leaf_bound(current.2))))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    let (_, n_estimators, max_leaf_nodes) = best.expect("non-empty grid");

    let final_seed = cell_seed(grid.tuning_seed, n_estimators, max_leaf_nodes, u64::MAX);
    let (trees, raw_importances) = fit_ensemble(
        &rows,
        schema,
        &classes,
        n_estimators,
        max_leaf_nodes,
        final_seed,
        true,
    );
    let feature_importances = normalize_importances(raw_importances);
    Ok(TreeEnsembleModel {
        trees,
        n_estimators,
        max_leaf_nodes,
        classes,
        feature_importances,
        attribute_names: schema.attributes.iter().map(|a| a.name.clone()).collect(),
    })
}

/// `None` (unbounded) sorts after every finite bound.
fn leaf_bound(m: Option<usize>) -> u64 {
    m.map_or(u64::MAX, |v| v as u64)
}

fn cell_seed(tuning_seed: u64, n_estimators: usize, max_leaf_nodes: Option<usize>, fold: u64) -> u64 {
    let s = seed::mix(tuning_seed, n_estimators as u64);
    let s = seed::mix(s, leaf_bound(max_leaf_nodes));
    seed::mix(s, fold)
}

/// Round-robin fold assignment over a seeded shuffle of 0..n.
fn assign_folds(n: usize, folds: usize, tuning_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(tuning_seed, 0xF0_1D));
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (position, &row) in order.iter().enumerate() {
        fold_of[row] = position % folds;
    }
    fold_of
}

/// Fits `n_estimators` trees, optionally bagging rows with replacement.
/// Returns the trees and the per-attribute sum of tree-normalized impurity
/// decreases.
fn fit_ensemble(
    rows: &[&Record],
    schema: &Schema,
    classes: &[String],
    n_estimators: usize,
    max_leaf_nodes: Option<usize>,
    ensemble_seed: u64,
    bootstrap: bool,
) -> (Vec<DecisionTree>, Vec<f64>) {
    let mut trees = Vec::with_capacity(n_estimators);
    let mut importance_sum = vec![0.0; schema.attributes.len()];
    for t in 0..n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(ensemble_seed, t as u64));
        let sample: Vec<&Record> = if bootstrap {
            (0..rows.len())
                .map(|_| rows[rng.random_range(0..rows.len())])
                .collect()
        } else {
            rows.to_vec()
        };
        let (tree, raw) = fit_tree(&sample, schema, classes, max_leaf_nodes, &mut rng);
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            for (slot, r) in importance_sum.iter_mut().zip(&raw) {
                *slot += r / total;
            }
        }
        trees.push(tree);
    }
    (trees, importance_sum)
}

fn normalize_importances(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|v| v / total).collect()
    } else {
        raw
    }
}

/// Gain below this is treated as zero to stop float-noise splits.
const MIN_GAIN: f64 = 1e-12;

struct BestSplit {
    attribute: usize,
    test: SplitTest,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// A frontier leaf eligible for expansion, ordered by root-weighted gain so a
/// leaf cap keeps the most valuable splits (best-first growth). `order`
/// breaks exact priority ties deterministically.
struct Expansion {
    priority: f64,
    order: usize,
    node: usize,
    split: BestSplit,
}

impl PartialEq for Expansion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Expansion {}
impl PartialOrd for Expansion {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Expansion {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(other.order.cmp(&self.order))
    }
}

/// Grows one CART tree. `max_leaf_nodes: None` grows until every leaf is pure
/// or unsplittable.
fn fit_tree(
    rows: &[&Record],
    schema: &Schema,
    classes: &[String],
    max_leaf_nodes: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> (DecisionTree, Vec<f64>) {
    let n_root = rows.len() as f64;
    let cap = max_leaf_nodes.unwrap_or(usize::MAX);
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut importances = vec![0.0; schema.attributes.len()];

    let all_indices: Vec<usize> = (0..rows.len()).collect();
    nodes.push(leaf_node(rows, &all_indices, schema, classes));

    let mut frontier = std::collections::BinaryHeap::new();
    let mut order = 0usize;
    if let Some(split) = best_split(rows, &all_indices, schema, classes, rng) {
        frontier.push(Expansion {
            priority: (all_indices.len() as f64 / n_root) * split.gain,
            order,
            node: 0,
            split,
        });
        order += 1;
    }

    let mut leaves = 1usize;
    while leaves < cap {
        let Some(expansion) = frontier.pop() else {
            break;
        };
        let BestSplit {
            attribute,
            test,
            gain,
            left,
            right,
        } = expansion.split;
        importances[attribute] +=
            ((left.len() + right.len()) as f64 / n_root) * gain;

        let left_node = nodes.len();
        nodes.push(leaf_node(rows, &left, schema, classes));
        let right_node = nodes.len();
        nodes.push(leaf_node(rows, &right, schema, classes));
        nodes[expansion.node] = TreeNode::Split {
            attribute,
            test,
            left: left_node,
            right: right_node,
        };
        leaves += 1;

        for (child_node, child_rows) in [(left_node, left), (right_node, right)] {
            if let Some(split) = best_split(rows, &child_rows, schema, classes, rng) {
                frontier.push(Expansion {
                    priority: (child_rows.len() as f64 / n_root) * split.gain,
                    order,
                    node: child_node,
                    split,
                });
                order += 1;
            }
        }
    }
    (DecisionTree { nodes }, importances)
}

fn leaf_node(rows: &[&Record], indices: &[usize], schema: &Schema, classes: &[String]) -> TreeNode {
    let mut counts = vec![0u32; classes.len()];
    for &i in indices {
        let label = rows[i].label(schema.target_index);
        let class = classes.iter().position(|c| c == label).expect("known class");
        counts[class] += 1;
    }
    TreeNode::Leaf { counts }
}

fn gini(counts: &[u32], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

/// Best Gini split over a sqrt-sized random attribute subset, falling back to
/// all predictor attributes when the subset has no positive-gain split.
/// Returns `None` for pure or unsplittable nodes.
fn best_split(
    rows: &[&Record],
    indices: &[usize],
    schema: &Schema,
    classes: &[String],
    rng: &mut ChaCha8Rng,
) -> Option<BestSplit> {
    if indices.len() < 2 {
        return None;
    }
    let mut counts = vec![0u32; classes.len()];
    for &i in indices {
        let label = rows[i].label(schema.target_index);
        counts[classes.iter().position(|c| c == label).expect("known class")] += 1;
    }
    let parent_gini = gini(&counts, indices.len() as f64);
    if parent_gini == 0.0 {
        return None;
    }

    let predictors = &schema.predictor_indices;
    let mtry = ((predictors.len() as f64).sqrt().floor() as usize).max(1);
    let mut subset = predictors.clone();
    subset.shuffle(rng);
    subset.truncate(mtry);
    subset.sort_unstable();

    best_split_over(rows, indices, schema, classes, parent_gini, &subset).or_else(|| {
        if subset.len() == predictors.len() {
            None
        } else {
            best_split_over(rows, indices, schema, classes, parent_gini, predictors)
        }
    })
}

fn best_split_over(
    rows: &[&Record],
    indices: &[usize],
    schema: &Schema,
    classes: &[String],
    parent_gini: f64,
    attributes: &[usize],
) -> Option<BestSplit> {
    let n = indices.len() as f64;
    let class_of = |i: usize| -> usize {
        let label = rows[i].label(schema.target_index);
        classes.iter().position(|c| c == label).expect("known class")
    };

    let mut best: Option<BestSplit> = None;
    let mut consider = |attribute: usize, test: SplitTest, goes_left: &dyn Fn(usize) -> bool| {
        let mut left_counts = vec![0u32; classes.len()];
        let mut right_counts = vec![0u32; classes.len()];
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &i in indices {
            if goes_left(i) {
                left_counts[class_of(i)] += 1;
                left.push(i);
            } else {
                right_counts[class_of(i)] += 1;
                right.push(i);
            }
        }
        if left.is_empty() || right.is_empty() {
            return;
        }
        let weighted = (left.len() as f64 / n) * gini(&left_counts, left.len() as f64)
            + (right.len() as f64 / n) * gini(&right_counts, right.len() as f64);
        let gain = parent_gini - weighted;
        if gain <= MIN_GAIN {
            return;
        }
        // Strict improvement keeps the first candidate on ties; candidates
        // arrive in (attribute, threshold/label) order, so ties are stable.
        if best.as_ref().map_or(true, |b| gain > b.gain) {
            best = Some(BestSplit {
                attribute,
                test,
                gain,
                left,
                right,
            });
        }
    };

    for &attribute in attributes {
        match schema.attributes[attribute].kind {
            AttributeKind::Numeric => {
                let mut values: Vec<f64> =
                    indices.iter().map(|&i| rows[i].number(attribute)).collect();
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                values.dedup();
                for pair in values.windows(2) {
                    let threshold = (pair[0] + pair[1]) / 2.0;
                    consider(attribute, SplitTest::NumericLe(threshold), &|i: usize| {
                        rows[i].number(attribute) <= threshold
                    });
                }
            }
            AttributeKind::Categorical => {
                let labels: BTreeSet<&str> =
                    indices.iter().map(|&i| rows[i].label(attribute)).collect();
                for label in labels {
                    consider(
                        attribute,
                        SplitTest::CategoryEq(label.to_string()),
                        &|i: usize| rows[i].label(attribute) == label,
                    );
                }
            }
        }
    }
    best
}

/// Exact-lookup classifier for fixtures: predictor values are matched
/// verbatim against a table, with a default class for unknown rows.
#[derive(Debug, Clone)]
pub struct TableModel {
    classes: Vec<String>,
    predictor_indices: Vec<usize>,
    entries: std::collections::BTreeMap<String, String>,
    default_class: String,
}

impl TableModel {
    pub fn new(schema: &Schema, classes: Vec<String>, default_class: String) -> Self {
        assert!(classes.contains(&default_class));
        TableModel {
            classes,
            predictor_indices: schema.predictor_indices.clone(),
            entries: std::collections::BTreeMap::new(),
            default_class,
        }
    }

    /// Maps the predictor values of `values` to `class`.
    pub fn insert(&mut self, values: &[Value], class: &str) {
        assert!(self.classes.iter().any(|c| c == class));
        let key = self.key(values);
        self.entries.insert(key, class.to_string());
    }

    fn key(&self, values: &[Value]) -> String {
        let mut key = String::new();
        for &i in &self.predictor_indices {
            key.push_str(&values[i].render());
            key.push('\u{1f}');
        }
        key
    }
}

impl Classifier for TableModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict(&self, values: &[Value]) -> &str {
        self.entries
            .get(&self.key(values))
            .unwrap_or(&self.default_class)
    }
}
