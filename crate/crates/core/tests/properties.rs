//! Randomized invariant checks over small generated datasets.

use std::sync::Arc;

use proptest::prelude::*;

use cfk_core::dataset::AttributeSummary;
use cfk_core::fixtures;
use cfk_core::metrics::{self, NcpWeights};
use cfk_core::mondrian::mondrian;
use cfk_core::neighbors::{candidate_list, AttributeMask, DistanceMetric, PredictionCache};
use cfk_core::predictor::Classifier;
use cfk_core::synthetic::RuleModel;
use cfk_core::{Dataset, Error, GeneralizedInstance, Record, Schema, Value};

fn toy_schema() -> Arc<Schema> {
    Arc::new(Schema::from_config(&fixtures::toy_config()))
}

fn row_strategy() -> impl Strategy<Value = Vec<Value>> {
    (
        18i64..=80,
        prop::sample::select(vec!["F", "M"]),
        prop::sample::select(vec!["Antwerp", "Brussels", "Ghent"]),
        10i64..=100,
        prop::sample::select(vec!["Single", "Married", "Widowed"]),
        prop::sample::select(vec!["Accept", "Reject"]),
    )
        .prop_map(|(age, gender, city, salary, status, outcome)| {
            vec![
                Value::Number(age as f64),
                Value::Label(gender.into()),
                Value::Label(city.into()),
                Value::Number(salary as f64),
                Value::Label(status.into()),
                Value::Label(outcome.into()),
            ]
        })
}

fn dataset_strategy(min_rows: usize, max_rows: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(row_strategy(), min_rows..=max_rows)
        .prop_map(|rows| Dataset::from_records(toy_schema(), rows).unwrap())
}

/// A dataset plus a generalized instance built by merging a few of its rows.
fn instance_strategy() -> impl Strategy<Value = (Dataset, GeneralizedInstance)> {
    (dataset_strategy(3, 25), prop::collection::vec(any::<prop::sample::Index>(), 0..4))
        .prop_map(|(data, picks)| {
            let schema = data.schema();
            let base = data.records()[0].clone();
            let mut g = GeneralizedInstance::ungeneralized(schema, base);
            for pick in picks {
                let other = &data.records()[pick.index(data.len())];
                g = g.merge(schema, other);
            }
            (data, g)
        })
}

/// Predicts from the salary column only, independent of the dataset labels.
fn salary_model() -> RuleModel {
    RuleModel::new(vec!["Accept".into(), "Reject".into()], |values| {
        usize::from(values[3].as_number().unwrap() < 55.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_the_rows((data, fraction, seed) in (dataset_strategy(2, 30), 0.2f64..0.8, 0u64..50)) {
        let n_train = (fraction * data.len() as f64).round() as usize;
        if n_train == 0 || n_train == data.len() {
            prop_assert!(data.split(fraction, seed).is_err());
            return Ok(());
        }
        let (train, test) = data.split(fraction, seed).unwrap();
        let mut ids: Vec<usize> = train
            .records()
            .iter()
            .chain(test.records())
            .map(|r| r.row_id)
            .collect();
        ids.sort_unstable();
        let expected: Vec<usize> = data.records().iter().map(|r| r.row_id).collect();
        prop_assert_eq!(ids, expected);
        // Normalization context carries over from the full dataset.
        for i in 0..data.schema().attributes.len() {
            prop_assert_eq!(train.summary(i), data.summary(i));
            prop_assert_eq!(test.summary(i), data.summary(i));
        }
    }

    #[test]
    fn distance_is_symmetric_and_bounded(data in dataset_strategy(2, 20)) {
        for mask in [AttributeMask::Predictors, AttributeMask::QuasiIdentifiers] {
            let metric = DistanceMetric::new(&data, mask);
            let bound = match mask {
                AttributeMask::Predictors => data.schema().predictor_indices.len(),
                AttributeMask::QuasiIdentifiers => data.schema().qid_indices.len(),
            } as f64;
            for a in data.records() {
                for b in data.records() {
                    let d = metric.distance(a, b);
                    prop_assert!((d - metric.distance(b, a)).abs() < 1e-12);
                    prop_assert!((0.0..=bound + 1e-12).contains(&d));
                    if a.row_id == b.row_id {
                        prop_assert_eq!(d, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn generalized_distance_is_zero_iff_covered((data, g) in instance_strategy()) {
        let metric = DistanceMetric::new(&data, AttributeMask::QuasiIdentifiers);
        let schema = data.schema();
        for r in data.records() {
            let d = metric.generalized_distance(&g, schema, r);
            prop_assert_eq!(d == 0.0, g.covers(schema, r));
            prop_assert!(d >= 0.0);
        }
    }

    #[test]
    fn merge_grows_coverage_and_ncp((data, g) in instance_strategy(), pick in any::<prop::sample::Index>()) {
        let schema = data.schema();
        let weights = NcpWeights::from_schema(schema);
        let other = data.records()[pick.index(data.len())].clone();
        let merged = g.merge(schema, &other);
        prop_assert!(merged.covers(schema, &g.base));
        prop_assert!(merged.covers(schema, &other));
        for r in data.records() {
            if g.covers(schema, r) {
                prop_assert!(merged.covers(schema, r));
            }
        }
        prop_assert!(merged.k_degree(&data) >= g.k_degree(&data));
        prop_assert!(metrics::ncp(&merged, &data, &weights) >= metrics::ncp(&g, &data, &weights) - 1e-12);
    }

    #[test]
    fn ncp_stays_within_unit_interval((data, g) in instance_strategy()) {
        let weights = NcpWeights::from_schema(data.schema());
        let v = metrics::ncp(&g, &data, &weights);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn moves_keep_the_base_covered((data, g) in instance_strategy()) {
        let schema = data.schema();
        for m in g.moves(&data) {
            prop_assert!(m.covers(schema, &g.base), "move {} drops base {}", m.render(), g.render());
            prop_assert!(m != g);
            prop_assert!(m.k_degree(&data) >= 1);
        }
    }

    #[test]
    fn k_degree_counts_exactly_the_covered_rows((data, g) in instance_strategy()) {
        let schema = data.schema();
        let by_scan = data.records().iter().filter(|r| g.covers(schema, r)).count();
        prop_assert_eq!(g.k_degree(&data), by_scan);
        prop_assert!(by_scan >= 1);
    }

    #[test]
    fn candidate_list_is_sorted_nearest_first((data, g) in instance_strategy(), alpha in 1usize..8) {
        let model = salary_model();
        let cache = PredictionCache::new(&data, &model);
        let metric = DistanceMetric::new(&data, AttributeMask::QuasiIdentifiers);
        let schema = data.schema();
        let eligible: Vec<&Record> = data
            .records()
            .iter()
            .enumerate()
            .filter(|(p, r)| cache.predicted(*p) == "Accept" && !g.covers(schema, r))
            .map(|(_, r)| r)
            .collect();
        match candidate_list(&g, &cache, &metric, "Accept", alpha) {
            Ok(list) => {
                prop_assert!(!eligible.is_empty());
                prop_assert_eq!(list.len(), eligible.len().min(alpha));
                let keys: Vec<(f64, usize)> = list
                    .iter()
                    .map(|r| (metric.generalized_distance(&g, schema, r), r.row_id))
                    .collect();
                prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
                for r in &list {
                    prop_assert!(!g.covers(schema, r));
                    prop_assert_eq!(model.predict(&r.values), "Accept");
                }
            }
            Err(Error::NoCandidates { .. }) => prop_assert!(eligible.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn pureness_exact_matches_independent_enumeration((data, g) in instance_strategy()) {
        let model = salary_model();
        let space = metrics::combination_space(&g, &data);
        let size = metrics::combination_space_size(&g, &data);
        prop_assume!(size <= 512);
        let schema = data.schema();
        // Count desired combinations by explicit recursion, independent of
        // the library's mixed-radix walk.
        fn count(
            space: &[Vec<Value>],
            schema: &Schema,
            base: &Record,
            model: &RuleModel,
            assigned: &mut Vec<Value>,
            depth: usize,
        ) -> (u64, u64) {
            if depth == space.len() {
                let mut values = base.values.clone();
                for (slot, &qi) in schema.qid_indices.iter().enumerate() {
                    values[qi] = assigned[slot].clone();
                }
                let hit = model.predict(&values) == "Accept";
                return (u64::from(hit), 1);
            }
            let mut hits = 0;
            let mut total = 0;
            for v in &space[depth] {
                assigned.push(v.clone());
                let (h, t) = count(space, schema, base, model, assigned, depth + 1);
                assigned.pop();
                hits += h;
                total += t;
            }
            (hits, total)
        }
        let (hits, total) = count(&space, schema, &g.base, &model, &mut Vec::new(), 0);
        prop_assert_eq!(u128::from(total), size);
        let estimate = metrics::pureness_exact(&g, &data, &model, "Accept", 10_000).unwrap();
        prop_assert!(estimate.exact);
        prop_assert!((estimate.value - hits as f64 / total as f64).abs() < 1e-12);
    }

    #[test]
    fn sampled_pureness_stays_in_bounds((data, g) in instance_strategy(), n in 1usize..40, seed in 0u64..20) {
        let model = salary_model();
        let estimate = metrics::pureness_sampled(&g, &data, &model, "Accept", n, seed);
        prop_assert!((0.0..=1.0).contains(&estimate.value));
        let size = metrics::combination_space_size(&g, &data);
        prop_assert_eq!(estimate.exact, size <= n as u128);
        let again = metrics::pureness_sampled(&g, &data, &model, "Accept", n, seed);
        prop_assert_eq!(estimate, again);
    }

    #[test]
    fn mondrian_partitions_form_a_k_cover(data in dataset_strategy(8, 40), k in 1usize..6) {
        prop_assume!(data.len() >= k);
        let anon = mondrian(&data, k).unwrap();
        let mut seen: Vec<usize> = Vec::new();
        for p in anon.partitions() {
            prop_assert!(p.member_row_ids.len() >= k);
            seen.extend_from_slice(&p.member_row_ids);
        }
        seen.sort_unstable();
        let expected: Vec<usize> = data.records().iter().map(|r| r.row_id).collect();
        prop_assert_eq!(seen, expected);
        // Each member is covered by its partition's generalized summary.
        let schema = data.schema();
        for r in data.records() {
            let p = anon.partition_of(r.row_id);
            for (slot, &qi) in schema.qid_indices.iter().enumerate() {
                prop_assert!(p.summaries[slot].covers(&r.values[qi]));
            }
        }
    }

    #[test]
    fn summaries_bound_every_row(data in dataset_strategy(1, 30)) {
        for (i, attr) in data.schema().attributes.iter().enumerate() {
            match data.summary(i) {
                AttributeSummary::Numeric { min, max } => {
                    prop_assert!(min <= max);
                    for r in data.records() {
                        let x = r.number(i);
                        prop_assert!((*min..=*max).contains(&x));
                    }
                }
                AttributeSummary::Categorical { values } => {
                    prop_assert_eq!(
                        matches!(attr.kind, cfk_core::schema::AttributeKind::Categorical),
                        true
                    );
                    for r in data.records() {
                        prop_assert!(values.contains(r.label(i)));
                    }
                }
            }
        }
    }
}
