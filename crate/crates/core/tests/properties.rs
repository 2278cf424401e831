use proptest::prelude::*;

use seqscm::benchmark::{
    benchmark_model, generate_dataset, read_dataset_csv, write_dataset_csv, ArmPair, OutcomeTarget, TargetKind,
};
use seqscm::estimators::{fit, fit_adjusted_ols, fit_t_only_ols, EstimationData, Method};
use seqscm::metrics::{coverage, pehe, r2, r2_clipped, IntervalSet};
use seqscm::mocks;
use seqscm::sampling::{
    counterfactual_unit, exact_joint, interventional_unit, observational_unit, Intervention, ProbabilityTable,
};
use seqscm::scm::{CausalGraph, SdScm, VariationId};
use seqscm::scorer::{restricted_distribution, FnScorer, ScorerRef, TabularScoreTable};
use seqscm::spec::{bundled, instantiate_variation, ScmSpecDocument};

/// Log-weights hashed from (context, candidate), so every context gets its
/// own arbitrary conditional.
fn hashed_scorer(salt: u64) -> ScorerRef {
    ScorerRef::custom(
        "hashed",
        FnScorer(move |ctx: &str, cand: &str| {
            let mut h = salt ^ 0x9e37_79b9_7f4a_7c15;
            for b in ctx.bytes().chain([0]).chain(cand.bytes()) {
                h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
            }
            // log-weights in [-3, 0)
            -((h >> 11) as f64 / (1u64 << 53) as f64) * 3.0
        }),
    )
    .unwrap()
}

fn toy(spec: &ScmSpecDocument, salt: u64, seed: u64) -> SdScm {
    instantiate_variation(spec, &VariationId::zeros(spec.variables.len()), hashed_scorer(salt), seed).unwrap()
}

fn toy_spec(which: bool) -> ScmSpecDocument {
    if which {
        bundled::marathon_g1()
    } else {
        bundled::marathon_g2()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_distributions_are_normalized(salt in any::<u64>(), ctx in "[a-z ]{0,20}") {
        let space: Vec<String> = ["A.", "B b.", "C c c.", "D."].iter().map(|s| s.to_string()).collect();
        let d = restricted_distribution(&hashed_scorer(salt), &ctx, &space.into_iter().collect()).unwrap();
        prop_assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.probabilities().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn exact_joint_is_a_distribution(salt in any::<u64>(), g1 in any::<bool>()) {
        let joint = exact_joint(&toy(&toy_spec(g1), salt, 0)).unwrap();
        prop_assert!((joint.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn units_are_reproducible(salt in any::<u64>(), seed in any::<u64>(), stream in 0u64..4, idx in 0u64..1000) {
        let scm = toy(&bundled::marathon_g1(), salt, seed);
        prop_assert_eq!(observational_unit(&scm, stream, idx).unwrap(), observational_unit(&scm, stream, idx).unwrap());
    }

    #[test]
    fn counterfactuals_keep_non_descendants(
        salt in any::<u64>(), seed in any::<u64>(), idx in 0u64..10_000, g1 in any::<bool>(),
        target in 0usize..3, value in 0usize..2,
    ) {
        let spec = toy_spec(g1);
        let scm = toy(&spec, salt, seed);
        let name = ["w", "g", "m"][target];
        let node = scm.index_of(name).unwrap();
        let value = value.min(scm.variable(node).cardinality() - 1);
        let factual = observational_unit(&scm, 0, idx).unwrap();
        let cf = counterfactual_unit(&scm, &factual, &Intervention::new(name, value), 0).unwrap();
        let keep = scm.graph().non_descendant_mask(node);
        for (n, &kept) in keep.iter().enumerate() {
            if kept && n != node {
                prop_assert_eq!(cf.value(n), factual.value(n));
            }
        }
        prop_assert_eq!(cf.value(node), value);
    }

    #[test]
    fn interventions_fix_their_variable(salt in any::<u64>(), idx in 0u64..1000, value in 0usize..2) {
        let scm = toy(&bundled::marathon_g2(), salt, 3);
        let unit = interventional_unit(&scm, &Intervention::new("g", value), 1, idx).unwrap();
        prop_assert_eq!(unit.value(scm.index_of("g").unwrap()), value);
    }

    #[test]
    fn topological_order_respects_edges(n in 1usize..9, mask in any::<u64>()) {
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        // only forward edges, so the graph is acyclic
        let mut edges = Vec::new();
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if mask >> (bit % 64) & 1 == 1 {
                    edges.push((names[i].clone(), names[j].clone()));
                }
                bit += 1;
            }
        }
        let graph = CausalGraph::new(&names, &edges).unwrap();
        let order = graph.topological_order().unwrap();
        let mut pos = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        for &(a, b) in graph.edge_indices() {
            prop_assert!(pos[a] < pos[b]);
        }
        if edges.is_empty() {
            prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn variation_ids_round_trip(ids in proptest::collection::vec(0usize..1000, 1..15)) {
        let v = VariationId(ids);
        prop_assert_eq!(v.to_string().parse::<VariationId>().unwrap(), v);
    }

    #[test]
    fn ites_are_bounded(seed in any::<u64>(), delta in -0.3f64..0.3) {
        let (spec, table) = mocks::effect_table(delta).unwrap();
        let (scm, design) =
            benchmark_model(&spec, &VariationId::zeros(3), 0, ScorerRef::tabular("e", table).unwrap(), seed).unwrap();
        let ds = generate_dataset(&scm, &design, "e", 40, 0).unwrap();
        let arms = ArmPair::default();
        for k in 0..2 {
            for v in ds.true_ites(&OutcomeTarget::new(TargetKind::Probability, k), arms).unwrap().values {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
            for v in ds.true_ites(&OutcomeTarget::new(TargetKind::Categorical, k), arms).unwrap().values {
                prop_assert!(v == -1.0 || v == 0.0 || v == 1.0);
            }
            for v in ds.true_ites(&OutcomeTarget::new(TargetKind::LogProbability, k), arms).unwrap().values {
                prop_assert!(v.is_finite());
            }
        }
        for r in &ds.records {
            prop_assert_eq!(r.arms[r.treatment].outcome, r.outcome);
        }
    }

    #[test]
    fn datasets_round_trip_through_csv(seed in any::<u64>(), n in 1usize..30) {
        let (spec, table) = mocks::effect_table(0.1).unwrap();
        let (scm, design) =
            benchmark_model(&spec, &VariationId::zeros(3), 0, ScorerRef::tabular("e", table).unwrap(), seed).unwrap();
        let ds = generate_dataset(&scm, &design, "e", n, 0).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice(), Some(ds.meta.clone())).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn projection_is_idempotent_and_keeps_truth(seed in any::<u64>()) {
        let (spec, table) = mocks::confounder_table().unwrap();
        let (scm, design) =
            benchmark_model(&spec, &VariationId::zeros(5), 0, ScorerRef::tabular("c", table).unwrap(), seed).unwrap();
        let ds = generate_dataset(&scm, &design, "g1", 20, 0).unwrap();
        let once = ds.hidden_projection();
        prop_assert_eq!(once.hidden_projection(), once.clone());
        let t = OutcomeTarget::probability(1);
        prop_assert_eq!(once.true_ites(&t, ArmPair::default()).unwrap(), ds.true_ites(&t, ArmPair::default()).unwrap());
    }

    #[test]
    fn metric_ranges(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 2..40)) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assert!(pehe(&pred, &truth).unwrap() >= 0.0);
        prop_assert_eq!(pehe(&truth, &truth).unwrap(), 0.0);
        if let Ok(v) = r2(&pred, &truth) {
            prop_assert!(v <= 1.0);
            prop_assert!(r2_clipped(&pred, &truth).unwrap() >= 0.0);
        }
        let lower: Vec<f64> = pred.iter().zip(&pairs).map(|(p, x)| p - x.2).collect();
        let upper: Vec<f64> = pred.iter().zip(&pairs).map(|(p, x)| p + x.2).collect();
        let c = coverage(&IntervalSet::new(lower, upper).unwrap(), &truth, None).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.fraction));
    }
}

fn random_data(rows: &[(bool, usize, f64)]) -> EstimationData {
    EstimationData {
        unit_ids: (0..rows.len() as u64).collect(),
        outcome: rows.iter().map(|r| r.2).collect(),
        treated: rows.iter().map(|r| Some(r.0)).collect(),
        covariate_names: vec!["x".into()],
        covariates: rows.iter().map(|r| vec![r.1]).collect(),
    }
}

fn has_both_arms(rows: &[(bool, usize, f64)]) -> bool {
    rows.iter().any(|r| r.0) && rows.iter().any(|r| !r.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn t_only_ols_is_the_difference_in_means(rows in proptest::collection::vec((any::<bool>(), 0usize..3, -3.0f64..3.0), 4..60)) {
        prop_assume!(has_both_arms(&rows));
        let mean = |t: bool| {
            let v: Vec<f64> = rows.iter().filter(|r| r.0 == t).map(|r| r.2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let out = fit_t_only_ols(&random_data(&rows)).unwrap();
        prop_assert!((out.ate - (mean(true) - mean(false))).abs() < 1e-10);
    }

    #[test]
    fn effect_estimates_ignore_outcome_shifts(
        rows in proptest::collection::vec((any::<bool>(), 0usize..3, -3.0f64..3.0), 8..60),
        shift in -10.0f64..10.0,
        m in 0usize..4,
    ) {
        prop_assume!(has_both_arms(&rows));
        let data = random_data(&rows);
        let mut shifted = data.clone();
        for y in &mut shifted.outcome {
            *y += shift;
        }
        let method = Method::ALL[m];
        let a = fit(method, &data);
        let b = fit(method, &shifted);
        if let (Ok(a), Ok(b)) = (a, b) {
            if a.diagnostics.iter().all(|d| !d.ridge) {
                prop_assert!((a.ate - b.ate).abs() < 1e-10, "{method}: {} vs {}", a.ate, b.ate);
            }
        }
    }

    #[test]
    fn adjustment_without_covariates_is_bitwise_t_only(rows in proptest::collection::vec((any::<bool>(), 0usize..1, -3.0f64..3.0), 4..40)) {
        prop_assume!(has_both_arms(&rows));
        let data = random_data(&rows);
        let a = fit_adjusted_ols(&data.without_covariates()).unwrap();
        let b = fit_t_only_ols(&data).unwrap();
        prop_assert_eq!(a.ate.to_bits(), b.ate.to_bits());
        // a single-level covariate contributes no column either
        prop_assert_eq!(fit_adjusted_ols(&data).unwrap().ate.to_bits(), b.ate.to_bits());
    }
}

#[test]
fn dataset_content_does_not_depend_on_thread_count() {
    let (spec, table) = mocks::confounder_table().unwrap();
    let (scm, design) =
        benchmark_model(&spec, &VariationId::zeros(5), 0, ScorerRef::tabular("c", table).unwrap(), 5).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| generate_dataset(&scm, &design, "g1", 500, 2).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn empirical_table_matches_unit_counts() {
    let scm = toy(&bundled::marathon_g1(), 1, 1);
    let units: Vec<_> = (0..200).map(|i| observational_unit(&scm, 0, i).unwrap()).collect();
    let cards: Vec<usize> = scm.variables().iter().map(|v| v.cardinality()).collect();
    let table = ProbabilityTable::empirical(&units, &cards);
    assert!((table.total() - 1.0).abs() < 1e-12);
    let first = units[0].values().to_vec();
    let count = units.iter().filter(|u| u.values() == first.as_slice()).count();
    assert!((table.probability(&first) - count as f64 / 200.0).abs() < 1e-12);
}

#[test]
fn tabular_tables_round_trip_through_json() {
    let (_, table) = mocks::effect_table(0.1).unwrap();
    assert_eq!(TabularScoreTable::from_json(&table.to_json()).unwrap(), table);
}

#[test]
fn units_outside_the_arms_are_predicted_but_not_fitted() {
    let rows = [(true, 0, 1.0), (false, 0, 0.0), (true, 1, 3.0), (false, 1, 2.0)];
    let mut data = random_data(&rows);
    let base = fit_adjusted_ols(&data).unwrap();
    data.unit_ids.push(99);
    data.outcome.push(1e6);
    data.treated.push(None);
    data.covariates.push(vec![1]);
    let out = fit_adjusted_ols(&data).unwrap();
    assert_eq!(out.ate.to_bits(), base.ate.to_bits());
    assert_eq!(out.cate.len(), 5);
    assert!((out.cate[4] - 1.0).abs() < 1e-10);
}
