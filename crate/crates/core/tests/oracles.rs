//! Library results checked against oracles computed here from first
//! principles: brute-force enumeration over score tables, and closed-form
//! effects of the hand-built mechanisms.

use seqscm::benchmark::{benchmark_model, generate_dataset, sate, ArmPair, OutcomeTarget};
use seqscm::mocks;
use seqscm::sampling::{exact_interventional, exact_joint, Intervention};
use seqscm::scm::{SdScm, VariationId};
use seqscm::scorer::{join_phrases, ScorerRef, TabularScoreTable};
use seqscm::spec::{bundled, instantiate_variation, ScmSpecDocument};

fn model(spec: &ScmSpecDocument, table: TabularScoreTable, seed: u64) -> SdScm {
    let n = spec.variables.len();
    instantiate_variation(spec, &VariationId::zeros(n), ScorerRef::tabular("oracle", table).unwrap(), seed).unwrap()
}

/// `P(assignment)` as a product of normalized table weights, with each
/// context built from the parents' phrases in sampling order.
fn brute_force(scm: &SdScm, table: &TabularScoreTable, assignment: &[usize], fixed: Option<(usize, usize)>) -> f64 {
    let mut p = 1.0;
    for node in 0..scm.variables().len() {
        let var = scm.variable(node);
        if let Some((f, v)) = fixed {
            if f == node {
                if assignment[node] != v {
                    return 0.0;
                }
                continue;
            }
        }
        let ctx = join_phrases(scm.ordered_parents(node).iter().map(|&q| scm.variable(q).phrase(assignment[q])));
        let weights: Vec<f64> = (0..var.cardinality()).map(|k| table.raw_score(&ctx, var.phrase(k))).collect();
        p *= weights[assignment[node]] / weights.iter().sum::<f64>();
    }
    p
}

fn all_assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &c in cards {
        out = out.into_iter().flat_map(|a| (0..c).map(move |k| [a.clone(), vec![k]].concat())).collect();
    }
    out
}

fn cards(scm: &SdScm) -> Vec<usize> {
    scm.variables().iter().map(|v| v.cardinality()).collect()
}

#[test]
fn exact_joint_matches_brute_force_on_both_toy_graphs() {
    for spec in [bundled::marathon_g1(), bundled::marathon_g2()] {
        let table = mocks::peaked_table(&spec).unwrap();
        let scm = model(&spec, table.clone(), 0);
        let joint = exact_joint(&scm).unwrap();
        let cells = all_assignments(&cards(&scm));
        assert_eq!(cells.len(), 500);
        for a in &cells {
            assert!((joint.probability(a) - brute_force(&scm, &table, a, None)).abs() < 1e-14);
        }
    }
}

#[test]
fn exact_interventional_matches_truncated_factorization() {
    let spec = bundled::marathon_g2();
    let table = mocks::collider_table().unwrap().1;
    let scm = model(&spec, table.clone(), 0);
    for name in ["w", "g", "m"] {
        let node = scm.index_of(name).unwrap();
        for v in 0..scm.variable(node).cardinality() {
            let joint = exact_interventional(&scm, &Intervention::new(name, v)).unwrap();
            for a in all_assignments(&cards(&scm)) {
                assert!((joint.probability(&a) - brute_force(&scm, &table, &a, Some((node, v)))).abs() < 1e-14);
            }
        }
    }
}

/// Closed form for the effect mock: `P(y=1 | u, t) = 0.4 + 0.1u + delta t`
/// (phrasing 0), with `u` uniform on {0, 1}.
#[test]
fn effect_mock_has_the_designed_ate() {
    for delta in [0.1, -0.1] {
        let (spec, table) = mocks::effect_table(delta).unwrap();
        let scm = model(&spec, table, 0);
        let y = scm.index_of("recovery").unwrap();
        let p1 = exact_interventional(&scm, &Intervention::new("surgery", 1)).unwrap().expectation(y, |k| k as f64);
        let p0 = exact_interventional(&scm, &Intervention::new("surgery", 0)).unwrap().expectation(y, |k| k as f64);
        assert!((p1 - p0 - delta).abs() < 1e-12);
    }
}

#[test]
fn shipped_sign_flip_fixture_matches_its_closed_form() {
    let shipped = mocks::shipped_sign_flip_table().unwrap();
    let (spec, rebuilt) = mocks::sign_flip_table().unwrap();
    let scm = model(&spec, shipped, 0);
    for variation in ["0-0-0", "1-1-1", "1-0-1"] {
        let variation: VariationId = variation.parse().unwrap();
        let a = instantiate_variation(&spec, &variation, scm.scorer().clone(), 0).unwrap();
        let b = instantiate_variation(&spec, &variation, ScorerRef::tabular("r", rebuilt.clone()).unwrap(), 0).unwrap();
        assert!(exact_joint(&a).unwrap().max_abs_difference(&exact_joint(&b).unwrap()) < 1e-12);
    }
    let (t, y) = (scm.index_of("surgery").unwrap(), scm.index_of("recovery").unwrap());
    let do1 = exact_interventional(&scm, &Intervention::new("surgery", 1)).unwrap().expectation(y, |k| k as f64);
    let do0 = exact_interventional(&scm, &Intervention::new("surgery", 0)).unwrap().expectation(y, |k| k as f64);
    // 0.5 (0.75 + 0.25) - 0.5 (0.7 + 0.1)
    assert!((do1 - do0 - 0.1).abs() < 1e-12);

    let joint = exact_joint(&scm).unwrap().marginal(&[t, y]);
    let cond = |tv: usize| joint.probability(&[tv, 1]) / (joint.probability(&[tv, 0]) + joint.probability(&[tv, 1]));
    // P(rec | op) = 0.3, P(rec | wait) = 0.64
    assert!((cond(1) - cond(0) + 0.34).abs() < 1e-12);
}

#[test]
fn probability_sate_converges_to_the_interventional_contrast() {
    let (spec, table) = mocks::effect_table(0.1).unwrap();
    let (scm, design) =
        benchmark_model(&spec, &VariationId::zeros(3), 0, ScorerRef::tabular("e", table).unwrap(), 11).unwrap();
    let y = design.outcome;
    let p = |v| exact_interventional(&scm, &Intervention::new("surgery", v)).unwrap().expectation(y, |k| k as f64);
    let oracle = p(1) - p(0);
    let ds = generate_dataset(&scm, &design, "effect", 20_000, 0).unwrap();
    let got = sate(&ds, &OutcomeTarget::probability(1), ArmPair::default()).unwrap();
    assert!((got - oracle).abs() < 0.01, "sate {got} vs oracle {oracle}");
}

#[test]
fn confounded_mock_has_no_effect_but_a_biased_contrast() {
    let (spec, table) = mocks::confounder_table().unwrap();
    let scm = model(&spec, table, 0);
    let (g, m) = (scm.index_of("g").unwrap(), scm.index_of("m").unwrap());
    let p = |v| exact_interventional(&scm, &Intervention::new("g", v)).unwrap().expectation(m, |k| k as f64);
    assert!((p(1) - p(0)).abs() < 1e-12);
    let joint = exact_joint(&scm).unwrap().marginal(&[g, m]);
    let cond = |gv: usize| joint.probability(&[gv, 1]) / (joint.probability(&[gv, 0]) + joint.probability(&[gv, 1]));
    assert!((cond(1) - cond(0)).abs() > 0.2);
}

/// Pearson correlation of two binary indicators from a 2x2 table.
fn phi(p: [[f64; 2]; 2]) -> f64 {
    let total: f64 = p.iter().flatten().sum();
    let q = |a: usize, b: usize| p[a][b] / total;
    let (pa, pb) = (q(1, 0) + q(1, 1), q(0, 1) + q(1, 1));
    (q(1, 1) - pa * pb) / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt()
}

fn correlations(spec: &ScmSpecDocument, table: TabularScoreTable) -> (f64, Vec<f64>) {
    let scm = model(spec, table, 0);
    let (g, m, w) = (scm.index_of("g").unwrap(), scm.index_of("m").unwrap(), scm.index_of("w").unwrap());
    let joint = exact_joint(&scm).unwrap().marginal(&[w, g, m]);
    let mut pooled = [[0.0; 2]; 2];
    let mut within = Vec::new();
    for wv in 0..5 {
        let mut t = [[0.0; 2]; 2];
        for (gv, row) in t.iter_mut().enumerate() {
            for (mv, cell) in row.iter_mut().enumerate() {
                *cell = joint.probability(&[wv, gv, mv]);
                pooled[gv][mv] += *cell;
            }
        }
        within.push(phi(t));
    }
    (phi(pooled), within)
}

#[test]
fn mocks_show_the_confounder_and_collider_patterns_exactly() {
    let (spec, table) = mocks::confounder_table().unwrap();
    let (pooled, within) = correlations(&spec, table);
    assert!(pooled.abs() > 0.3, "pooled {pooled}");
    assert!(within.iter().all(|r| r.abs() < 1e-12), "{within:?}");

    let (spec, table) = mocks::collider_table().unwrap();
    let (pooled, within) = correlations(&spec, table);
    assert!(pooled.abs() < 1e-12, "pooled {pooled}");
    let mean_abs = within.iter().map(|r| r.abs()).sum::<f64>() / within.len() as f64;
    assert!(mean_abs > 0.15, "{within:?}");
}
