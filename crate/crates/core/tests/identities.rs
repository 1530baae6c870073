//! Endpoint identities between the attention variants on fitted forests.

use abrf::data::{gen_friedman, gen_tictactoe, FriedmanVariant};
use abrf::model::predict_panels;
use abrf::solver::project_simplex;
use abrf::{fit_forest, AttentionParams, Dataset, Ensemble, ForestConfig, GrowthCondition, ModelKind, Prediction, SoftmaxSign};
use proptest::prelude::*;
use std::sync::OnceLock;

fn regression() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| gen_friedman(FriedmanVariant::One, 60, 1.0, 1).unwrap())
}

fn classification() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| gen_tictactoe().subset(&(0..958).step_by(7).collect::<Vec<_>>()))
}

fn gap(a: &[Prediction], b: &[Prediction]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Prediction::Value(u), Prediction::Value(v)) => (u - v).abs(),
            (Prediction::Class { dist: p, .. }, Prediction::Class { dist: q, .. }) => {
                p.iter().zip(q).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
            }
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn raw_simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, k).prop_map(|v| project_simplex(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn endpoints_hold(
        seed in 0u64..1000,
        classify in any::<bool>(),
        ert in any::<bool>(),
        log_tau in -2.0..2.0f64,
        positive in any::<bool>(),
        w in raw_simplex(8),
        v in raw_simplex(8),
        z in raw_simplex(27),
    ) {
        let ds = if classify { classification() } else { regression() };
        let ensemble = if ert { Ensemble::Ert } else { Ensemble::Rf };
        let forest = fit_forest(ds, &ForestConfig::new(8, ensemble, GrowthCondition::CONDITION_2, seed)).unwrap();
        let panels = forest.panels(ds).unwrap();
        let m = forest.n_features();
        let z = project_simplex(&z[..m]);
        let p = AttentionParams {
            epsilon: 0.0,
            tau: 10f64.powf(log_tau),
            w,
            v,
            z,
            sign: if positive { SoftmaxSign::Positive } else { SoftmaxSign::Negative },
        };

        prop_assert_eq!(predict_panels(ModelKind::Abrf1Qp, &p, &panels), predict_panels(ModelKind::Softmax, &p, &panels));

        let at_one = AttentionParams { epsilon: 1.0, ..p.clone() };
        let abrf1 = predict_panels(ModelKind::Abrf1Qp, &at_one, &panels);
        prop_assert!(gap(&abrf1, &predict_panels(ModelKind::Abrf3, &at_one, &panels)) <= 1e-12);

        let uniform = AttentionParams { w: vec![1.0 / 8.0; 8], ..at_one };
        let baseline: Vec<Prediction> = (0..ds.n_samples()).map(|i| forest.predict_baseline(ds.row(i)).unwrap()).collect();
        prop_assert!(gap(&predict_panels(ModelKind::Abrf1Qp, &uniform, &panels), &baseline) <= 1e-12);
        prop_assert!(gap(&predict_panels(ModelKind::Baseline, &p, &panels), &baseline) <= 1e-12);
    }
}

#[test]
fn abrf2_with_uniform_scales_is_a_softmax_over_weighted_distances() {
    let ds = regression();
    let forest = fit_forest(ds, &ForestConfig::new(5, Ensemble::Rf, GrowthCondition::CONDITION_1, 3)).unwrap();
    let m = forest.n_features();
    let panels = forest.panels(ds).unwrap();
    let mut p = AttentionParams::uniform(5, m);
    // With v = 1/T and z uniform the score is −‖x − A‖² / (2 T m²), the
    // softmax model at τ = T m².
    p.tau = 5.0 * (m * m) as f64;
    let a = predict_panels(ModelKind::Abrf2, &p, &panels);
    let b = predict_panels(ModelKind::Softmax, &p, &panels);
    assert!(gap(&a, &b) <= 1e-9, "{}", gap(&a, &b));
}
