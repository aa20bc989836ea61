use knnn::rng::Rng;
use knnn::scoring::{score, score_batch};
use knnn::synth::{TWO_ARCS_HOLES, TWO_ARCS_RADII};
use knnn::*;
use proptest::prelude::*;

fn cloud(seed: u64, rows: usize, dim: usize) -> FeatureMatrix {
    let mut rng = Rng::new(seed);
    FeatureMatrix::new(dim, (0..rows * dim).map(|_| rng.gaussian()).collect()).unwrap()
}

fn scores(train: &FeatureMatrix, queries: &FeatureMatrix, config: &ScoreConfig) -> Vec<f64> {
    let dim = train.dim();
    let plan = identity_plan(dim, config.resolved_set_width(dim)).unwrap();
    let k_nnn = config.fit_k_nnn();
    let model = fit(train, &plan, k_nnn, if k_nnn > 0 { config.resolved_n(dim) } else { 0 }).unwrap();
    score_batch(&model, queries, config, false).unwrap().scores
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scorers_are_translation_invariant(seed in any::<u64>(), shift in prop::collection::vec(-50.0f64..50.0, 3)) {
        let train = cloud(seed, 60, 3);
        let queries = cloud(seed ^ 1, 10, 3);
        let move_rows = |m: &FeatureMatrix| {
            m.map_rows(3, |r, out| {
                for ((o, v), s) in out.iter_mut().zip(r).zip(&shift) {
                    *o = v + s;
                }
            })
            .unwrap()
        };
        for method in Method::ALL {
            let config = ScoreConfig::new(method).with_k(4).with_k_nnn(8);
            let a = scores(&train, &queries, &config);
            let b = scores(&move_rows(&train), &move_rows(&queries), &config);
            prop_assert!(close(&a, &b, 1e-9), "{method}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn global_is_rotation_invariant(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU) {
        let train = cloud(seed, 50, 2).map_rows(2, |r, out| { out[0] = 3.0 * r[0]; out[1] = r[1] + 0.5 * r[0]; }).unwrap();
        let queries = cloud(seed ^ 2, 10, 2);
        let (c, s) = (angle.cos(), angle.sin());
        let rotate = |m: &FeatureMatrix| m.map_rows(2, |r, out| { out[0] = c * r[0] - s * r[1]; out[1] = s * r[0] + c * r[1]; }).unwrap();
        let config = ScoreConfig::new(Method::Global);
        let a = scores(&train, &queries, &config);
        let b = scores(&rotate(&train), &rotate(&queries), &config);
        prop_assert!(close(&a, &b, 1e-9), "{a:?} vs {b:?}");
    }

    #[test]
    fn single_set_scores_ignore_feature_order(seed in any::<u64>()) {
        let train = cloud(seed, 40, 4);
        let queries = cloud(seed ^ 3, 8, 4);
        let order = [2, 0, 3, 1];
        let shuffle = |m: &FeatureMatrix| m.map_rows(4, |r, out| for (o, &f) in out.iter_mut().zip(&order) { *o = r[f]; }).unwrap();
        for method in [Method::Knn, Method::Global, Method::Local, Method::Knnn] {
            let config = ScoreConfig::new(method).with_k(5).with_k_nnn(10).with_set_width(4);
            let a = scores(&train, &queries, &config);
            let b = scores(&shuffle(&train), &shuffle(&queries), &config);
            prop_assert!(close(&a, &b, 1e-9), "{method}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn reordered_plan_matches_pre_permuted_data(seed in any::<u64>()) {
        let base = cloud(seed, 40, 4);
        let train = base.map_rows(4, |r, out| { out[0] = r[0]; out[1] = r[1]; out[2] = r[0] + 0.1 * r[2]; out[3] = r[1] + 0.1 * r[3]; }).unwrap();
        let queries = cloud(seed ^ 4, 6, 4);
        let plan = correlation_plan(&train, 2).unwrap();
        let model = fit(&train, &plan, 10, 2).unwrap();

        let perm = plan.permutation().to_vec();
        let move_cols = |m: &FeatureMatrix| m.map_rows(4, |r, out| for (o, &f) in out.iter_mut().zip(&perm) { *o = r[f]; }).unwrap();
        let pre = fit(&move_cols(&train), &identity_plan(4, 2).unwrap(), 10, 2).unwrap();

        let config = ScoreConfig::new(Method::Knnn).with_set_width(2).with_k_nnn(10);
        for (q, pq) in queries.iter_rows().zip(move_cols(&queries).iter_rows()) {
            let a = score(&model, q, &config).unwrap();
            let b = score(&pre, pq, &config).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn scores_are_non_negative_and_zero_on_training_rows(seed in any::<u64>()) {
        let train = cloud(seed, 30, 3);
        let model = fit(&train, &identity_plan(3, 2).unwrap(), 6, 2).unwrap();
        let queries = cloud(seed ^ 5, 10, 3);
        for method in Method::ALL {
            let config = ScoreConfig::new(method).with_k(3).with_set_width(2);
            prop_assert!(score_batch(&model, &queries, &config, false).unwrap().scores.iter().all(|&s| s >= 0.0));
        }
        for method in [Method::Knn, Method::Global, Method::Knnn] {
            let config = ScoreConfig::new(method).with_k(1).with_set_width(2);
            for row in train.iter_rows() {
                prop_assert_eq!(score(&model, row, &config).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn two_arcs_gap_scores_below_between_arc_region() {
    let (train, _) = make_benchmark(&SynthSpec::new(Shape::TwoArcs, 0, 11), 250, 1).unwrap();
    let model = fit(&train, &identity_plan(2, 2).unwrap(), 25, 2).unwrap();
    let knnn = ScoreConfig::new(Method::Knnn);

    let polar = |r: f64, deg: f64| [r * deg.to_radians().cos(), r * deg.to_radians().sin()];
    let (hole_start, hole_end) = TWO_ARCS_HOLES[0];
    let hole_center = polar(TWO_ARCS_RADII.0, 0.5 * (hole_start + hole_end));
    let between = polar(0.5 * (TWO_ARCS_RADII.0 + TWO_ARCS_RADII.1), 0.5 * (hole_start + hole_end));
    let outside = polar(TWO_ARCS_RADII.1 + 0.5, 90.0);

    let gap = score(&model, &hole_center, &knnn).unwrap();
    let mid = score(&model, &between, &knnn).unwrap();
    let far = score(&model, &outside, &knnn).unwrap();
    assert!(gap < mid, "gap {gap} vs between {mid}");
    assert!(mid < far, "between {mid} vs outside {far}");
}

#[test]
fn benchmark_end_to_end_is_reproducible() {
    let spec = SynthSpec::new(Shape::Moons, 0, 21);
    let run = || {
        let (train, test) = make_benchmark(&spec, 100, 500).unwrap();
        sweep(&train, &test, &[ScoreConfig::new(Method::Knn), ScoreConfig::new(Method::Knnn)])
            .unwrap()
            .rows
            .iter()
            .map(|r| r.roc.auroc)
            .collect::<Vec<_>>()
    };
    let first = run();
    assert_eq!(first, run());
    assert!(first.iter().all(|&a| a > 0.8), "{first:?}");
}
