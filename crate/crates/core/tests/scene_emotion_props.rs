use cuechord_core::emotion::{
    build_mixture, inverse_map, mixture_mean, sample_va, scaling_coefficient, Emotion, EmotionDistribution, Metric,
    VaPoint, VaTable,
};
use cuechord_core::scene::{filter_boundaries, filter_cut_times, SceneCuts};
use proptest::prelude::*;

fn cut_list() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..120_000, 0..40).prop_map(|s| s.into_iter().map(|ms| ms as f64 / 1000.0).collect())
}

fn distribution() -> impl Strategy<Value = EmotionDistribution> {
    prop::array::uniform6(0.0f64..1.0)
        .prop_filter("some mass", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            EmotionDistribution::new(w.map(|x| x / s)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn filter_gaps_subset_idempotent(cuts in cut_list(), gap_ms in 1u32..10_000) {
        let gap = gap_ms as f64 / 1000.0;
        let kept = filter_cut_times(&cuts, gap);
        let ms: Vec<i64> = kept.iter().map(|t| (t * 1000.0).round() as i64).collect();
        prop_assert!(ms.windows(2).all(|w| w[1] - w[0] >= gap_ms as i64));
        prop_assert!(kept.iter().all(|k| cuts.contains(k)));
        prop_assert_eq!(filter_cut_times(&kept, gap), kept.clone());
        if let Some(first) = cuts.first() {
            prop_assert_eq!(kept[0], *first);
        }
        let sc = SceneCuts::new(cuts.clone(), 121.0).unwrap();
        prop_assert_eq!(filter_boundaries(&sc, gap).unwrap().times_s(), kept);
    }

    #[test]
    fn mixture_mean_is_linear(d1 in distribution(), d2 in distribution(), alpha in 0.0f64..1.0, target in 0.05f64..1.0) {
        let t = VaTable::standard();
        let m1 = build_mixture(&d1, &t, target).unwrap().mean_raw();
        let m2 = build_mixture(&d2, &t, target).unwrap().mean_raw();
        let w: Vec<f64> = d1.weights().iter().zip(d2.weights()).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let s: f64 = w.iter().sum();
        let dm = EmotionDistribution::new(std::array::from_fn(|i| w[i] / s)).unwrap();
        let m = build_mixture(&dm, &t, target).unwrap().mean_raw();
        prop_assert!((m.0 - (alpha * m1.0 + (1.0 - alpha) * m2.0)).abs() < 1e-9);
        prop_assert!((m.1 - (alpha * m1.1 + (1.0 - alpha) * m2.1)).abs() < 1e-9);
    }

    #[test]
    fn scaled_max_equals_target(target in 0.01f64..1.0) {
        let t = VaTable::standard();
        let k = scaling_coefficient(&t, target).unwrap();
        prop_assert!((t.scaled(k).max_abs_mean() - target).abs() < 1e-12);
    }

    #[test]
    fn samples_in_range(d in distribution(), seed in any::<u64>(), target in 0.05f64..1.0) {
        let mix = build_mixture(&d, &VaTable::standard(), target).unwrap();
        let p = sample_va(&mix, seed);
        let (v, a) = (p.valence.unwrap(), p.arousal.unwrap());
        prop_assert!((-1.0..=1.0).contains(&v) && (-1.0..=1.0).contains(&a));
        let m = mixture_mean(&mix);
        prop_assert!(m.valence.unwrap().abs() <= 1.0 && m.arousal.unwrap().abs() <= 1.0);
    }

    #[test]
    fn euclidean_inverse_scale_invariant(v in -1.0f64..1.0, a in -1.0f64..1.0, k in 0.1f64..3.0) {
        let t = VaTable::standard();
        let e = inverse_map(&VaPoint::specified(v, a), &t, Metric::Euclidean).unwrap();
        // scaled point may leave [-1, 1], so bypass the clamping constructor
        let scaled = VaPoint { valence: Some(v * k), arousal: Some(a * k) };
        prop_assert_eq!(inverse_map(&scaled, &t.scaled(k), Metric::Euclidean).unwrap(), e);
    }
}

#[test]
fn inverse_of_each_mean() {
    let t = VaTable::standard();
    for e in Emotion::ALL {
        let mix = build_mixture(&EmotionDistribution::one_hot(e), &t, 0.76).unwrap();
        for m in [Metric::Euclidean, Metric::Mahalanobis, Metric::Likelihood] {
            assert_eq!(inverse_map(&mixture_mean(&mix), &t, m).unwrap(), e, "{e} {m:?}");
        }
    }
}
