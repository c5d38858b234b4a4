use num_rational::Ratio;
use num_traits::Zero;
use percolab_core::estimation::{clt_check, fit_expansion, summarize, FitPoint, Sign};
use percolab_core::geometric_graph::{build_graph, component_orders, components};
use percolab_core::lattice::{
    cluster_count, label_clusters, largest_cluster_order, LatticeBoundary, LatticeConfig,
    LatticeEmbedding,
};
use percolab_core::oracles::naive_graph;
use percolab_core::point_process::{BoxSpec, PointCloud};
use proptest::prelude::*;

fn cloud_strategy() -> impl Strategy<Value = (PointCloud, f64)> {
    (2usize..=3, 1.0f64..6.0).prop_flat_map(|(dim, side)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..=side, dim), 0..80),
            0.01f64..3.0,
        )
            .prop_map(move |(pts, r)| {
                (PointCloud::from_points(BoxSpec::new(dim, side).unwrap(), &pts).unwrap(), r)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn grid_edges_equal_all_pairs((cloud, r) in cloud_strategy()) {
        let expected = naive_graph(&cloud, r).unwrap();
        prop_assert_eq!(build_graph(cloud, r).unwrap().edges(), expected);
    }

    #[test]
    fn labeling_is_a_ranked_partition((cloud, r) in cloud_strategy()) {
        let n = cloud.len();
        let lab = components(&build_graph(cloud, r).unwrap());
        prop_assert_eq!(lab.orders().iter().sum::<usize>(), n);
        let ranked: Vec<usize> = (1..=lab.count()).map(|j| component_orders(&lab, j)).collect();
        prop_assert!(ranked.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(component_orders(&lab, lab.count() + 1), 0);
    }

    #[test]
    fn l1_never_decreases_with_radius((cloud, r) in cloud_strategy(), grow in 0.0f64..2.0) {
        let small = component_orders(&components(&build_graph(cloud.clone(), r).unwrap()), 1);
        let large = component_orders(&components(&build_graph(cloud, r + grow).unwrap()), 1);
        prop_assert!(small <= large);
    }

    #[test]
    fn coupled_largest_cluster_is_monotone(
        uniforms in prop::collection::vec(0.0f64..1.0, 64),
        p1 in 0.0f64..=1.0,
        p2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = LatticeConfig::from_uniforms(2, 8, lo, &uniforms).unwrap();
        let b = LatticeConfig::from_uniforms(2, 8, hi, &uniforms).unwrap();
        prop_assert!(largest_cluster_order(&label_clusters(&a)) <= largest_cluster_order(&label_clusters(&b)));
    }

    #[test]
    fn counting_identity_holds(open in prop::collection::vec(any::<bool>(), 125)) {
        let lab = label_clusters(&LatticeConfig::new(3, 5, open).unwrap());
        prop_assert_eq!(cluster_count(&lab).unwrap().1, Ratio::zero());
    }

    #[test]
    fn boundary_decomposition_is_exact(
        open in prop::collection::vec(any::<bool>(), 100),
        inner in 1usize..=10,
    ) {
        let emb = LatticeEmbedding::new(LatticeConfig::new(2, 10, open).unwrap(), inner).unwrap();
        let (local, bulk, shell) = LatticeBoundary::new(&emb).count_decomposition();
        prop_assert_eq!(local, bulk + shell);
    }

    #[test]
    fn fit_scales_with_the_means(alpha in 0.1f64..10.0, c in prop::array::uniform3(-5.0f64..5.0)) {
        let pts: Vec<FitPoint> = [10.0, 15.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&s| FitPoint { side: s, mean: c[0] * s * s + c[1] * s + c[2] + (s * 0.37).sin(), stderr: 1.0 + 0.01 * s })
            .collect();
        let scaled: Vec<FitPoint> = pts.iter().map(|p| FitPoint { mean: alpha * p.mean, ..*p }).collect();
        let a = fit_expansion(&pts, 2, Sign::Minus).unwrap();
        let b = fit_expansion(&scaled, 2, Sign::Minus).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((alpha * x - y).abs() <= 1e-8 * (1.0 + y.abs()), "{} vs {}", alpha * x, y);
        }
    }

    #[test]
    fn clt_is_affine_invariant(
        samples in prop::collection::vec(-100.0f64..100.0, 500..700),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        prop_assume!(summarize(&samples).unwrap().variance > 1e-6);
        let moved: Vec<f64> = samples.iter().map(|x| scale * x + shift).collect();
        let a = clt_check(&samples, 10.0, 1.0).unwrap();
        let b = clt_check(&moved, 10.0, 1.0).unwrap();
        prop_assert!((a.ks_distance - b.ks_distance).abs() < 1e-9);
        prop_assert!((a.skewness - b.skewness).abs() < 1e-7);
        prop_assert!((a.excess_kurtosis - b.excess_kurtosis).abs() < 1e-7);
    }

    #[test]
    fn summary_ignores_order(mut samples in prop::collection::vec(-1e3f64..1e3, 2..200), seed in any::<u64>()) {
        let before = summarize(&samples).unwrap();
        // deterministic shuffle
        let mut state = seed | 1;
        for i in (1..samples.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            samples.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let after = summarize(&samples).unwrap();
        prop_assert!((before.mean - after.mean).abs() <= 1e-9 * (1.0 + before.mean.abs()));
        prop_assert!((before.variance - after.variance).abs() <= 1e-9 * (1.0 + before.variance));
        prop_assert_eq!(before.count, after.count);
    }
}
