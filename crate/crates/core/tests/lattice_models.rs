use percolab_core::lattice::{estimate_kappa, estimate_theta, LatticeBoundary, LatticeEmbedding};
use percolab_core::point_process::derive_substream;

#[test]
fn theta_separates_the_two_regimes() {
    let low = estimate_theta(0.2, 2, 64, 2, 2000, 31).unwrap();
    let high = estimate_theta(0.8, 2, 64, 2, 2000, 31).unwrap();
    assert!(low.mean < 0.02, "{low:?}");
    assert!(high.mean > 0.5, "{high:?}");
}

#[test]
fn kappa_on_the_smallest_box() {
    let est = estimate_kappa(0.5, 2, 2, 100_000, 32).unwrap();
    let exact = 17.0 / 64.0;
    assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{est:?}");
}

#[test]
fn decomposition_identity_on_sampled_embeddings() {
    for (k, &(dim, n, p)) in [(2, 10, 0.55), (2, 25, 0.6), (3, 6, 0.3), (2, 16, 0.8)].iter().enumerate() {
        for r in 0..25 {
            let mut rng = derive_substream(33 + k as u64, b"decomposition", r);
            let emb = LatticeEmbedding::sample(&mut rng, dim, n, 2, p).unwrap();
            let (local, bulk, shell) = LatticeBoundary::new(&emb).count_decomposition();
            assert_eq!(local, bulk + shell, "d={dim} n={n} p={p} replica {r}");
        }
    }
}
