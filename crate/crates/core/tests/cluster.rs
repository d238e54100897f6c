use infosieve::cluster::{
    balanced_kmeans, gcd_accuracy, hungarian, kmeans, ss_kmeans, ss_kmeans_balanced, ClusterError, KMeansOptions,
};
use infosieve::datagen::rng_from_seed;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::Rng;

/// Exhaustive minimum over injective maps from the smaller side.
fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (rows, cols) = if transpose {
            (cost[0].len(), cost.len())
        } else {
            (cost.len(), cost[0].len())
        };
        if row == rows {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { cost[c][row] } else { cost[row][c] };
                best = best.min(v + go(cost, row + 1, used, transpose));
                used[c] = false;
            }
        }
        best
    }
    if n <= m {
        go(cost, 0, &mut vec![false; m], false)
    } else {
        go(cost, 0, &mut vec![false; n], true)
    }
}

fn random_points(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn hungarian_matches_brute_force_on_square_matrices() {
    let mut rng = rng_from_seed(11);
    for _ in 0..300 {
        let n = rng.gen_range(1..=6);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let a = hungarian(&cost);
        let want = brute_force(&cost);
        assert!((a.total - want).abs() < 1e-9, "{} vs {want}", a.total);
        let recomputed: f64 = a.pairs.iter().map(|&(r, c)| cost[r][c]).sum();
        assert!((recomputed - a.total).abs() < 1e-9);
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols.dedup();
        assert_eq!(cols.len(), n);
    }
}

#[test]
fn hungarian_matches_brute_force_on_rectangular_matrices() {
    let mut rng = rng_from_seed(12);
    for _ in 0..300 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let a = hungarian(&cost);
        assert!((a.total - brute_force(&cost)).abs() < 1e-9);
        assert_eq!(a.pairs.len(), n.min(m));
    }
}

#[test]
fn hungarian_on_a_worked_example() {
    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let a = hungarian(&cost);
    assert_eq!(a.total, 5.0);
    assert_eq!(a.pairs, vec![(0, 1), (1, 0), (2, 2)]);
}

#[test]
fn kmeans_objective_never_increases() {
    for seed in 0..50 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(6..40);
        let k = rng.gen_range(1..=5);
        let x = random_points(&mut rng, n, 3);
        let r = kmeans(&x, k, seed, &KMeansOptions::default()).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {:?}", r.history);
        }
        let direct: f64 = x
            .iter()
            .zip(&r.assign)
            .map(|(p, &c)| p.iter().zip(&r.centroids[c]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        assert!((direct - r.objective).abs() < 1e-9 * direct.max(1.0));
    }
}

#[test]
fn restarts_never_do_worse_than_one_seeding() {
    for seed in 0..20 {
        let mut rng = rng_from_seed(100 + seed);
        let x = random_points(&mut rng, 30, 2);
        let one = kmeans(&x, 4, seed, &KMeansOptions::default()).unwrap();
        let many = kmeans(&x, 4, seed, &KMeansOptions { n_init: 5, ..KMeansOptions::default() }).unwrap();
        assert!(many.objective <= one.objective + 1e-12);
    }
}

#[test]
fn semi_supervised_kmeans_pins_labeled_points() {
    for seed in 0..50 {
        let mut rng = rng_from_seed(500 + seed);
        let n = rng.gen_range(8..40);
        let k = rng.gen_range(2..=5);
        let x = random_points(&mut rng, n, 2);
        let labeled: Vec<Option<usize>> = (0..n)
            .map(|_| rng.gen_bool(0.3).then(|| rng.gen_range(0..k)))
            .collect();
        let r = ss_kmeans(&x, &labeled, k, seed, &KMeansOptions::default()).unwrap();
        for (i, l) in labeled.iter().enumerate() {
            if let Some(c) = l {
                assert_eq!(r.assign[i], *c, "seed {seed}, point {i}");
            }
        }
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}

fn assert_balanced(sizes: &[usize], n: usize) {
    let k = sizes.len();
    let lo = n / k;
    let hi = n.div_ceil(k);
    for &s in sizes {
        assert!(s >= lo && s <= hi, "sizes {sizes:?} outside [{lo}, {hi}]");
    }
    assert_eq!(sizes.iter().sum::<usize>(), n);
}

#[test]
fn balanced_kmeans_respects_the_size_band() {
    for seed in 0..50 {
        let mut rng = rng_from_seed(900 + seed);
        let n = rng.gen_range(5..50);
        let k = rng.gen_range(1..=5.min(n));
        // Lopsided data so unconstrained k-means would be unbalanced.
        let mut x = random_points(&mut rng, n, 2);
        for p in x.iter_mut().take(n * 3 / 4) {
            p[0] = p[0] * 0.01 + 5.0;
        }
        let r = balanced_kmeans(&x, k, seed, &KMeansOptions::default()).unwrap();
        assert_balanced(&r.sizes(), n);
    }
}

#[test]
fn balanced_semi_supervised_kmeans_respects_band_and_labels() {
    for seed in 0..50 {
        let mut rng = rng_from_seed(1300 + seed);
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(4 * k..40);
        let x = random_points(&mut rng, n, 2);
        // At most one labeled point per cluster keeps every label feasible.
        let mut labeled = vec![None; n];
        for c in 0..k {
            if rng.gen_bool(0.7) {
                labeled[c * 2] = Some(c);
            }
        }
        let r = ss_kmeans_balanced(&x, &labeled, k, seed, &KMeansOptions::default()).unwrap();
        assert_balanced(&r.sizes(), n);
        for (i, l) in labeled.iter().enumerate() {
            if let Some(c) = l {
                assert_eq!(r.assign[i], *c);
            }
        }
    }
}

#[test]
fn kmeans_rejects_bad_input() {
    let x = vec![vec![0.0], vec![1.0]];
    assert!(matches!(kmeans(&x, 0, 0, &KMeansOptions::default()), Err(ClusterError::ZeroClusters)));
    assert!(matches!(
        kmeans(&x, 3, 0, &KMeansOptions::default()),
        Err(ClusterError::TooManyClusters { .. })
    ));
    assert!(matches!(
        ss_kmeans(&x, &[Some(5), None], 2, 0, &KMeansOptions::default()),
        Err(ClusterError::LabelOutOfRange { .. })
    ));
}

#[test]
fn permuted_cluster_ids_score_perfectly() {
    let gt = vec![0, 0, 1, 1, 2, 2, 3, 3];
    let pred = vec![2, 2, 0, 0, 3, 3, 1, 1];
    let m = gcd_accuracy(&pred, &gt, &[0, 1], &[0, 2]).unwrap();
    assert_eq!((m.acc_all, m.acc_known, m.acc_novel), (1.0, 1.0, 1.0));
    assert_eq!(m.n_all, 6);
    assert_eq!(m.n_known, 2);
    assert_eq!(m.n_novel, 4);
}

#[test]
fn accuracy_uses_one_shared_matching() {
    // Clusters 0 and 1 both best match class 0; only one of them can.
    let gt = vec![0, 0, 0, 1];
    let pred = vec![0, 0, 1, 1];
    let m = gcd_accuracy(&pred, &gt, &[0], &[]).unwrap();
    assert_eq!(m.acc_all, 0.75);
    assert!((m.acc_known - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(m.acc_novel, 1.0);
}

proptest! {
    #[test]
    fn accuracy_is_invariant_to_relabeling_clusters(
        gt in vec(0usize..4, 4..30),
        pred_raw in vec(0usize..4, 30),
        perm_seed in 0u64..1000,
    ) {
        let pred = &pred_raw[..gt.len()];
        let mut perm: Vec<usize> = (0..4).collect();
        let mut rng = rng_from_seed(perm_seed);
        for i in (1..4).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let relabeled: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let a = gcd_accuracy(pred, &gt, &[0, 1], &[]).unwrap();
        let b = gcd_accuracy(&relabeled, &gt, &[0, 1], &[]).unwrap();
        prop_assert!((a.acc_all - b.acc_all).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.acc_all));
    }
}
