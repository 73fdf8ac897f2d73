use hae_core::autodiff::RngStream;
use hae_core::linalg::Matrix;
use hae_core::parallel::Execution;
use hae_core::train::{accuracy, clustering_scores, kmeans, logistic_probe, macro_micro_f1};
use proptest::prelude::*;

fn labels(max_class: usize, len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..max_class, len)
}

fn relabel(xs: &[usize], perm: &[usize]) -> Vec<usize> {
    xs.iter().map(|&x| perm[x]).collect()
}

proptest! {
    #[test]
    fn scores_stay_in_range((truth, pred) in (2usize..40).prop_flat_map(|n| (labels(5, n), labels(5, n)))) {
        let (macro_f1, micro_f1) = macro_micro_f1(&truth, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&macro_f1));
        prop_assert_eq!(micro_f1, accuracy(&truth, &pred).unwrap());
        let s = clustering_scores(&truth, &pred).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s.nmi), "{}", s.nmi);
        prop_assert!((-1.0..=1.0).contains(&s.ari), "{}", s.ari);
        prop_assert!((0.0..=1.0).contains(&s.fmi), "{}", s.fmi);
    }

    #[test]
    fn relabeling_is_invisible(
        (truth, pred) in (2usize..40).prop_flat_map(|n| (labels(5, n), labels(5, n))),
        perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let base = clustering_scores(&truth, &pred).unwrap();
        let moved = clustering_scores(&truth, &relabel(&pred, &perm)).unwrap();
        prop_assert_eq!(base, moved);
        let f1 = macro_micro_f1(&truth, &pred).unwrap();
        prop_assert_eq!(f1, macro_micro_f1(&relabel(&truth, &perm), &relabel(&pred, &perm)).unwrap());
        let own = clustering_scores(&truth, &relabel(&truth, &perm)).unwrap();
        prop_assert_eq!((own.nmi, own.ari, own.fmi), (1.0, 1.0, 1.0));
    }

    #[test]
    fn kmeans_is_seed_deterministic(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let x = Matrix::from_fn(30, 3, |_, _| rng.uniform());
        let a = kmeans(&x, 4, seed, Execution::Parallel).unwrap();
        let b = kmeans(&x, 4, seed, Execution::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.inertia >= 0.0);
        // every point sits at its nearest centroid
        for i in 0..30 {
            let d = |c: usize| -> f64 { x.row(i).iter().zip(a.centroids.row(c)).map(|(p, q)| (p - q) * (p - q)).sum() };
            let own = d(a.assignments[i]);
            prop_assert!((0..4).all(|c| own <= d(c)));
        }
    }
}

#[test]
fn probe_is_at_chance_on_unrelated_labels() {
    let classes = 4;
    let mut accs = Vec::new();
    for seed in 0..20 {
        let mut rng = RngStream::new(seed);
        let x = Matrix::from_fn(400, 8, |_, _| rng.uniform_range(-1.0, 1.0));
        let y: Vec<usize> = (0..400).map(|i| i % classes).collect();
        let mut order: Vec<usize> = (0..400).collect();
        for i in (1..400).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let (train, test) = order.split_at(320);
        let train_y: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let pred = logistic_probe(&x, train, &train_y, test, classes, seed).unwrap();
        let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        accs.push(accuracy(&truth, &pred).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.25).abs() <= 0.05, "{mean}");
}
