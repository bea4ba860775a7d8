use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gapmin::learners::TrainSpec;
use gapmin::model::{DomainTag, Sample};
use gapmin::multitask::{
    parameter_sharing_train, task_covariance_train, task_weighting_train, TaskRelation, TaskSet,
};
use gapmin::verify::{random_covariance, SLACK_TOL};

fn tasks() -> impl Strategy<Value = TaskSet> {
    (2usize..4, 1usize..4).prop_flat_map(|(k, d)| {
        prop::collection::vec(
            (3usize..12).prop_flat_map(move |n| {
                (
                    prop::collection::vec(prop::collection::vec(-1.5f64..1.5, d), n),
                    prop::collection::vec(-2.0f64..2.0, n),
                )
            }),
            k,
        )
        .prop_map(|parts| {
            TaskSet::new(
                parts
                    .into_iter()
                    .enumerate()
                    .map(|(t, (xs, ys))| Sample::from_rows(xs, ys, DomainTag::Task(t)).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn task_weighting_bound_holds(ts in tasks(), eta in prop::sample::select(vec![0.0, 0.5]), lambda in 0.1f64..5.0) {
        let k = ts.len();
        let rel = TaskRelation::uniform(k).unwrap();
        for j in 0..k {
            let sol = task_weighting_train(&ts, j, &rel, &TrainSpec::squared(lambda), eta).unwrap();
            prop_assert!(sol.gap.nabla >= -1e-9);
            prop_assert!(sol.gap.min_slack() >= -SLACK_TOL, "{:?}", sol.gap);
        }
    }

    #[test]
    fn certified_multitask_bounds_hold(ts in tasks(), l0 in 0.1f64..5.0, l in 0.1f64..5.0, seed in 0u64..100) {
        let spec = TrainSpec::squared(1.0);
        let sol = parameter_sharing_train(&ts, l0, l, &spec).unwrap();
        prop_assert!(sol.gap.nabla >= -1e-9);
        prop_assert!(sol.gap.min_certified_slack() >= -SLACK_TOL, "{:?}", sol.gap);
        for b in &sol.gap.bounds {
            prop_assert!(b.certified >= b.bound - 1e-12);
        }

        let cov = random_covariance(&mut ChaCha8Rng::seed_from_u64(seed), ts.len()).unwrap();
        let sol = task_covariance_train(&ts, &cov, &spec).unwrap();
        prop_assert!(sol.gap.nabla >= -1e-9);
        prop_assert!(sol.gap.min_certified_slack() >= -SLACK_TOL, "{:?}", sol.gap);
    }

    #[test]
    fn covariance_solution_is_permutation_equivariant(ts in tasks(), seed in 0u64..100) {
        let k = ts.len();
        let cov = random_covariance(&mut ChaCha8Rng::seed_from_u64(seed), k).unwrap();
        let spec = TrainSpec::squared(1.0);
        let a = task_covariance_train(&ts, &cov, &spec).unwrap();
        let rev = TaskSet::new(ts.tasks().iter().rev().cloned().collect()).unwrap();
        let omega: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| cov_entry(&cov, k - 1 - i, k - 1 - j)).collect())
            .collect();
        let cov_rev = gapmin::multitask::CovarianceSpec::new(omega).unwrap();
        let b = task_covariance_train(&rev, &cov_rev, &spec).unwrap();
        for (p, q) in a.hypotheses.iter().zip(b.hypotheses.iter().rev()) {
            for (x, y) in p.w.iter().zip(&q.w) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()));
            }
        }
    }
}

/// Recovers Omega from its precision by inverting the small matrix.
fn cov_entry(cov: &gapmin::multitask::CovarianceSpec, i: usize, j: usize) -> f64 {
    let k = cov.k();
    let p = nalgebra::DMatrix::from_fn(k, k, |a, b| cov.precision(a, b));
    p.try_inverse().unwrap()[(i, j)]
}
