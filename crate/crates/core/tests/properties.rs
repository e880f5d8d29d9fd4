use cf_assign::autodiff::Matrix;
use cf_assign::baselines::{exhaustive, gsd, is_feasible, random_assignment, DEFAULT_BUDGET};
use cf_assign::gnn::{build_graph, init_params, recurrent_assign, GnnConfig};
use cf_assign::scenario::Scenario;
use cf_assign::training::{connection_violation, discreteness_penalty, sum_rate};
use cf_assign::Execution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gains(k: usize, n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(0.01f64..10.0, k * n).prop_map(move |v| Matrix::from_fn(k, n, |r, c| v[r * n + c]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn runs_are_column_stochastic(seed in any::<u64>(), g in prop::collection::vec(-3.0f64..3.0, 20)) {
        let sc = Scenario::small();
        let config = GnnConfig { hidden: 6, message: 3, ..GnnConfig::default() };
        let topo = build_graph(&sc, config.topology).unwrap();
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        let g_hat = Matrix::from_fn(sc.n_users, sc.n_aps, |r, c| g[r * sc.n_aps + c]);
        let a = recurrent_assign(&config, &params, &g_hat, &topo, sc.max_served_users, sc.min_serving_aps).unwrap();
        prop_assert_eq!(a.runs.len(), sc.max_served_users);
        for run in &a.runs {
            for n in 0..sc.n_aps {
                let col: f64 = (0..sc.n_users).map(|k| run.get(k, n)).sum();
                prop_assert!((col - 1.0).abs() <= 1e-9);
            }
            prop_assert!(run.data().iter().all(|x| (0.0..=1.0).contains(x)));
        }
        prop_assert!(a.combined.data().iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
        let (p, total) = discreteness_penalty(&a.runs).unwrap();
        let bound = sc.max_served_users as f64 * (sc.n_users as f64).ln();
        prop_assert!(p.iter().all(|&x| (0.0..=bound + 1e-9).contains(&x)));
        prop_assert!(total >= 0.0);
    }

    #[test]
    fn sum_rate_is_monotone_in_the_assignment(g in gains(4, 5), extra in 0usize..20) {
        let s = Matrix::from_fn(4, 5, |r, c| if (r + c) % 3 == 0 { 1.0 } else { 0.0 });
        let mut more = s.clone();
        more.set(extra / 5, extra % 5, 1.0);
        prop_assert!(sum_rate(&g, &more, 1.0).unwrap() >= sum_rate(&g, &s, 1.0).unwrap());
    }

    #[test]
    fn connection_deficit_vanishes_exactly_when_covered(s in prop::collection::vec(0.0f64..1.0, 20), l in 1usize..4) {
        let m = Matrix::from_fn(4, 5, |r, c| s[r * 5 + c]);
        let (per_user, total) = connection_violation(&m, l);
        for (k, d) in per_user.iter().enumerate() {
            let served: f64 = m.row(k).iter().sum();
            prop_assert_eq!(*d == 0.0, served >= l as f64);
        }
        prop_assert!((total - per_user.iter().sum::<f64>()).abs() <= 1e-12);
    }

    #[test]
    fn exhaustive_dominates_heuristics(g in gains(3, 4), seed in any::<u64>()) {
        let best = exhaustive(&g, 2, 2, 1.0, true, DEFAULT_BUDGET, Execution::Sequential).unwrap();
        let best = best.found().unwrap();
        prop_assert!(best.feasible);
        let greedy = gsd(&g, 2, 2, 1.0).unwrap();
        prop_assert!(is_feasible(&greedy.s, 2, 2));
        prop_assert!(greedy.sum_rate <= best.sum_rate + 1e-9);
        let random = random_assignment(&g, 2, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        if random.feasible {
            prop_assert!(random.sum_rate <= best.sum_rate + 1e-9);
        }
    }
}
