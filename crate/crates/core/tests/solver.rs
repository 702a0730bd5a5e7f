mod common;

use acoi::mdp::{bellman_apply, sup_norm};
use acoi::solver::{
    discounted_policy_value, eps_optimal_policy, estimate_contraction_modulus, solve_dcoe, value_iteration_trace,
};
use acoi::{ModelClass, StationaryPolicy, ValueFn};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn two_cycle_closed_form() {
    let mdp = common::two_cycle();
    for alpha in [0.3, 0.9, 0.999] {
        let sol = solve_dcoe(&mdp, alpha, 1e-12, 1_000_000).unwrap();
        let d = 1.0 - alpha * alpha;
        assert!((sol.v.values[0] - 2.0 * alpha / d).abs() < 1e-8);
        assert!((sol.v.values[1] - 2.0 / d).abs() < 1e-8);
    }
}

#[test]
fn value_iteration_approaches_fixed_point() {
    let mdp = common::two_cycle();
    let trace = value_iteration_trace(&mdp, 0.5, 60);
    let sol = solve_dcoe(&mdp, 0.5, 1e-12, 1000).unwrap();
    let last = trace.last().unwrap();
    assert!(last.iter().zip(&sol.v.values).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn rejects_invalid_discount() {
    let mdp = common::two_cycle();
    assert!(solve_dcoe(&mdp, 1.0, 1e-10, 10).is_err());
    assert!(solve_dcoe(&mdp, 0.0, 1e-10, 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_is_a_fixed_point(seed in 0u64..10_000, n in 1usize..6, m in 1usize..4, alpha in 0.1f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, n, m, ModelClass::PC);
        let sol = solve_dcoe(&mdp, alpha, 1e-11, 1_000_000).unwrap();
        let tv = bellman_apply(&mdp, &ValueFn::new(sol.v.values.clone(), 0).unwrap(), alpha).unwrap();
        let gap: Vec<f64> = tv.values.iter().zip(&sol.v.values).map(|(a, b)| a - b).collect();
        prop_assert!(sup_norm(&gap) <= 1e-8 * (1.0 + sup_norm(&sol.v.values)));
    }

    #[test]
    fn bellman_contracts(seed in 0u64..10_000, n in 1usize..6, m in 1usize..4, alpha in 0.1f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, n, m, ModelClass::PC);
        let modulus = estimate_contraction_modulus(&mdp, alpha, 20, seed).unwrap();
        prop_assert!(modulus <= alpha + 1e-12);
    }

    #[test]
    fn cost_shift_moves_values_by_the_discounted_constant(seed in 0u64..10_000, k in -3.0f64..3.0, alpha in 0.1f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, 4, 2, ModelClass::UC);
        let shifted = common::with_cost_shift(&mdp, k);
        let a = solve_dcoe(&mdp, alpha, 1e-12, 1_000_000).unwrap();
        let b = solve_dcoe(&shifted, alpha, 1e-12, 1_000_000).unwrap();
        for (x, y) in a.v.values.iter().zip(&b.v.values) {
            prop_assert!((y - x - k / (1.0 - alpha)).abs() < 1e-7 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn greedy_policy_value_matches_optimum(seed in 0u64..10_000, alpha in 0.1f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, 5, 3, ModelClass::PC);
        let sol = solve_dcoe(&mdp, alpha, 1e-12, 1_000_000).unwrap();
        let policy: StationaryPolicy = eps_optimal_policy(&mdp, &sol, 1e-9).unwrap();
        let pv = discounted_policy_value(&mdp, &policy, alpha).unwrap().values();
        for (p, v) in pv.iter().zip(&sol.v.values) {
            prop_assert!((p - v).abs() < 1e-7 * (1.0 + v.abs()));
        }
    }
}
