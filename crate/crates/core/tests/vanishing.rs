mod common;

use acoi::vanishing::{
    acoi_residual, acoi_to_policy, average_cost_eval, certify_run, run_schedule, trace_csv, CertificateSource,
    DiscountSchedule, VanishingReport,
};
use acoi::{FiniteMdp, KernelRow, ModelClass};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn self_loop_certificate() {
    let mdp = FiniteMdp::new(
        vec![0.0],
        vec![0.0],
        vec![vec![0]],
        vec![vec![1.0]],
        vec![vec![KernelRow::point_mass(0)]],
        vec![1.0],
        ModelClass::PC,
    )
    .unwrap();
    let run = run_schedule(&mdp, &DiscountSchedule::geometric(20, None).unwrap(), ModelClass::PC, 1e-10).unwrap();
    let (cert, _) = certify_run(&mdp, &run, 1e-6).unwrap();
    assert!((cert.rho - 1.0).abs() < 1e-9);
    assert!(cert.verdict);
}

#[test]
fn two_cycle_certificate() {
    let mdp = common::two_cycle();
    let run = run_schedule(&mdp, &DiscountSchedule::geometric(20, None).unwrap(), ModelClass::PC, 1e-10).unwrap();
    let (cert, source) = certify_run(&mdp, &run, 1e-6).unwrap();
    assert!((cert.rho - 1.0).abs() < 1e-5, "{}", cert.rho);
    assert!(cert.residuals.iter().all(|r| r.abs() <= 1e-5));
    let report = VanishingReport::new(&run, &cert, source);
    let text = serde_json::to_string(&report).unwrap();
    let back: VanishingReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.verdict, report.verdict);
    assert_eq!(back.certificate_source, source);
}

#[test]
fn extrapolated_pair_repairs_the_discount_defect() {
    // Two states, cost only in state 1, slow switching: the envelope pair
    // carries an O(1 - α) defect, the extrapolated pair does not.
    let mdp = FiniteMdp::new(
        vec![0.0, 1.0],
        vec![0.0],
        vec![vec![0], vec![0]],
        vec![vec![0.0], vec![1.0]],
        vec![
            vec![KernelRow::from_pairs(vec![(0, 0.9), (1, 0.1)])],
            vec![KernelRow::from_pairs(vec![(0, 0.1), (1, 0.9)])],
        ],
        vec![1.0, 1.0],
        ModelClass::PC,
    )
    .unwrap();
    let run = run_schedule(&mdp, &DiscountSchedule::geometric(20, None).unwrap(), ModelClass::PC, 1e-12).unwrap();
    let raw = acoi_residual(&mdp, run.rho_star, &run.h_lower, 1e-6).unwrap();
    let (cert, source) = certify_run(&mdp, &run, 1e-6).unwrap();
    assert!(!raw.verdict);
    assert_eq!(source, CertificateSource::Extrapolated);
    assert!(cert.verdict && (cert.rho - 0.5).abs() < 1e-6, "{} {:?} {}", cert.rho, cert.residuals, raw.min_residual);
    let policy = acoi_to_policy(&mdp, &cert, 0.0).unwrap();
    let j = average_cost_eval(&mdp, &policy, 10_000).unwrap();
    assert!(j.iter().all(|x| (x - 0.5).abs() < 1e-9));
}

#[test]
fn trace_has_one_row_per_alpha() {
    let mdp = common::two_cycle();
    let run = run_schedule(&mdp, &DiscountSchedule::geometric(5, None).unwrap(), ModelClass::PC, 1e-10).unwrap();
    let csv = trace_csv(&run, &[0, 1]);
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("alpha,"));
}

#[test]
fn schedule_validation() {
    assert!(DiscountSchedule::new(vec![0.5, 0.9], None).is_err());
    assert!(DiscountSchedule::new(vec![0.5, 0.4, 0.9], None).is_err());
    assert!(DiscountSchedule::new(vec![0.5, 0.9, 1.0], None).is_err());
    assert!(DiscountSchedule::new(vec![0.5, 0.9, 0.99], None).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn envelopes_sandwich_the_tail(seed in 0u64..10_000, n in 2usize..6, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, n, m, ModelClass::PC);
        let run = run_schedule(&mdp, &DiscountSchedule::geometric(12, None).unwrap(), ModelClass::PC, 1e-10).unwrap();
        for i in 0..run.h_per_alpha.len() {
            for later in &run.h_per_alpha[i..] {
                for ((lo, h), hi) in run.lower_env[i].iter().zip(later).zip(&run.upper_env[i]) {
                    prop_assert!(lo <= h && h <= hi);
                }
            }
        }
        prop_assert!(run.h_lower.iter().zip(&run.h_upper).all(|(l, u)| l <= u));
        prop_assert!(run.h_per_alpha.iter().flatten().all(|&h| h >= -1e-9));
    }

    #[test]
    fn uc_mode_pins_the_reference_state(seed in 0u64..10_000, r in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, 4, 2, ModelClass::UC);
        let run = run_schedule(&mdp, &DiscountSchedule::geometric(8, Some(r)).unwrap(), ModelClass::UC, 1e-10).unwrap();
        prop_assert!(run.h_per_alpha.iter().all(|h| h[r] == 0.0));
    }

    #[test]
    fn cost_shift_moves_rho_only(seed in 0u64..10_000, k in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = common::random_mdp(&mut rng, 3, 2, ModelClass::PC);
        let shifted = common::with_cost_shift(&mdp, k);
        let sched = DiscountSchedule::geometric(10, None).unwrap();
        let a = run_schedule(&mdp, &sched, ModelClass::PC, 1e-11).unwrap();
        let b = run_schedule(&shifted, &sched, ModelClass::PC, 1e-11).unwrap();
        prop_assert!((b.rho_star - a.rho_star - k).abs() < 1e-7);
        for (x, y) in a.h_lower.iter().zip(&b.h_lower) {
            prop_assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()));
        }
    }
}
