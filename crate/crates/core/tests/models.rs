use acoi::models::{
    build_circle_mdp, build_pc_inventory, build_uc_production, DemandFamily, GridSpec, PcInventorySpec,
    UcProductionSpec,
};
use acoi::FiniteMdp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_pc() -> (PcInventorySpec, GridSpec) {
    (
        PcInventorySpec::default(),
        GridSpec {
            x_min: -5.0,
            x_max: 8.0,
            n_states: 131,
            n_actions: 131,
        },
    )
}

fn assert_stochastic(mdp: &FiniteMdp) {
    for s in 0..mdp.n_states() {
        assert!(!mdp.admissible(s).is_empty());
        for row in mdp.rows(s) {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|(y, p)| y < mdp.n_states() && p >= 0.0));
        }
    }
}

#[test]
fn pc_rows_are_stochastic_and_never_move_mass_up() {
    let (spec, grid) = small_pc();
    let mdp = build_pc_inventory(&spec, &grid).unwrap();
    assert_stochastic(&mdp);
    let step = grid.step();
    let xs = mdp.states();
    for s in 0..mdp.n_states() {
        for (&a, row) in mdp.admissible(s).iter().zip(mdp.rows(s)) {
            let a = mdp.actions()[a];
            let cont = a - spec.demand.mean(a);
            if cont - 2.0 < grid.x_min || a > grid.x_max {
                continue;
            }
            let disc = row.expect(xs);
            assert!(disc <= cont + 1e-9, "a = {a}: {disc} > {cont}");
            assert!(disc >= cont - step - 1e-9);
        }
    }
}

#[test]
fn pc_costs_match_the_spec() {
    let (spec, grid) = small_pc();
    let mdp = build_pc_inventory(&spec, &grid).unwrap();
    for s in (0..mdp.n_states()).step_by(17) {
        let x = mdp.states()[s];
        for (&a, &c) in mdp.admissible(s).iter().zip(mdp.costs(s)) {
            assert!((c - spec.cost(x, mdp.actions()[a])).abs() < 1e-12);
        }
    }
}

#[test]
fn pc_grid_checks() {
    let (spec, grid) = small_pc();
    let bad_refine = GridSpec { n_actions: 140, ..grid };
    assert!(build_pc_inventory(&spec, &bad_refine).is_err());
    let coarse = GridSpec { n_states: 14, n_actions: 14, ..grid };
    assert!(build_pc_inventory(&spec, &coarse).is_err());
    let narrow = GridSpec { x_min: 1.0, ..grid };
    assert!(build_pc_inventory(&spec, &narrow).is_err());
}

#[test]
fn uc_rows_are_stochastic() {
    let spec = UcProductionSpec::default();
    let grid = GridSpec {
        x_min: 0.0,
        x_max: 8.0,
        n_states: 81,
        n_actions: 81,
    };
    let mdp = build_uc_production(&spec, &grid).unwrap();
    assert_stochastic(&mdp);
    assert!(mdp.weight().iter().zip(mdp.states()).all(|(w, x)| (w - (spec.r * x).exp()).abs() < 1e-9 * w));
}

#[test]
fn uc_lambda_agrees_with_monte_carlo() {
    let spec = UcProductionSpec::default();
    let d = spec.derive().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| (spec.r * (spec.theta - spec.demand.sample(d.l, &mut rng))).exp())
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - d.lambda).abs() < 4.0 * (var / n as f64).sqrt());
    assert!(d.lambda < d.lambda_prime && d.l_tilde >= d.l);
}

#[test]
fn uc_rejects_invalid_constants() {
    let too_high = UcProductionSpec {
        theta: 10.0,
        ..UcProductionSpec::default()
    };
    assert!(too_high.derive().is_err());
    let no_sat = UcProductionSpec {
        demand: DemandFamily::uniform(1.0, 3.0).unwrap(),
        ..UcProductionSpec::default()
    };
    assert!(no_sat.derive().is_err());
}

#[test]
fn demand_sample_mean_matches() {
    let demand = DemandFamily::uniform(1.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mean = (0..n).map(|_| demand.sample(1.0, &mut rng)).sum::<f64>() / n as f64;
    // Standard deviation of U(1, 2) is 1/√12.
    assert!((mean - 1.5).abs() < 4.0 / (12.0f64 * n as f64).sqrt());
    assert!((demand.mean(1.0) - 1.5).abs() < 1e-9);
    assert_eq!(demand.cdf(1.0, 0.5), 0.0);
    assert_eq!(demand.cdf(1.0, 2.5), 1.0);
}

fn assert_round_trip(mdp: &FiniteMdp) {
    let once = FiniteMdp::from_json(&mdp.to_json().unwrap()).unwrap();
    assert!(once.to_document() == mdp.to_document(), "round trip changed the model");
}

#[test]
fn circle_and_json_round_trip() {
    let mdp = build_circle_mdp(12).unwrap();
    assert_stochastic(&mdp);
    assert_round_trip(&mdp);
    let (spec, grid) = small_pc();
    assert_round_trip(&build_pc_inventory(&spec, &grid).unwrap());
}
