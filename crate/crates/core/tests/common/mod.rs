#![allow(dead_code)]

use acoi::{FiniteMdp, KernelRow, ModelClass};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random model with every action admissible everywhere.
pub fn random_mdp(rng: &mut ChaCha8Rng, n: usize, m: usize, class: ModelClass) -> FiniteMdp {
    let kernel = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let mut row: Vec<f64> =
                        (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 }).collect();
                    if row.iter().all(|&p| p == 0.0) {
                        row[rng.gen_range(0..n)] = 1.0;
                    }
                    let t: f64 = row.iter().sum();
                    row.iter_mut().for_each(|p| *p /= t);
                    KernelRow::from_dense(&row)
                })
                .collect()
        })
        .collect();
    let cost = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    FiniteMdp::new(
        (0..n).map(|i| i as f64).collect(),
        (0..m).map(|a| a as f64).collect(),
        vec![(0..m).collect(); n],
        cost,
        kernel,
        vec![1.0; n],
        class,
    )
    .unwrap()
}

pub fn with_cost_shift(mdp: &FiniteMdp, k: f64) -> FiniteMdp {
    let n = mdp.n_states();
    FiniteMdp::new(
        mdp.states().to_vec(),
        mdp.actions().to_vec(),
        (0..n).map(|s| mdp.admissible(s).to_vec()).collect(),
        (0..n).map(|s| mdp.costs(s).iter().map(|c| c + k).collect()).collect(),
        (0..n).map(|s| mdp.rows(s).to_vec()).collect(),
        mdp.weight().to_vec(),
        mdp.model_class(),
    )
    .unwrap()
}

pub fn two_cycle() -> FiniteMdp {
    FiniteMdp::new(
        vec![0.0, 1.0],
        vec![0.0],
        vec![vec![0], vec![0]],
        vec![vec![0.0], vec![2.0]],
        vec![vec![KernelRow::point_mass(1)], vec![KernelRow::point_mass(0)]],
        vec![1.0, 1.0],
        ModelClass::PC,
    )
    .unwrap()
}
