//! Discretized unit-circle model: three actions, each spreading the next
//! state uniformly over a half circle starting at angle `2aπ/3`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, KernelRow, ModelClass};

pub fn build_circle_mdp(n_states: usize) -> Result<FiniteMdp> {
    build_circle_mdp_with_cost(n_states, |_, _| 0.0)
}

/// Circle model with a bounded cost `c(angle, action)`.
pub fn build_circle_mdp_with_cost(
    n_states: usize,
    cost: impl Fn(f64, usize) -> f64,
) -> Result<FiniteMdp> {
    if n_states == 0 || !n_states.is_multiple_of(6) {
        return Err(Error::Parameter(format!(
            "circle grid size must be a positive multiple of 6, got {n_states}"
        )));
    }
    let n = n_states;
    let half = n / 2;
    let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let rows: Vec<KernelRow> = (0..3)
        .map(|a| {
            let start = a * n / 3;
            KernelRow::from_pairs((0..half).map(|j| ((start + j) % n, 1.0 / half as f64)).collect())
        })
        .collect();
    let costs: Vec<Vec<f64>> = angles.iter().map(|&t| (0..3).map(|a| cost(t, a)).collect()).collect();
    FiniteMdp::new(
        angles,
        vec![0.0, 1.0, 2.0],
        vec![vec![0, 1, 2]; n],
        costs,
        vec![rows; n],
        vec![1.0; n],
        ModelClass::PC,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_half_circles_covering_everything() {
        let mdp = build_circle_mdp(12).unwrap();
        let mut covered = [false; 12];
        for row in mdp.rows(0) {
            assert_eq!(row.entries().len(), 6);
            for (y, p) in row.iter() {
                assert!((p - 1.0 / 6.0).abs() < 1e-15);
                covered[y] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
        assert!(build_circle_mdp(10).is_err());
    }
}
