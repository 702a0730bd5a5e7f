//! Invariant models (kernel depends on the action only) and their partially
//! invariant extension.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, KernelRow, ModelClass};

/// Invariance is only required on `X̂ = {x : w(x) ≤ b/(λ' - λ)}`; outside it
/// each state carries its own rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialInvariance {
    pub b: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    /// `outside[x][a]`: dense row used when `x ∉ X̂`.
    pub outside: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantModelSpec {
    /// `action_kernel[a]`: dense row `q(·|a)`.
    pub action_kernel: Vec<Vec<f64>>,
    /// `cost[x][a]`.
    pub cost: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
    pub ref_state: usize,
    #[serde(default)]
    pub partial: Option<PartialInvariance>,
}

/// A built invariant model with its analytic relative-value bounds.
#[derive(Clone, Debug)]
pub struct InvariantBuild {
    pub mdp: FiniteMdp,
    pub c_hat: f64,
    /// `ĉ (w(x) + w(x̄))`.
    pub h_bound: Vec<f64>,
    /// `sup_a |c(x,a) - c(x̄,a)|`, valid on the invariant region.
    pub cost_gap: Vec<f64>,
    /// States of `X̂` (all states for a fully invariant model).
    pub region: Vec<usize>,
}

impl InvariantBuild {
    /// `max_x h_bound(x)/w(x)`.
    pub fn weighted_bound(&self) -> f64 {
        self.h_bound
            .iter()
            .zip(self.mdp.weight())
            .map(|(h, w)| h / w)
            .fold(0.0, f64::max)
    }
}

impl InvariantModelSpec {
    pub fn n_states(&self) -> usize {
        self.weight.len()
    }

    /// `X̂`; every state when the model is fully invariant.
    pub fn region(&self) -> Vec<usize> {
        match &self.partial {
            None => (0..self.n_states()).collect(),
            Some(p) => {
                let cut = p.b / (p.lambda_prime - p.lambda);
                (0..self.n_states()).filter(|&x| self.weight[x] <= cut).collect()
            }
        }
    }

    /// The builtin partially invariant chain on `0..=20` with `w = e^{0.3x}`.
    pub fn partial_builtin() -> Self {
        let n = 21;
        let weight: Vec<f64> = (0..n).map(|x| (0.3 * x as f64).exp()).collect();
        let n_actions = 3;
        let action_kernel = (0..n_actions)
            .map(|a| {
                let mut row = vec![0.0; n];
                row[a..a + 3].fill(1.0 / 3.0);
                row
            })
            .collect();
        let cost = (0..n)
            .map(|x| (0..n_actions).map(|a| 0.2 * x as f64 + a as f64).collect())
            .collect();
        let outside = (0..n)
            .map(|x| {
                let mut row = vec![0.0; n];
                row[x.saturating_sub(1)] += 0.8;
                row[(x + 1).min(n - 1)] += 0.2;
                vec![row; n_actions]
            })
            .collect();
        Self {
            action_kernel,
            cost,
            weight,
            ref_state: 0,
            partial: Some(PartialInvariance {
                b: 2.5,
                lambda: 0.9,
                lambda_prime: 0.95,
                outside,
            }),
        }
    }

    /// A random fully invariant model with costs bounded by `w`.
    pub fn random(seed: u64, n_states: usize, n_actions: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight: Vec<f64> = (0..n_states).map(|_| 1.0 + 4.0 * rng.gen::<f64>()).collect();
        let action_kernel = (0..n_actions)
            .map(|_| {
                let raw: Vec<f64> = (0..n_states)
                    .map(|_| if rng.gen::<f64>() < 0.7 { rng.gen::<f64>() } else { 0.0 })
                    .collect();
                let total: f64 = raw.iter().sum();
                if total == 0.0 {
                    let mut row = vec![0.0; n_states];
                    row[rng.gen_range(0..n_states)] = 1.0;
                    row
                } else {
                    raw.into_iter().map(|p| p / total).collect()
                }
            })
            .collect();
        let cost = weight
            .iter()
            .map(|&w| (0..n_actions).map(|_| w * (2.0 * rng.gen::<f64>() - 1.0)).collect())
            .collect();
        Self {
            action_kernel,
            cost,
            weight,
            ref_state: rng.gen_range(0..n_states),
            partial: None,
        }
    }
}

pub fn build_invariant(spec: &InvariantModelSpec) -> Result<InvariantBuild> {
    let n = spec.n_states();
    let m = spec.action_kernel.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidModel("empty invariant model".into()));
    }
    if spec.ref_state >= n {
        return Err(Error::Parameter(format!("reference state {} out of range", spec.ref_state)));
    }
    if spec.cost.len() != n || spec.cost.iter().any(|c| c.len() != m) {
        return Err(Error::InvalidModel("cost table must be n_states x n_actions".into()));
    }
    if let Some(p) = &spec.partial {
        if !(0.0 <= p.lambda && p.lambda < p.lambda_prime && p.lambda_prime < 1.0 && p.b >= 0.0) {
            return Err(Error::InvalidModel("need 0 <= lambda < lambda' < 1 and b >= 0".into()));
        }
        if p.outside.len() != n || p.outside.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel("outside kernels must be n_states x n_actions".into()));
        }
    }
    let region = spec.region();
    let in_region = |x: usize| region.binary_search(&x).is_ok();
    let kernel: Vec<Vec<KernelRow>> = (0..n)
        .map(|x| {
            (0..m)
                .map(|a| match &spec.partial {
                    Some(p) if !in_region(x) => KernelRow::from_dense(&p.outside[x][a]),
                    _ => KernelRow::from_dense(&spec.action_kernel[a]),
                })
                .collect()
        })
        .collect();
    let mdp = FiniteMdp::new(
        (0..n).map(|x| x as f64).collect(),
        (0..m).map(|a| a as f64).collect(),
        vec![(0..m).collect(); n],
        spec.cost.clone(),
        kernel,
        spec.weight.clone(),
        ModelClass::UC,
    )?;
    let c_hat = (0..n)
        .flat_map(|x| spec.cost[x].iter().map(move |c| c.abs() / spec.weight[x]))
        .fold(0.0, f64::max);
    let wr = spec.weight[spec.ref_state];
    let h_bound = spec.weight.iter().map(|w| c_hat * (w + wr)).collect();
    let cost_gap = (0..n)
        .map(|x| {
            (0..m)
                .map(|a| (spec.cost[x][a] - spec.cost[spec.ref_state][a]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(InvariantBuild {
        mdp,
        c_hat,
        h_bound,
        cost_gap,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_region_and_drift() {
        let spec = InvariantModelSpec::partial_builtin();
        let built = build_invariant(&spec).unwrap();
        assert_eq!(built.region, (0..=13).collect::<Vec<_>>());
        let report = crate::mdp::check_uc_model(&built.mdp, 0.9, 2.5, built.c_hat).unwrap();
        assert!(report.holds, "{report:?}");
        let w = built.mdp.weight();
        for x in 14..21 {
            for row in built.mdp.rows(x) {
                assert!(row.expect(w) <= 0.95 * w[x] + 1e-12);
            }
        }
    }

    #[test]
    fn x_independent_cost_gives_zero_gap() {
        let mut spec = InvariantModelSpec::random(3, 4, 2);
        let first = spec.cost[0].clone();
        for c in spec.cost.iter_mut() {
            *c = first.clone();
        }
        spec.weight = vec![1.0; 4];
        let built = build_invariant(&spec).unwrap();
        assert!(built.cost_gap.iter().all(|&g| g == 0.0));
    }
}
