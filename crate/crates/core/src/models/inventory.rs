//! Inventory models: the positive-cost single-product system
//! `x' = a - ξ(a)` and the production system `x' = (x + z - ξ(a))⁺`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::demand::DemandFamily;
use super::{floor_index, project_next_state, uniform_grid, CostFn};
use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, KernelRow, ModelClass, StationaryPolicy};

const GRID_EPS: f64 = 1e-9;

/// Discretization of the state and action axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_states: usize,
    pub n_actions: usize,
}

impl GridSpec {
    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_states - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcInventorySpec {
    pub kappa: CostFn,
    pub psi: CostFn,
    pub demand: DemandFamily,
    /// Orders are truncated at `max(x, action_cap)`.
    pub action_cap: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl Default for PcInventorySpec {
    fn default() -> Self {
        Self {
            kappa: CostFn::Setup { setup: 1.0, slope: 1.0 },
            psi: CostFn::HoldingShortage { holding: 1.0, shortage: 1.0 },
            demand: DemandFamily::uniform(1.0, 2.0).expect("valid default demand"),
            action_cap: 5.0,
            l: 0.0,
            m: 3.0,
        }
    }
}

impl PcInventorySpec {
    pub fn default_grid() -> GridSpec {
        GridSpec {
            x_min: -10.0,
            x_max: 10.0,
            n_states: 401,
            n_actions: 401,
        }
    }

    pub fn cost(&self, x: f64, a: f64) -> f64 {
        self.kappa.eval(a - x) + self.psi.eval(a)
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if self.kappa.eval(0.0) != 0.0 {
            return Err(Error::Spec("kappa(0) = 0".into()));
        }
        let zs: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
        if zs.windows(2).any(|p| self.kappa.eval(p[1]) < self.kappa.eval(p[0])) {
            return Err(Error::Spec("kappa nondecreasing".into()));
        }
        if (-2000..=2000).any(|k| self.psi.eval(k as f64 * 0.01) < 0.0) {
            return Err(Error::Spec("psi nonnegative".into()));
        }
        if !(self.l <= self.m) || self.action_cap < self.m {
            return Err(Error::Spec("L <= M <= action_cap".into()));
        }
        Ok(())
    }
}

fn action_axis(grid: &GridSpec) -> Result<Vec<f64>> {
    if grid.n_states < 2 || grid.n_actions < 2 || !(grid.n_actions - 1).is_multiple_of(grid.n_states - 1) {
        return Err(Error::Parameter(
            "action grid must refine the state grid: (n_actions - 1) divisible by (n_states - 1)"
                .into(),
        ));
    }
    uniform_grid(grid.x_min, grid.x_max, grid.n_actions)
}

fn check_resolution(demand: &DemandFamily, actions: &[f64], step: f64) -> Result<()> {
    if demand.is_deterministic() {
        return Ok(());
    }
    for &a in actions {
        if demand.has_atom(a) {
            continue;
        }
        let (lo, hi) = demand.support(a);
        if (hi - lo) / step < 4.0 - GRID_EPS {
            return Err(Error::Resolution(format!(
                "demand support [{lo}, {hi}] at a = {a} spans fewer than 4 cells of width {step}"
            )));
        }
    }
    Ok(())
}

/// Grid discretization of the positive-cost inventory system.
pub fn build_pc_inventory(spec: &PcInventorySpec, grid: &GridSpec) -> Result<FiniteMdp> {
    spec.validate()?;
    let states = uniform_grid(grid.x_min, grid.x_max, grid.n_states)?;
    let actions = action_axis(grid)?;
    if spec.l < grid.x_min || spec.m > grid.x_max {
        return Err(Error::Parameter(format!(
            "grid [{}, {}] must contain [L, M] = [{}, {}]",
            grid.x_min, grid.x_max, spec.l, spec.m
        )));
    }
    check_resolution(&spec.demand, &actions, grid.step())?;

    let per_state: Vec<(Vec<usize>, Vec<f64>, Vec<KernelRow>)> = states
        .par_iter()
        .map(|&x| {
            let cap = x.max(spec.action_cap);
            let adm: Vec<usize> = (0..actions.len())
                .filter(|&k| actions[k] >= x - GRID_EPS && actions[k] <= cap + GRID_EPS)
                .collect();
            let cost = adm.iter().map(|&k| spec.cost(x, actions[k])).collect();
            let rows = adm
                .iter()
                .map(|&k| project_next_state(&states, &spec.demand, actions[k]))
                .collect();
            (adm, cost, rows)
        })
        .collect();
    let (mut admissible, mut cost, mut kernel) = (Vec::new(), Vec::new(), Vec::new());
    for (a, c, k) in per_state {
        admissible.push(a);
        cost.push(c);
        kernel.push(k);
    }
    let n = states.len();
    FiniteMdp::new(states, actions, admissible, cost, kernel, vec![1.0; n], ModelClass::PC)
}

/// The order-up-to policy `μ(x) = x` for `x ≥ L`, `μ(x) = y` for `x < L`.
pub fn pc_base_policy(mdp: &FiniteMdp, spec: &PcInventorySpec, y: f64) -> Result<StationaryPolicy> {
    let actions = mdp.actions();
    let nearest = |t: f64| {
        (0..actions.len())
            .min_by(|&i, &j| (actions[i] - t).abs().total_cmp(&(actions[j] - t).abs()))
            .expect("nonempty action grid")
    };
    let target = nearest(y);
    let choice = mdp
        .states()
        .iter()
        .map(|&x| if x >= spec.l - GRID_EPS { nearest(x) } else { target })
        .collect();
    let policy = StationaryPolicy { choice };
    mdp.policy_positions(&policy)?;
    Ok(policy)
}

/// The zero-order policy: order up to 0 below 0, otherwise order nothing.
pub fn pc_zero_order_policy(mdp: &FiniteMdp, spec: &PcInventorySpec) -> Result<StationaryPolicy> {
    let shifted = PcInventorySpec { l: 0.0, ..spec.clone() };
    pc_base_policy(mdp, &shifted, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcProductionSpec {
    pub kappa: CostFn,
    pub psi: CostFn,
    /// Unit sale price.
    pub s: f64,
    /// Must carry a saturation level `L`.
    pub demand: DemandFamily,
    pub theta: f64,
    pub theta_x: f64,
    /// Upper end of `A(0)`; derived when absent.
    #[serde(default)]
    pub a_bar: Option<f64>,
    pub r: f64,
    pub lambda_prime: f64,
}

impl Default for UcProductionSpec {
    fn default() -> Self {
        Self {
            kappa: CostFn::Linear { slope: 1.0 },
            psi: CostFn::Linear { slope: 0.1 },
            s: 3.0,
            demand: DemandFamily::new(
                super::demand::BaseLaw::Uniform { lo: 1.0, hi: 3.0 },
                Some(super::demand::Saturation {
                    level: 2.0,
                    scale_at_zero: 0.5,
                }),
            )
            .expect("valid default demand"),
            theta: 1.5,
            theta_x: 2.5,
            a_bar: None,
            r: 0.5,
            lambda_prime: 0.9,
        }
    }
}

/// Constants implied by a production spec.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcDerived {
    #[serde(rename = "L")]
    pub l: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    #[serde(rename = "L_tilde")]
    pub l_tilde: f64,
    pub a_bar: f64,
    pub saturated_mean: f64,
}

impl UcProductionSpec {
    pub fn default_grid() -> GridSpec {
        GridSpec {
            x_min: 0.0,
            x_max: 15.0,
            n_states: 301,
            n_actions: 301,
        }
    }

    pub fn weight(&self, x: f64) -> f64 {
        (self.r * x).exp()
    }

    /// `E[a ∧ ξ(a)]`.
    pub fn expected_sales(&self, a: f64) -> f64 {
        self.demand.expect(a, |y| y.min(a), &[a])
    }

    pub fn cost(&self, x: f64, a: f64) -> f64 {
        self.kappa.eval(a - x) + self.psi.eval(a) - self.s * self.expected_sales(a)
    }

    /// `∫ w(y) q(dy | x, a)` for the continuous dynamics, by quadrature.
    pub fn drift(&self, a: f64) -> f64 {
        let r = self.r;
        self.demand.expect(a, |xi| (r * (a - xi).max(0.0)).exp(), &[a])
    }

    /// Checks the spec's defining inequalities and returns the derived
    /// constants.
    pub fn derive(&self) -> Result<UcDerived> {
        self.demand.validate()?;
        let l = self
            .demand
            .saturation_level()
            .ok_or_else(|| Error::Spec("demand saturation level L must be set".into()))?;
        if !(self.r > 0.0 && self.theta > 0.0 && self.theta_x > 0.0 && self.s >= 0.0) {
            return Err(Error::Spec("r > 0, theta > 0, theta_x > 0, s >= 0".into()));
        }
        let saturated_mean = self.demand.mean(l);
        if !(self.theta < saturated_mean) {
            return Err(Error::Spec(format!(
                "0 < theta < E[xi(a)] for a >= L (theta = {}, mean = {saturated_mean})",
                self.theta
            )));
        }
        let (r, theta) = (self.r, self.theta);
        let lambda = self.demand.expect(l, |xi| (r * (theta - xi)).exp(), &[]);
        if !(lambda < 1.0) {
            return Err(Error::Spec(format!("lambda = E[exp(r(theta - xi))] < 1 (lambda = {lambda})")));
        }
        if !(self.lambda_prime > lambda && self.lambda_prime < 1.0) {
            return Err(Error::Spec(format!(
                "lambda < lambda' < 1 (lambda = {lambda}, lambda' = {})",
                self.lambda_prime
            )));
        }
        let l_tilde = l.max(-(self.lambda_prime - lambda).ln() / r);
        let needed = (l_tilde + theta).max(l + self.theta_x);
        let a_bar = self.a_bar.unwrap_or(needed);
        if a_bar < needed - GRID_EPS {
            return Err(Error::Spec(format!(
                "a_bar >= (L_tilde + theta) v sup_(0,L)(x + theta_x) = {needed} (a_bar = {a_bar})"
            )));
        }
        Ok(UcDerived {
            l,
            lambda,
            lambda_prime: self.lambda_prime,
            l_tilde,
            a_bar,
            saturated_mean,
        })
    }

    /// Production cap at state `x`.
    pub fn z_cap(&self, x: f64, derived: &UcDerived) -> f64 {
        if x <= GRID_EPS {
            derived.a_bar - x
        } else if x < derived.l - GRID_EPS {
            self.theta_x
        } else {
            self.theta
        }
    }
}

/// Grid discretization of the production system. States are `k·h` on
/// `[0, x_max]`; actions (post-production stock) use the same step and extend
/// far enough to cover every production cap. `n_actions` is ignored.
pub fn build_uc_production(spec: &UcProductionSpec, grid: &GridSpec) -> Result<FiniteMdp> {
    let derived = spec.derive()?;
    if grid.x_min != 0.0 {
        return Err(Error::Parameter("production grids start at 0".into()));
    }
    let states = uniform_grid(0.0, grid.x_max, grid.n_states)?;
    let step = grid.step();
    let reach = grid.x_max + spec.theta.max(spec.theta_x).max(derived.a_bar);
    let n_act = ((reach / step) + GRID_EPS).floor() as usize + 1;
    let actions: Vec<f64> = (0..n_act).map(|k| k as f64 * step).collect();
    check_resolution(&spec.demand, &actions, step)?;

    let per_state: Vec<(Vec<usize>, Vec<f64>, Vec<KernelRow>)> = states
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let z_max = spec.z_cap(x, &derived);
            let top = x + z_max;
            let adm: Vec<usize> = (i..n_act).take_while(|&k| actions[k] <= top + GRID_EPS).collect();
            let cost = adm.iter().map(|&k| spec.cost(x, actions[k])).collect();
            let rows = adm
                .iter()
                .map(|&k| project_next_state(&states, &spec.demand, actions[k]))
                .collect();
            (adm, cost, rows)
        })
        .collect();
    let (mut admissible, mut cost, mut kernel) = (Vec::new(), Vec::new(), Vec::new());
    for (a, c, k) in per_state {
        admissible.push(a);
        cost.push(c);
        kernel.push(k);
    }
    let weight = states.iter().map(|&x| spec.weight(x)).collect();
    FiniteMdp::new(states, actions, admissible, cost, kernel, weight, ModelClass::UC)
}

/// `(ĉ, λ, b)` for which the built grid model satisfies the UC conditions:
/// `ĉ = max |c|/w`, `λ` from the spec, `b = max(1, max_x max_a Σ w q - λ w(x))`.
pub fn uc_model_constants(mdp: &FiniteMdp, derived: &UcDerived) -> (f64, f64, f64) {
    let w = mdp.weight();
    let mut c_hat = 0.0f64;
    let mut b = 1.0f64;
    for s in 0..mdp.n_states() {
        for (c, row) in mdp.costs(s).iter().zip(mdp.rows(s)) {
            c_hat = c_hat.max(c.abs() / w[s]);
            b = b.max(row.expect(w) - derived.lambda * w[s]);
        }
    }
    (c_hat, derived.lambda, b)
}

/// Index of the grid state at or below `x`.
pub fn state_index(mdp: &FiniteMdp, x: f64) -> usize {
    floor_index(mdp.states(), x)
}

/// `E[κ(z + ξ(a))]` by quadrature.
pub fn expected_kappa(kappa: &CostFn, demand: &DemandFamily, a: f64, z: f64) -> f64 {
    let breaks: Vec<f64> = kappa.breakpoints().iter().map(|b| b - z).collect();
    demand.expect(a, |y| kappa.eval(z + y), &breaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_pc() -> (PcInventorySpec, GridSpec) {
        (
            PcInventorySpec::default(),
            GridSpec {
                x_min: -4.0,
                x_max: 6.0,
                n_states: 41,
                n_actions: 41,
            },
        )
    }

    #[test]
    fn pc_rows_and_admissibility() {
        let (spec, grid) = small_pc();
        let mdp = build_pc_inventory(&spec, &grid).unwrap();
        for s in 0..mdp.n_states() {
            let x = mdp.states()[s];
            for &a in mdp.admissible(s) {
                assert!(mdp.actions()[a] >= x - 1e-9);
            }
            for row in mdp.rows(s) {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
        let mu = pc_base_policy(&mdp, &spec, 2.0).unwrap();
        assert_eq!(mu.choice.len(), mdp.n_states());
    }

    #[test]
    fn pc_deterministic_step() {
        let spec = PcInventorySpec {
            demand: DemandFamily::deterministic(0.25).unwrap(),
            ..PcInventorySpec::default()
        };
        let (_, grid) = small_pc();
        let mdp = build_pc_inventory(&spec, &grid).unwrap();
        for s in 1..mdp.n_states() {
            for (&a, row) in mdp.admissible(s).iter().zip(mdp.rows(s)) {
                let e = row.entries();
                assert_eq!(e.len(), 1);
                let target = (mdp.actions()[a] - 0.25).max(-4.0);
                assert!((mdp.states()[e[0].0] - target).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pc_resolution_error() {
        let (spec, _) = small_pc();
        let coarse = GridSpec {
            x_min: -4.0,
            x_max: 6.0,
            n_states: 11,
            n_actions: 11,
        };
        assert!(matches!(build_pc_inventory(&spec, &coarse), Err(Error::Resolution(_))));
    }

    #[test]
    fn uc_default_constants() {
        let d = UcProductionSpec::default().derive().unwrap();
        let lambda = (0.75f64).exp() * ((-0.5f64).exp() - (-1.5f64).exp());
        assert!((d.lambda - lambda).abs() < 1e-10);
        assert!((d.l_tilde - (-(0.9 - lambda).ln() / 0.5)).abs() < 1e-10);
        assert!((d.a_bar - (d.l_tilde + 1.5)).abs() < 1e-12);
    }

    #[test]
    fn uc_spec_errors() {
        let bad = UcProductionSpec {
            theta: 2.5,
            ..UcProductionSpec::default()
        };
        assert!(matches!(bad.derive(), Err(Error::Spec(_))));
        let no_sat = UcProductionSpec {
            demand: DemandFamily::uniform(1.0, 3.0).unwrap(),
            ..UcProductionSpec::default()
        };
        assert!(no_sat.derive().is_err());
    }

    #[test]
    fn uc_sales_closed_form() {
        let spec = UcProductionSpec::default();
        // a ≥ L: ξ ~ U(1,3); E[a ∧ ξ] for a = 2 is ∫_1^2 y/2 + 2·1/2 = 0.75 + 1.
        assert!((spec.expected_sales(2.0) - 1.75).abs() < 1e-10);
        assert!((spec.expected_sales(5.0) - 2.0).abs() < 1e-10);
    }
}
