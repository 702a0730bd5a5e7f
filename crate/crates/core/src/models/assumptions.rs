//! Numerical checks of the hypotheses imposed on the inventory examples.

use serde::{Deserialize, Serialize};

use super::inventory::{build_pc_inventory, expected_kappa, pc_zero_order_policy, GridSpec};
use super::{PcInventorySpec, UcProductionSpec};
use crate::error::Result;
use crate::vanishing::average_cost_eval;

/// Far-out argument used for tail (liminf) checks.
const FAR: f64 = 1e6;
/// Spacing of the action grids used for sup/inf checks.
const A_STEP: f64 = 1e-2;
/// Half-width of the action range scanned by interval checks.
const A_RANGE: f64 = 50.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ExampleSpec {
    PcInventory(PcInventorySpec),
    UcProduction(UcProductionSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// The quantity the verdict is based on.
    pub witness: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub g_lower_estimate: f64,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, witness: f64, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        passed,
        witness,
        detail,
    }
}

fn a_grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / A_STEP).round() as usize;
    (0..=n).map(|k| lo + k as f64 * A_STEP).collect()
}

/// Average cost of the zero-order policy on the grid instance, from state 0.
/// It bounds the optimal average cost from above, which makes it a
/// conservative stand-in for the lower optimal cost in the tail checks.
pub fn bootstrap_g_lower(spec: &PcInventorySpec, grid: &GridSpec, horizon: usize) -> Result<f64> {
    let mdp = build_pc_inventory(spec, grid)?;
    let policy = pc_zero_order_policy(&mdp, spec)?;
    let j = average_cost_eval(&mdp, &policy, horizon)?;
    Ok(j[mdp.nearest_state(0.0)])
}

pub fn verify_example_assumptions(spec: &ExampleSpec, g_lower_estimate: f64) -> AssumptionReport {
    let checks = match spec {
        ExampleSpec::PcInventory(s) => pc_checks(s, g_lower_estimate),
        ExampleSpec::UcProduction(s) => uc_checks(s),
    };
    AssumptionReport {
        g_lower_estimate,
        checks,
    }
}

fn demand_checks(
    demand: &super::DemandFamily,
    actions: &[f64],
    names: (&str, &str, &str),
    kappa_term: Option<&super::CostFn>,
) -> Vec<AssumptionCheck> {
    let mut out = Vec::new();
    let ui = actions
        .iter()
        .map(|&a| demand.tail_expectation(a, FAR))
        .fold(0.0, f64::max);
    out.push(check(
        names.0,
        ui <= 1e-8,
        ui,
        format!("sup_a E[xi(a) 1(xi(a) > {FAR:e})]"),
    ));
    let min_mean = actions.iter().map(|&a| demand.mean(a)).fold(f64::INFINITY, f64::min);
    let mut detail = "inf_a E[xi(a)]".to_string();
    let mut finite = true;
    if let Some(kappa) = kappa_term {
        let sup_k = actions
            .iter()
            .step_by(10)
            .map(|&a| expected_kappa(kappa, demand, a, 1.0))
            .fold(0.0, f64::max);
        finite = sup_k.is_finite();
        detail = format!("{detail}; sup_a E[kappa(1 + xi(a))] = {sup_k}");
    }
    out.push(check(names.1, min_mean > 0.0 && finite, min_mean, detail));
    let bound = actions.iter().map(|&a| demand.density_bound(a)).fold(0.0, f64::max);
    let reach = actions.iter().map(|&a| demand.support(a).1).fold(0.0, f64::max);
    out.push(check(
        names.2,
        bound.is_finite() && reach.is_finite(),
        bound,
        format!("sup_a density bound; support union within [0, {reach}]"),
    ));
    out
}

fn pc_checks(spec: &PcInventorySpec, g: f64) -> Vec<AssumptionCheck> {
    let mut out = Vec::new();
    let zs = a_grid(0.0, A_RANGE);
    let k0 = spec.kappa.eval(0.0);
    let monotone = zs.windows(2).all(|p| spec.kappa.eval(p[1]) >= spec.kappa.eval(p[0]));
    out.push(check(
        "kappa_monotone_zero_at_zero",
        monotone && k0 == 0.0,
        k0,
        "kappa(0) and monotonicity on [0, 50]".into(),
    ));
    let tail = spec
        .kappa
        .eval(FAR)
        .min(spec.psi.eval(FAR))
        .min(spec.psi.eval(-FAR));
    out.push(check(
        "cost_tails_exceed_g_lower",
        tail > g,
        tail,
        format!("min(kappa(z), psi(a), psi(-a)) at {FAR:e} vs estimate {g}"),
    ));
    let actions = a_grid(-A_RANGE, A_RANGE);
    out.extend(demand_checks(
        &spec.demand,
        &actions,
        (
            "demand_uniformly_integrable",
            "demand_mean_positive_kappa_expectation_finite",
            "demand_density_bounded_support_bounded",
        ),
        Some(&spec.kappa),
    ));
    let probes = [-A_RANGE, spec.l, spec.m, A_RANGE];
    let coercive = probes
        .iter()
        .map(|&x| spec.cost(x, x.max(0.0) + FAR))
        .fold(f64::INFINITY, f64::min);
    out.push(check(
        "cost_coercive_in_action",
        coercive > 1e3,
        coercive,
        format!("min over probe states of c(x, x + {FAR:e})"),
    ));
    out
}

fn uc_checks(spec: &UcProductionSpec) -> Vec<AssumptionCheck> {
    let mut out = Vec::new();
    let derived = spec.derive();
    out.push(match &derived {
        Ok(d) => check(
            "production_spec_inequalities",
            true,
            d.lambda,
            format!(
                "theta < mean {}; lambda = {} < lambda' = {}; L_tilde = {}; a_bar = {}",
                d.saturated_mean, d.lambda, d.lambda_prime, d.l_tilde, d.a_bar
            ),
        ),
        Err(e) => check("production_spec_inequalities", false, f64::NAN, e.to_string()),
    });
    let l = spec.demand.saturation_level().unwrap_or(f64::NAN);
    let ref_support = spec.demand.support(l);
    let drift = [l, l + 1.0, l + 10.0, l + 1e3]
        .iter()
        .map(|&a| {
            let s = spec.demand.support(a);
            (s.0 - ref_support.0).abs().max((s.1 - ref_support.1).abs())
        })
        .fold(0.0, f64::max);
    out.push(check(
        "demand_constant_above_saturation",
        l.is_finite() && drift == 0.0,
        drift,
        "max support change over a >= L".into(),
    ));
    let actions = a_grid(A_STEP, A_RANGE);
    out.extend(demand_checks(
        &spec.demand,
        &actions,
        (
            "demand_uniformly_integrable",
            "demand_mean_positive",
            "demand_density_bounded",
        ),
        None,
    ));
    out
}
