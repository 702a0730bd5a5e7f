//! Solver for the discounted optimality equation `v_α = T_α v_α`.
//!
//! Iterates are carried in *offset form* `v = g/(1-α) + u` with `u(anchor) = 0`.
//! As `α ↑ 1` the values grow like `1/(1-α)` while everything the vanishing
//! discount analysis needs (relative values, `(1-α) v_α`, residuals) is
//! `O(1)`; the offset form keeps those quantities at full precision instead of
//! recovering them by cancellation.
//!
//! The solver runs plain value iteration from zero first. When the contraction
//! is too slow to finish within the sweep budget it switches to exact
//! evaluation of the greedy policy followed by a Bellman improvement step,
//! which reaches the fixed point in a handful of linear solves.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    greedy_positions, sup_norm, weighted_norm, FiniteMdp, ModelClass, StationaryPolicy, ValueFn,
};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Rounding floor for stopping tests, in units of the iterate's magnitude.
const FLOOR_ULPS: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sup,
    Weighted,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Plain value-iteration sweeps before switching to policy-evaluation steps.
    pub plain_sweeps: usize,
    /// State pinned to zero in the offset form.
    pub anchor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            plain_sweeps: 256,
            anchor: 0,
        }
    }
}

/// Solution of the discounted optimality equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcoeSolution {
    pub alpha: f64,
    /// `v_α` itself.
    pub v: ValueFn,
    /// `(1-α) v_α(anchor)`.
    pub gain: f64,
    /// `v_α - v_α(anchor)`.
    pub relative: Vec<f64>,
    pub anchor: usize,
    pub iterations: usize,
    /// `‖v - T_α v‖` in `norm_used`.
    pub residual: f64,
    pub sup_residual: f64,
    pub norm_used: NormKind,
    /// Stopping threshold actually applied (never below the rounding floor).
    pub tolerance: f64,
}

impl DcoeSolution {
    /// `Q_α(s,k) - v_α(s)` evaluated in offset form.
    pub fn q_gap(&self, mdp: &FiniteMdp, s: usize, k: usize) -> f64 {
        mdp.costs(s)[k] - self.gain + self.alpha * mdp.rows(s)[k].expect(&self.relative)
            - self.relative[s]
    }

    /// `inf_x v_α(x)`, together with `(1-α) inf_x v_α(x)` computed without
    /// cancellation.
    pub fn min_value(&self) -> (f64, f64) {
        let min_u = self.relative.iter().copied().fold(f64::INFINITY, f64::min);
        (
            self.gain / (1.0 - self.alpha) + min_u,
            self.gain + (1.0 - self.alpha) * min_u,
        )
    }
}

/// Discounted value of a stationary policy in offset form.
#[derive(Clone, Debug)]
pub struct PolicyValue {
    pub gain: f64,
    pub relative: Vec<f64>,
    pub anchor: usize,
    pub alpha: f64,
}

impl PolicyValue {
    pub fn values(&self) -> Vec<f64> {
        let level = self.gain / (1.0 - self.alpha);
        self.relative.iter().map(|u| level + u).collect()
    }
}

fn norm_for(mdp: &FiniteMdp) -> NormKind {
    match mdp.model_class() {
        ModelClass::PC => NormKind::Sup,
        ModelClass::UC => NormKind::Weighted,
    }
}

fn norm(kind: NormKind, f: &[f64], w: &[f64]) -> f64 {
    match kind {
        NormKind::Sup => sup_norm(f),
        NormKind::Weighted => weighted_norm(f, w).unwrap_or(f64::INFINITY),
    }
}

fn rounding_floor(u: &[f64], g: f64) -> f64 {
    FLOOR_ULPS * f64::EPSILON * sup_norm(u).max(g.abs()).max(1.0)
}

/// Solves `(I - αP_μ) v = c_μ` in offset form: unknowns are `u` (with
/// `u(anchor) = 0`) and the gain `g`, from `u - αP_μ u + g·1 = c_μ`.
fn evaluate_positions(
    mdp: &FiniteMdp,
    positions: &[usize],
    alpha: f64,
    anchor: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = mdp.n_states();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        let k = positions[s];
        rhs[s] = mdp.costs(s)[k];
        m[(s, s)] += 1.0;
        for (j, p) in mdp.rows(s)[k].iter() {
            m[(s, j)] -= alpha * p;
        }
        m[(s, anchor)] = 1.0;
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("policy evaluation at alpha = {alpha}")))?;
    let g = sol[anchor];
    let mut u: Vec<f64> = sol.iter().copied().collect();
    u[anchor] = 0.0;
    Ok((g, u))
}

/// Exact discounted value of a stationary policy.
pub fn discounted_policy_value(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    alpha: f64,
) -> Result<PolicyValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} not in (0, 1)")));
    }
    let positions = mdp.policy_positions(policy)?;
    let (gain, relative) = evaluate_positions(mdp, &positions, alpha, 0)?;
    Ok(PolicyValue {
        gain,
        relative,
        anchor: 0,
        alpha,
    })
}

/// Keeps the current action unless another is better beyond rounding.
fn improve_positions(mdp: &FiniteMdp, current: &[usize], u: &[f64], alpha: f64) -> Vec<usize> {
    let best = greedy_positions(mdp, u, alpha, 0.0);
    let scale = rounding_floor(u, 0.0);
    (0..mdp.n_states())
        .map(|s| {
            let keep = mdp.q_value(s, current[s], u, alpha);
            let cand = mdp.q_value(s, best[s], u, alpha);
            if cand < keep - scale {
                best[s]
            } else {
                current[s]
            }
        })
        .collect()
}

/// `T_α u - u - g`: the Bellman residual of `v = g/(1-α) + u`.
fn offset_residual(mdp: &FiniteMdp, u: &[f64], g: f64, alpha: f64) -> Vec<f64> {
    let t = mdp.bellman_raw(u, alpha);
    t.iter().zip(u).map(|(ti, ui)| ti - ui - g).collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mdp: &FiniteMdp,
    alpha: f64,
    g: f64,
    u: Vec<f64>,
    anchor: usize,
    iterations: usize,
    kind: NormKind,
    tolerance: f64,
) -> DcoeSolution {
    let r = offset_residual(mdp, &u, g, alpha);
    let level = g / (1.0 - alpha);
    let values: Vec<f64> = u.iter().map(|x| level + x).collect();
    DcoeSolution {
        alpha,
        v: ValueFn {
            values,
            ref_state: anchor,
        },
        gain: g,
        residual: norm(kind, &r, mdp.weight()),
        sup_residual: sup_norm(&r),
        relative: u,
        anchor,
        iterations,
        norm_used: kind,
        tolerance,
    }
}

/// Solves the discounted optimality equation with the default configuration.
pub fn solve_dcoe(mdp: &FiniteMdp, alpha: f64, tol: f64, max_iter: usize) -> Result<DcoeSolution> {
    solve_dcoe_with(
        mdp,
        alpha,
        &SolverConfig {
            tol,
            max_iter,
            ..SolverConfig::default()
        },
    )
}

pub fn solve_dcoe_with(mdp: &FiniteMdp, alpha: f64, cfg: &SolverConfig) -> Result<DcoeSolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} not in (0, 1)")));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Parameter(format!("tol = {} must be positive", cfg.tol)));
    }
    let anchor = cfg.anchor;
    if anchor >= mdp.n_states() {
        return Err(Error::Parameter(format!("anchor {anchor} out of range")));
    }
    let kind = norm_for(mdp);
    let w = mdp.weight();
    let n = mdp.n_states();
    let step_thr = cfg.tol * (1.0 - alpha) / (2.0 * alpha);
    let res_thr = cfg.tol * (1.0 - alpha) / 2.0;

    let mut u = vec![0.0; n];
    let mut g = 0.0;
    let mut iterations = 0;
    let mut last_diff = f64::INFINITY;

    while iterations < cfg.plain_sweeps.min(cfg.max_iter) {
        let t = mdp.bellman_raw(&u, alpha);
        let diff: Vec<f64> = t.iter().zip(&u).map(|(ti, ui)| ti - ui - g).collect();
        let t_anchor = t[anchor];
        g = alpha * g + (1.0 - alpha) * t_anchor;
        u = t.iter().map(|ti| ti - t_anchor).collect();
        iterations += 1;
        last_diff = norm(kind, &diff, w);
        let floor = rounding_floor(&u, g);
        if last_diff <= step_thr.max(floor) {
            return Ok(finish(mdp, alpha, g, u, anchor, iterations, kind, step_thr.max(floor)));
        }
    }

    let mut positions = greedy_positions(mdp, &u, alpha, 0.0);
    while iterations < cfg.max_iter {
        let (gm, um) = evaluate_positions(mdp, &positions, alpha, anchor)?;
        iterations += 1;
        let r = offset_residual(mdp, &um, gm, alpha);
        last_diff = norm(kind, &r, w);
        let floor = rounding_floor(&um, gm);
        let next = improve_positions(mdp, &positions, &um, alpha);
        let stable = next == positions;
        if last_diff <= res_thr.max(floor) || stable {
            return Ok(finish(mdp, alpha, gm, um, anchor, iterations, kind, res_thr.max(floor)));
        }
        u = um;
        g = gm;
        positions = next;
    }

    let level = g / (1.0 - alpha);
    Err(Error::NonConvergence {
        alpha,
        iterations,
        residual: last_diff,
        last_iterate: u.iter().map(|x| level + x).collect(),
    })
}

/// Plain value iteration from zero; returns every iterate `v_0 = 0, v_1, …`.
pub fn value_iteration_trace(mdp: &FiniteMdp, alpha: f64, sweeps: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; mdp.n_states()]];
    for _ in 0..sweeps {
        let next = mdp.bellman_raw(out.last().unwrap(), alpha);
        out.push(next);
    }
    out
}

/// `‖T_α u - T_α v‖_w / ‖u - v‖_w`, or `None` when `u = v`.
pub fn contraction_ratio(mdp: &FiniteMdp, alpha: f64, u: &[f64], v: &[f64]) -> Option<f64> {
    let w = mdp.weight();
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let den = weighted_norm(&d, w).ok()?;
    if den == 0.0 {
        return None;
    }
    let tu = mdp.bellman_raw(u, alpha);
    let tv = mdp.bellman_raw(v, alpha);
    let dt: Vec<f64> = tu.iter().zip(&tv).map(|(a, b)| a - b).collect();
    Some(weighted_norm(&dt, w).ok()? / den)
}

/// Draws a pair of functions uniform on `[-w(s), w(s)]` per coordinate.
pub fn random_function_pair(rng: &mut ChaCha8Rng, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        w.iter().map(|&ws| rng.gen_range(-ws..=ws)).collect()
    };
    let u = draw(rng);
    let v = draw(rng);
    (u, v)
}

/// Largest observed weighted-norm contraction ratio over random pairs; a lower
/// bound witness for the modulus of `T_α` in `‖·‖_w`.
pub fn estimate_contraction_modulus(
    mdp: &FiniteMdp,
    alpha: f64,
    trials: usize,
    rng_seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let (u, v) = random_function_pair(&mut rng, mdp.weight());
        if let Some(r) = contraction_ratio(mdp, alpha, &u, &v) {
            best = best.max(r);
        }
    }
    Ok(best)
}

/// Stationary policy whose discounted value is within `eps` of `v_α`,
/// verified by exact policy evaluation.
pub fn eps_optimal_policy(
    mdp: &FiniteMdp,
    solution: &DcoeSolution,
    eps: f64,
) -> Result<StationaryPolicy> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let alpha = solution.alpha;
    let mut worst = f64::NAN;
    for slack in [eps * (1.0 - alpha) / 2.0, 0.0] {
        let positions = greedy_positions(mdp, &solution.relative, alpha, slack);
        let (gm, um) = evaluate_positions(mdp, &positions, alpha, solution.anchor)?;
        let shift = (gm - solution.gain) / (1.0 - alpha);
        worst = um
            .iter()
            .zip(&solution.relative)
            .map(|(a, b)| shift + a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= eps {
            return Ok(mdp.policy_from_positions(&positions));
        }
    }
    Err(Error::Certification(format!(
        "greedy policy exceeds v_alpha by {worst:e} > eps = {eps:e}"
    )))
}
