//! Monte Carlo over the continuous inventory dynamics and the pathwise
//! bounds used to control relative value functions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::solver::DcoeSolution;
use crate::models::inventory::expected_kappa;
use crate::models::{CostFn, DemandFamily, ExampleSpec, PcInventorySpec, UcProductionSpec};
use crate::vanishing::VanishingDiscountRun;

pub const DEFAULT_CAP: usize = 1_000_000;
/// Standard normal quantile for a two-sided 99% interval.
pub const Z_99: f64 = 2.575_829_303_548_901;
/// Largest tolerated share of censored paths.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;
/// Spacing of the grids used for sups and infs over real intervals.
pub const SUP_GRID_STEP: f64 = 1e-3;
const BISECTION_TOL: f64 = 1e-9;
const ADMISSIBILITY_TOL: f64 = 1e-12;

/// Two-sided normal quantile for the supported confidence levels.
pub fn z_for_level(level: f64) -> Result<f64> {
    const TABLE: [(f64, f64); 4] = [
        (0.90, 1.644_853_626_951_472),
        (0.95, 1.959_963_984_540_054),
        (0.99, Z_99),
        (0.999, 3.290_526_731_491_926),
    ];
    TABLE
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-12)
        .map(|&(_, z)| z)
        .ok_or_else(|| Error::Parameter(format!("unsupported confidence level {level}")))
}

/// State-feedback rules for the continuous models. Actions are post-order
/// stock levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PolicyRule {
    /// `a = x` for `x ≥ level`, `a = target` otherwise.
    BaseStock { level: f64, target: f64 },
    /// `a = max(x, target)`.
    OrderUpTo { target: f64 },
    /// `a = x`.
    NoOrder,
    /// `a = x + z` with a fixed production amount.
    FixedProduction { z: f64 },
}

impl PolicyRule {
    pub fn action(&self, x: f64) -> f64 {
        match *self {
            PolicyRule::BaseStock { level, target } => {
                if x >= level {
                    x
                } else {
                    target
                }
            }
            PolicyRule::OrderUpTo { target } => x.max(target),
            PolicyRule::NoOrder => x,
            PolicyRule::FixedProduction { z } => x + z,
        }
    }
}

/// Stopping sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stop", rename_all = "snake_case")]
pub enum StopRule {
    /// `τ = inf{n ≥ 0 : x_n < level}`.
    Below { level: f64 },
    /// `τ̄ = inf{n ≥ 0 : x_n = 0}`.
    AtZero,
}

impl StopRule {
    pub fn stops(&self, x: f64) -> bool {
        match *self {
            StopRule::Below { level } => x < level,
            StopRule::AtZero => x <= 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub x: f64,
    pub a: f64,
    pub c: f64,
}

/// One transition of the continuous model: validated action, stage cost and
/// next state.
fn step(spec: &ExampleSpec, policy: &PolicyRule, x: f64, xi: impl FnOnce(f64) -> f64, k: usize) -> Result<(f64, f64, f64)> {
    let a = policy.action(x);
    match spec {
        ExampleSpec::PcInventory(s) => {
            if !(a >= x - ADMISSIBILITY_TOL) {
                return Err(Error::Policy {
                    step: k,
                    reason: format!("action {a} below state {x}"),
                });
            }
            Ok((a, s.cost(x, a), a - xi(a)))
        }
        ExampleSpec::UcProduction(s) => {
            let derived = s.derive()?;
            let z = a - x;
            let cap = s.z_cap(x, &derived);
            if !(z >= -ADMISSIBILITY_TOL && z <= cap + ADMISSIBILITY_TOL) {
                return Err(Error::Policy {
                    step: k,
                    reason: format!("production {z} outside [0, {cap}] at state {x}"),
                });
            }
            Ok((a, s.cost(x, a), (a - xi(a)).max(0.0)))
        }
    }
}

fn demand(spec: &ExampleSpec) -> &DemandFamily {
    match spec {
        ExampleSpec::PcInventory(s) => &s.demand,
        ExampleSpec::UcProduction(s) => &s.demand,
    }
}

fn stream(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// `(x_k, a_k, c_k)` for `k < horizon`; deterministic given the seed.
pub fn simulate_trajectory(
    spec: &ExampleSpec,
    policy: &PolicyRule,
    x0: f64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<PathStep>> {
    let mut rng = stream(seed, 0);
    let d = demand(spec);
    let mut x = x0;
    let mut path = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let (a, c, next) = step(spec, policy, x, |a| d.sample(a, &mut rng), k)?;
        path.push(PathStep { x, a, c });
        x = next;
    }
    Ok(path)
}

/// Kahan-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimeReport {
    pub start_state: f64,
    pub n_reps: usize,
    pub censored: usize,
    pub mean_tau: f64,
    pub ci_halfwidth: f64,
    /// `E[Σ_{n<τ} c(x_n, a_n)]`.
    pub mean_cost_to_tau: f64,
    /// `E[κ(a_τ - x_τ)]` with `a_τ` the policy's action at the stopped state.
    pub mean_kappa_term: f64,
    /// `E[c(x_τ, a_τ)]`.
    pub mean_terminal_cost: f64,
    /// Upper bound on `E[τ]`, when one applies to the stopping rule.
    pub bound_rhs: Option<f64>,
    pub bound_satisfied: bool,
}

impl StoppingTimeReport {
    /// Attaches a bound on `E[τ]`; satisfied when the upper CI end is below it.
    pub fn with_bound(mut self, rhs: f64) -> Self {
        self.bound_rhs = Some(rhs);
        self.bound_satisfied = self.mean_tau + self.ci_halfwidth <= rhs;
        self
    }

    pub fn ci_upper(&self) -> f64 {
        self.mean_tau + self.ci_halfwidth
    }
}

struct Replicate {
    tau: usize,
    cost: f64,
    kappa: f64,
    terminal: f64,
}

fn kappa_of(spec: &ExampleSpec) -> &CostFn {
    match spec {
        ExampleSpec::PcInventory(s) => &s.kappa,
        ExampleSpec::UcProduction(s) => &s.kappa,
    }
}

/// Monte Carlo estimate of `E[τ]` with a 99% normal interval, plus the cost
/// accumulated before stopping and the terminal terms. The default bound is
/// the comparison bound: `2(x0 - L + D_x)/Δ_x` for `Below` on the
/// positive-cost model, `2(x0 + D)/Δ` for `AtZero` on the production model.
pub fn hitting_time(
    spec: &ExampleSpec,
    policy: &PolicyRule,
    x0: f64,
    stop: StopRule,
    n_reps: usize,
    cap: usize,
    seed: u64,
) -> Result<StoppingTimeReport> {
    hitting_time_with_z(spec, policy, x0, stop, n_reps, cap, seed, Z_99)
}

#[allow(clippy::too_many_arguments)]
pub fn hitting_time_with_z(
    spec: &ExampleSpec,
    policy: &PolicyRule,
    x0: f64,
    stop: StopRule,
    n_reps: usize,
    cap: usize,
    seed: u64,
    z: f64,
) -> Result<StoppingTimeReport> {
    if n_reps == 0 || cap == 0 {
        return Err(Error::Parameter("n_reps and cap must be positive".into()));
    }
    if let ExampleSpec::UcProduction(s) = spec {
        s.derive()?;
    }
    let d = demand(spec);
    let kappa = kappa_of(spec);
    let runs: Vec<Option<Replicate>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Option<Replicate>> {
            let mut rng = stream(seed, rep);
            let mut x = x0;
            let mut cost = Kahan::default();
            for k in 0..=cap {
                if stop.stops(x) {
                    let (a, c, _) = step(spec, policy, x, |_| 0.0, k)?;
                    return Ok(Some(Replicate {
                        tau: k,
                        cost: cost.sum,
                        kappa: kappa.eval(a - x),
                        terminal: c,
                    }));
                }
                if k == cap {
                    break;
                }
                let (_, c, next) = step(spec, policy, x, |a| d.sample(a, &mut rng), k)?;
                cost.add(c);
                x = next;
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;

    let censored = runs.iter().filter(|r| r.is_none()).count();
    if censored as f64 > MAX_CENSORED_FRACTION * n_reps as f64 {
        return Err(Error::Censoring {
            censored,
            total: n_reps,
            cap,
        });
    }
    let done: Vec<&Replicate> = runs.iter().flatten().collect();
    let n = done.len() as f64;
    let (mut t, mut t2, mut c, mut k, mut term) = (
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
    );
    for r in &done {
        let tau = r.tau as f64;
        t.add(tau);
        t2.add(tau * tau);
        c.add(r.cost);
        k.add(r.kappa);
        term.add(r.terminal);
    }
    let mean = t.sum / n;
    let var = if done.len() > 1 {
        ((t2.sum - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let report = StoppingTimeReport {
        start_state: x0,
        n_reps,
        censored,
        mean_tau: mean,
        ci_halfwidth: z * (var / n).sqrt(),
        mean_cost_to_tau: c.sum / n,
        mean_kappa_term: k.sum / n,
        mean_terminal_cost: term.sum / n,
        bound_rhs: None,
        bound_satisfied: false,
    };
    let rhs = match (spec, stop) {
        (ExampleSpec::PcInventory(s), StopRule::Below { level }) if level == s.l => {
            let hb = compute_h(s, x0.max(s.l))?;
            Some(2.0 * (x0 - s.l + hb.d_x) / hb.delta_x)
        }
        (ExampleSpec::UcProduction(s), StopRule::AtZero) => {
            let (delta, dd) = production_hitting_constants(s)?;
            Some(2.0 * (x0 + dd) / delta)
        }
        _ => None,
    };
    Ok(match rhs {
        Some(r) => report.with_bound(r),
        None => report,
    })
}

/// Points of `[lo, hi]` at which an `a`-indexed demand family can attain
/// its sup/inf: a `SUP_GRID_STEP` grid below the saturation level, plus the
/// level itself and the endpoints.
fn family_points(d: &DemandFamily, lo: f64, hi: f64) -> Vec<f64> {
    let varying_hi = match d.saturation {
        Some(s) => hi.min(s.level),
        None => lo,
    };
    let mut pts = vec![lo, hi];
    if varying_hi > lo {
        let n = ((varying_hi - lo) / SUP_GRID_STEP).ceil() as usize;
        pts.extend((0..=n).map(|k| (lo + k as f64 * SUP_GRID_STEP).min(varying_hi)));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `inf_{y ∈ [lo,hi]} E[ξ(y)]`: grid search then golden-section refinement.
fn min_mean(d: &DemandFamily, lo: f64, hi: f64) -> f64 {
    let pts = family_points(d, lo, hi);
    let (i_best, mut best) = pts
        .iter()
        .map(|&y| d.mean(y))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty points");
    let (mut a, mut b) = (
        pts[i_best.saturating_sub(1)],
        pts[(i_best + 1).min(pts.len() - 1)],
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        if b - a < 1e-12 {
            break;
        }
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if d.mean(c) < d.mean(e) {
            b = e;
        } else {
            a = c;
        }
    }
    best = best.min(d.mean(0.5 * (a + b)));
    best
}

/// Smallest `D` with `sup_{y ∈ pts} E[ξ(y) 1(ξ(y) > D)] ≤ target`, by
/// bisection on the right-continuous tail function.
fn smallest_tail_level(d: &DemandFamily, pts: &[f64], target: f64) -> f64 {
    let tail = |level: f64| {
        pts.iter()
            .map(|&y| d.tail_expectation(y, level))
            .fold(0.0, f64::max)
    };
    let mut hi = pts.iter().map(|&y| d.support(y).1).fold(0.0, f64::max);
    let mut lo = 0.0;
    if tail(lo) <= target {
        return lo;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if tail(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `(Δ, D)` for the no-production hitting time of state 0 on `[0, L̃]`.
pub fn production_hitting_constants(spec: &UcProductionSpec) -> Result<(f64, f64)> {
    let derived = spec.derive()?;
    let delta = min_mean(&spec.demand, 0.0, derived.l_tilde);
    if !(delta > 0.0) {
        return Err(Error::Assumption(format!("inf mean demand {delta} must be positive")));
    }
    let pts = family_points(&spec.demand, 0.0, derived.l_tilde);
    Ok((delta, smallest_tail_level(&spec.demand, &pts, 0.5 * delta)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HComponents {
    /// `sup_{y ∈ I} ψ(y)`.
    pub psi_sup: f64,
    /// `sup_{y ∈ I} E[κ(M - L + ξ(y))]`.
    pub kappa_expectation_sup: f64,
    /// `2(x - L + D_x)/Δ_x`, zero below `L`.
    pub hitting_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBound {
    pub x: f64,
    #[serde(rename = "Delta_x")]
    pub delta_x: f64,
    #[serde(rename = "D_x")]
    pub d_x: f64,
    #[serde(rename = "H_value")]
    pub h_value: f64,
    pub components: HComponents,
}

/// `H(x)`: `κ(M - x) + sup_{[L,M]} ψ` below `L`, and
/// `2(x - L + D_x)/Δ_x · {sup_I ψ + sup_I E[κ(M - L + ξ)]}` with
/// `I = [L, x ∨ M]` otherwise.
pub fn compute_h(spec: &PcInventorySpec, x: f64) -> Result<HBound> {
    let lo = spec.l;
    let hi = if x < spec.l { spec.m } else { x.max(spec.m) };
    let d = &spec.demand;
    let delta_x = min_mean(d, lo, hi);
    if !(delta_x > 0.0) {
        return Err(Error::Assumption(format!(
            "inf of mean demand over [{lo}, {hi}] is {delta_x}, must be positive"
        )));
    }
    let pts = family_points(d, lo, hi);
    let d_x = smallest_tail_level(d, &pts, 0.5 * delta_x);
    let psi_sup = spec.psi.sup_on(lo, hi);
    let shift = spec.m - spec.l;
    let kappa_expectation_sup = pts
        .iter()
        .map(|&y| expected_kappa(&spec.kappa, d, y, shift))
        .fold(0.0, f64::max);
    let (hitting_factor, h_value) = if x < spec.l {
        (0.0, spec.kappa.eval(spec.m - x) + spec.psi.sup_on(spec.l, spec.m))
    } else {
        let f = 2.0 * (x - spec.l + d_x) / delta_x;
        (f, f * (psi_sup + kappa_expectation_sup))
    };
    if !h_value.is_finite() {
        return Err(Error::Assumption(format!("H({x}) is not finite")));
    }
    Ok(HBound {
        x,
        delta_x,
        d_x,
        h_value,
        components: HComponents {
            psi_sup,
            kappa_expectation_sup,
            hitting_factor,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBound {
    pub state: usize,
    pub x: f64,
    /// `ε̄ + H(x) + slack`.
    pub bound: f64,
    /// `max_α h_α(x)` over the whole schedule.
    pub h_max: f64,
    /// `max_α h_α(x)` over the schedule tail (last half).
    pub h_max_tail: f64,
    pub margin: f64,
    pub margin_tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HBoundReport {
    pub eps_bar: f64,
    pub slack: f64,
    pub probes: Vec<ProbeBound>,
    /// No violation at any schedule point.
    pub all_ok: bool,
    /// No violation over the schedule tail.
    pub tail_ok: bool,
}

pub fn verify_h_bound(
    run: &VanishingDiscountRun,
    spec: &PcInventorySpec,
    eps_bar: f64,
    probe_states: &[usize],
) -> Result<HBoundReport> {
    verify_h_bound_with(run, spec, eps_bar, probe_states, 0.0, 1.0)
}

/// As [`verify_h_bound`], with an additive grid slack and a factor applied
/// to `H` (a factor below 1 tightens the bound, for harness self-tests).
pub fn verify_h_bound_with(
    run: &VanishingDiscountRun,
    spec: &PcInventorySpec,
    eps_bar: f64,
    probe_states: &[usize],
    slack: f64,
    h_factor: f64,
) -> Result<HBoundReport> {
    let n = run.states.len();
    let tail_start = run.h_per_alpha.len() / 2;
    let mut probes = Vec::new();
    for &s in probe_states {
        if s >= n {
            return Err(Error::Parameter(format!("probe state {s} out of range")));
        }
        let x = run.states[s];
        let h = compute_h(spec, x)?;
        let bound = eps_bar + h_factor * h.h_value + slack;
        let h_max = run.h_per_alpha.iter().map(|v| v[s]).fold(f64::NEG_INFINITY, f64::max);
        let h_max_tail = run.h_per_alpha[tail_start..]
            .iter()
            .map(|v| v[s])
            .fold(f64::NEG_INFINITY, f64::max);
        probes.push(ProbeBound {
            state: s,
            x,
            bound,
            h_max,
            h_max_tail,
            margin: bound - h_max,
            margin_tail: bound - h_max_tail,
        });
    }
    Ok(HBoundReport {
        eps_bar,
        slack,
        all_ok: probes.iter().all(|p| p.margin >= 0.0),
        tail_ok: probes.iter().all(|p| p.margin_tail >= 0.0),
        probes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub x: f64,
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub inequality: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub samples: Vec<DriftSample>,
    pub worst_margin: f64,
    pub passed: bool,
}

/// One-step drift inequalities at `n_samples` equispaced states of
/// `x_range` (and, for production, at three production levels each):
/// the comparison drift of `Z = (x - L + D)⁺` for the positive-cost model,
/// and `∫ w dq ≤ λ w + 1` (`x ≥ L`) and `≤ λ' w` (`x ≥ L̃`) for production.
pub fn verify_comparison_drift(
    spec: &ExampleSpec,
    x_range: (f64, f64),
    n_samples: usize,
) -> Result<DriftReport> {
    if n_samples == 0 || !(x_range.1 >= x_range.0) {
        return Err(Error::Parameter("need n_samples >= 1 and a nonempty range".into()));
    }
    let xs: Vec<f64> = if n_samples == 1 {
        vec![x_range.0]
    } else {
        (0..n_samples)
            .map(|k| x_range.0 + (x_range.1 - x_range.0) * k as f64 / (n_samples - 1) as f64)
            .collect()
    };
    let mut samples = Vec::new();
    match spec {
        ExampleSpec::PcInventory(s) => {
            let top = x_range.1.max(s.m);
            let hb = compute_h(s, top)?;
            let (delta, dd) = (hb.delta_x, hb.d_x);
            let z = |x: f64| (x - s.l + dd).max(0.0);
            for &x in &xs {
                let (a, rhs, name) = if x >= s.l {
                    (x, z(x) - 0.5 * delta, "decrease by half the mean")
                } else {
                    (s.m, z(x) + s.m - s.l + dd, "bounded increase after refill")
                };
                let lhs = s.demand.expect(a, |xi| z(a - xi), &[a - s.l + dd]);
                samples.push(DriftSample {
                    x,
                    a,
                    lhs,
                    rhs,
                    margin: rhs - lhs,
                    inequality: name.into(),
                });
            }
        }
        ExampleSpec::UcProduction(s) => {
            let d = s.derive()?;
            for &x in &xs {
                if x < d.l {
                    continue;
                }
                let w = s.weight(x);
                for frac in [0.0, 0.5, 1.0] {
                    let a = x + frac * s.theta;
                    let lhs = s.drift(a);
                    let mut push = |rhs: f64, name: &str| {
                        samples.push(DriftSample {
                            x,
                            a,
                            lhs,
                            rhs,
                            margin: rhs - lhs,
                            inequality: name.into(),
                        })
                    };
                    push(d.lambda * w + 1.0, "lambda w + 1");
                    if x >= d.l_tilde {
                        push(d.lambda_prime * w, "lambda' w");
                    }
                }
            }
        }
    }
    let worst_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(DriftReport {
        passed: samples.iter().all(|s| s.margin >= -1e-8),
        samples,
        worst_margin,
    })
}

/// `y_α`: the order-up-to level in `[L, M]` minimizing `Σ_y v_α(y) q(y|a)`
/// on a positive-cost inventory grid, read off the lowest grid state (whose
/// admissible set contains every action of `[L, M]` when the cap is at
/// least `M`).
pub fn y_alpha(mdp: &FiniteMdp, solution: &DcoeSolution, l: f64, m: f64) -> Result<f64> {
    let s = (0..mdp.n_states())
        .min_by(|&a, &b| mdp.states()[a].total_cmp(&mdp.states()[b]))
        .ok_or_else(|| Error::InvalidModel("empty model".into()))?;
    let actions = mdp.actions();
    mdp.admissible(s)
        .iter()
        .zip(mdp.rows(s))
        .filter(|(&a, _)| actions[a] >= l - 1e-12 && actions[a] <= m + 1e-12)
        .map(|(&a, row)| (actions[a], row.expect(&solution.relative)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, _)| a)
        .ok_or_else(|| Error::Domain(format!("no admissible action in [{l}, {m}] at the lowest state")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedBoundRow {
    pub alpha: f64,
    pub y_alpha: f64,
    pub state: usize,
    pub x: f64,
    pub h_alpha: f64,
    /// `ε̄ + E[Σ_{n<τ} c(x_n, a_n) + c(x_τ, y_α)]` under the base-stock rule.
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedBoundReport {
    pub eps_bar: f64,
    pub slack: f64,
    pub rows: Vec<StoppedBoundRow>,
    pub passed: bool,
}

/// Checks `h_α(x) ≤ ε̄ + E[Σ_{n<τ} c + c(x_τ, y_α)] + slack` for every
/// schedule-tail α (last half) and probe, simulating the continuous model
/// under `a = x` above `L` and `a = y_α` below, stopped on entering `x < L`.
#[allow(clippy::too_many_arguments)]
pub fn verify_stopped_cost_bound(
    run: &VanishingDiscountRun,
    mdp: &FiniteMdp,
    spec: &PcInventorySpec,
    eps_bar: f64,
    probe_states: &[usize],
    n_reps: usize,
    slack: f64,
    seed: u64,
) -> Result<StoppedBoundReport> {
    let ex = ExampleSpec::PcInventory(spec.clone());
    let tail_start = run.h_per_alpha.len() / 2;
    let mut rows = Vec::new();
    for i in tail_start..run.h_per_alpha.len() {
        let sol = &run.v_per_alpha[i];
        let y = y_alpha(mdp, sol, spec.l, spec.m)?;
        let policy = PolicyRule::BaseStock {
            level: spec.l,
            target: y,
        };
        for &s in probe_states {
            let x = *run
                .states
                .get(s)
                .ok_or_else(|| Error::Parameter(format!("probe state {s} out of range")))?;
            let r = hitting_time(&ex, &policy, x, StopRule::Below { level: spec.l }, n_reps, DEFAULT_CAP, seed)?;
            let rhs = eps_bar + r.mean_cost_to_tau + r.mean_terminal_cost;
            let h = run.h_per_alpha[i][s];
            rows.push(StoppedBoundRow {
                alpha: sol.alpha,
                y_alpha: y,
                state: s,
                x,
                h_alpha: h,
                rhs,
                margin: rhs + slack - h,
            });
        }
    }
    Ok(StoppedBoundReport {
        eps_bar,
        slack,
        passed: rows.iter().all(|r| r.margin >= 0.0),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(demand: DemandFamily) -> ExampleSpec {
        ExampleSpec::PcInventory(PcInventorySpec {
            demand,
            ..PcInventorySpec::default()
        })
    }

    #[test]
    fn deterministic_path_closed_form() {
        let spec = pc(DemandFamily::deterministic(0.5).unwrap());
        let path = simulate_trajectory(&spec, &PolicyRule::NoOrder, 4.0, 6, 1).unwrap();
        for (k, p) in path.iter().enumerate() {
            assert_eq!(p.x, 4.0 - 0.5 * k as f64);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let spec = pc(DemandFamily::uniform(1.0, 2.0).unwrap());
        let policy = PolicyRule::BaseStock { level: 0.0, target: 2.0 };
        let a = simulate_trajectory(&spec, &policy, 3.0, 50, 9).unwrap();
        let b = simulate_trajectory(&spec, &policy, 3.0, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&spec, &policy, 3.0, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inadmissible_policy_reported() {
        let spec = pc(DemandFamily::uniform(1.0, 2.0).unwrap());
        let bad = PolicyRule::FixedProduction { z: -1.0 };
        assert!(matches!(
            simulate_trajectory(&spec, &bad, 0.0, 3, 0),
            Err(Error::Policy { step: 0, .. })
        ));
    }

    #[test]
    fn deterministic_hitting_time_exact() {
        let spec = pc(DemandFamily::deterministic(0.5).unwrap());
        let policy = PolicyRule::BaseStock { level: 0.0, target: 1.0 };
        let r = hitting_time(&spec, &policy, 5.0, StopRule::Below { level: 0.0 }, 100, 1000, 3).unwrap();
        assert_eq!(r.mean_tau, 11.0);
        assert_eq!(r.ci_halfwidth, 0.0);
        let r0 = hitting_time(&spec, &policy, -1.0, StopRule::Below { level: 0.0 }, 10, 10, 3).unwrap();
        assert_eq!(r0.mean_tau, 0.0);
    }

    #[test]
    fn censoring_error() {
        let spec = pc(DemandFamily::uniform(1.0, 2.0).unwrap());
        let policy = PolicyRule::NoOrder;
        assert!(matches!(
            hitting_time(&spec, &policy, 50.0, StopRule::Below { level: 0.0 }, 100, 10, 1),
            Err(Error::Censoring { .. })
        ));
    }

    #[test]
    fn h_below_l_closed_form() {
        let spec = PcInventorySpec::default();
        let h = compute_h(&spec, -2.0).unwrap();
        // κ(3 + 2) + sup_{[0,3]} |y| = 6 + 3.
        assert!((h.h_value - 9.0).abs() < 1e-12);
        let h5 = compute_h(&spec, 5.0).unwrap();
        assert!((h5.delta_x - 1.5).abs() < 1e-12);
        assert!((h5.d_x - 2.5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn drift_margins_nonnegative() {
        let r = verify_comparison_drift(
            &ExampleSpec::PcInventory(PcInventorySpec::default()),
            (-3.0, 8.0),
            23,
        )
        .unwrap();
        assert!(r.passed, "{}", r.worst_margin);
        let r = verify_comparison_drift(
            &ExampleSpec::UcProduction(UcProductionSpec::default()),
            (0.0, 12.0),
            25,
        )
        .unwrap();
        assert!(r.passed, "{}", r.worst_margin);
    }
}
