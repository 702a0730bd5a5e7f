//! Vanishing-discount pipeline: relative value functions along a discount
//! schedule, their tail envelopes, the optimal-average-cost estimate, and
//! ACOI certificates with policy extraction.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{greedy_positions, weighted_norm, FiniteMdp, ModelClass, StationaryPolicy};
use crate::solver::{solve_dcoe_with, DcoeSolution, SolverConfig, DEFAULT_MAX_ITER};

pub const DEFAULT_SCHEDULE_POINTS: usize = 20;
pub const DEFAULT_HORIZON: usize = 100_000;
pub const DEFAULT_TAIL_WINDOW: usize = 3;

/// Strictly increasing discount factors in `(0,1)` with an optional reference
/// state (required in UC mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscountSchedule {
    alphas: Vec<f64>,
    ref_state: Option<usize>,
}

impl DiscountSchedule {
    pub fn new(alphas: Vec<f64>, ref_state: Option<usize>) -> Result<Self> {
        if alphas.len() < 3 {
            return Err(Error::Parameter(format!(
                "schedule needs at least 3 points, got {}",
                alphas.len()
            )));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Parameter("schedule entries must lie in (0,1)".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("schedule must be strictly increasing".into()));
        }
        Ok(Self { alphas, ref_state })
    }

    /// `α_n = 1 - 2^{-n}` for `n = 1..=n_points`.
    pub fn geometric(n_points: usize, ref_state: Option<usize>) -> Result<Self> {
        Self::new(
            (1..=n_points).map(|n| 1.0 - 0.5f64.powi(n as i32)).collect(),
            ref_state,
        )
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn ref_state(&self) -> Option<usize> {
        self.ref_state
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Number of final schedule points whose tail envelope defines
    /// `h_lower` / `h_upper`.
    pub tail_window: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            solver_tol: crate::solver::DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            tail_window: DEFAULT_TAIL_WINDOW,
        }
    }
}

/// Everything computed along a discount schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingDiscountRun {
    pub schedule: DiscountSchedule,
    pub mode: ModelClass,
    /// State coordinates of the model the run was computed on.
    pub states: Vec<f64>,
    pub v_per_alpha: Vec<DcoeSolution>,
    /// `v_α - v_α(x̄)` (UC) or `v_α - m_α` (PC).
    pub h_per_alpha: Vec<Vec<f64>>,
    /// `m_α = inf_x v_α(x)`, PC mode only.
    pub m_per_alpha: Option<Vec<f64>>,
    /// `(1-α_n) v_{α_n}(x̄)` (UC) or `(1-α_n) m_{α_n}` (PC).
    pub rho_sequence: Vec<f64>,
    /// `lower_env[n] = min_{m≥n} h_m`.
    pub lower_env: Vec<Vec<f64>>,
    /// `upper_env[n] = max_{m≥n} h_m`.
    pub upper_env: Vec<Vec<f64>>,
    pub h_lower: Vec<f64>,
    pub h_upper: Vec<f64>,
    pub rho_star: f64,
    pub tail_window: usize,
    /// `h_upper - h_lower`.
    pub tail_oscillation: Vec<f64>,
    /// First-order extrapolation of `ρ_n` to `α = 1` from the last two points.
    pub rho_extrapolated: f64,
    /// First-order extrapolation of `h_n` to `α = 1` from the last two points.
    pub h_extrapolated: Vec<f64>,
}

impl VanishingDiscountRun {
    pub fn n_states(&self) -> usize {
        self.h_lower.len()
    }

    /// Reference state used in UC mode.
    pub fn ref_state(&self) -> Option<usize> {
        self.schedule.ref_state
    }

    /// Whether the envelopes pinch to within `tol` everywhere.
    pub fn envelopes_pinch(&self, tol: f64) -> bool {
        self.tail_oscillation.iter().all(|&d| d <= tol)
    }
}

/// `f(1)` from values at `α_a < α_b`, linear in `1 - α`.
fn extrapolate(alpha_a: f64, fa: f64, alpha_b: f64, fb: f64) -> f64 {
    let (da, db) = (1.0 - alpha_a, 1.0 - alpha_b);
    (da * fb - db * fa) / (da - db)
}

/// `h_α = v_α - v_α(x̄)`; exactly zero at `x̄`.
pub fn relative_values_uc(solution: &DcoeSolution, ref_state: usize) -> Result<Vec<f64>> {
    let u = &solution.relative;
    if ref_state >= u.len() {
        return Err(Error::Parameter(format!("reference state {ref_state} out of range")));
    }
    let base = u[ref_state];
    let mut h: Vec<f64> = u.iter().map(|x| x - base).collect();
    h[ref_state] = 0.0;
    Ok(h)
}

/// `(v_α - m_α, m_α)` with `m_α = inf_x v_α(x)`.
pub fn relative_values_pc(solution: &DcoeSolution) -> (Vec<f64>, f64) {
    let u = &solution.relative;
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let h = u.iter().map(|x| (x - min_u).max(0.0)).collect();
    (h, solution.min_value().0)
}

pub fn run_schedule(
    mdp: &FiniteMdp,
    schedule: &DiscountSchedule,
    mode: ModelClass,
    solver_tol: f64,
) -> Result<VanishingDiscountRun> {
    run_schedule_with(
        mdp,
        schedule,
        mode,
        &RunOptions {
            solver_tol,
            ..RunOptions::default()
        },
    )
}

pub fn run_schedule_with(
    mdp: &FiniteMdp,
    schedule: &DiscountSchedule,
    mode: ModelClass,
    opts: &RunOptions,
) -> Result<VanishingDiscountRun> {
    if mode != mdp.model_class() {
        return Err(Error::Parameter(format!(
            "run mode {mode:?} does not match model class {:?}",
            mdp.model_class()
        )));
    }
    let ref_state = match (mode, schedule.ref_state) {
        (ModelClass::UC, None) => {
            return Err(Error::Parameter("UC mode needs a reference state".into()))
        }
        (_, Some(r)) if r >= mdp.n_states() => {
            return Err(Error::Parameter(format!("reference state {r} out of range")))
        }
        (_, r) => r,
    };
    if opts.tail_window == 0 || opts.tail_window > schedule.len() {
        return Err(Error::Parameter(format!(
            "tail window {} must be in 1..={}",
            opts.tail_window,
            schedule.len()
        )));
    }
    let anchor = ref_state.unwrap_or(0);

    let v_per_alpha: Vec<DcoeSolution> = schedule
        .alphas()
        .par_iter()
        .map(|&alpha| {
            let cfg = SolverConfig {
                tol: opts.solver_tol.min((1.0 - alpha) * 1e-6),
                max_iter: opts.max_iter,
                anchor,
                ..SolverConfig::default()
            };
            solve_dcoe_with(mdp, alpha, &cfg).map_err(|e| Error::ScheduleSolve {
                alpha,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let (h_per_alpha, m_per_alpha, rho_sequence) = match mode {
        ModelClass::UC => {
            let hs = v_per_alpha
                .iter()
                .map(|s| relative_values_uc(s, anchor))
                .collect::<Result<Vec<_>>>()?;
            let rho = v_per_alpha
                .iter()
                .map(|s| s.gain + (1.0 - s.alpha) * s.relative[anchor])
                .collect();
            (hs, None, rho)
        }
        ModelClass::PC => {
            let mut hs = Vec::new();
            let mut ms = Vec::new();
            let mut rho = Vec::new();
            for s in &v_per_alpha {
                let (h, m) = relative_values_pc(s);
                hs.push(h);
                ms.push(m);
                rho.push(s.min_value().1);
            }
            (hs, Some(ms), rho)
        }
    };

    let n_alpha = h_per_alpha.len();
    let n = mdp.n_states();
    let mut lower_env = vec![vec![0.0; n]; n_alpha];
    let mut upper_env = vec![vec![0.0; n]; n_alpha];
    for i in (0..n_alpha).rev() {
        for s in 0..n {
            let h = h_per_alpha[i][s];
            if i + 1 == n_alpha {
                lower_env[i][s] = h;
                upper_env[i][s] = h;
            } else {
                lower_env[i][s] = h.min(lower_env[i + 1][s]);
                upper_env[i][s] = h.max(upper_env[i + 1][s]);
            }
        }
    }
    let start = n_alpha - opts.tail_window;
    let h_lower = lower_env[start].clone();
    let h_upper = upper_env[start].clone();
    let tail_oscillation = h_upper.iter().zip(&h_lower).map(|(u, l)| u - l).collect();

    let alphas = schedule.alphas();
    let (a0, a1) = (alphas[n_alpha - 2], alphas[n_alpha - 1]);
    let rho_extrapolated = extrapolate(a0, rho_sequence[n_alpha - 2], a1, rho_sequence[n_alpha - 1]);
    let h_extrapolated = (0..n)
        .map(|s| extrapolate(a0, h_per_alpha[n_alpha - 2][s], a1, h_per_alpha[n_alpha - 1][s]))
        .collect();

    Ok(VanishingDiscountRun {
        schedule: schedule.clone(),
        mode,
        states: mdp.states().to_vec(),
        rho_star: rho_sequence[n_alpha - 1],
        v_per_alpha,
        h_per_alpha,
        m_per_alpha,
        rho_sequence,
        lower_env,
        upper_env,
        h_lower,
        h_upper,
        tail_window: opts.tail_window,
        tail_oscillation,
        rho_extrapolated,
        h_extrapolated,
    })
}

/// `max_n ‖h_{α_n}‖_w` over the schedule.
pub fn check_assumption_uc_bounded(run: &VanishingDiscountRun, w: &[f64]) -> Result<f64> {
    Ok(uc_norm_profile(run, w)?.into_iter().fold(0.0, f64::max))
}

/// `‖h_{α_n}‖_w` for each schedule point.
pub fn uc_norm_profile(run: &VanishingDiscountRun, w: &[f64]) -> Result<Vec<f64>> {
    run.h_per_alpha.iter().map(|h| weighted_norm(h, w)).collect()
}

/// No growth beyond 1% across the last half of the schedule.
pub fn uc_bound_is_stable(run: &VanishingDiscountRun, w: &[f64]) -> Result<bool> {
    let norms = uc_norm_profile(run, w)?;
    let mid = norms.len() / 2;
    let reference = norms[mid..].first().copied().unwrap_or(0.0);
    Ok(norms[mid..]
        .iter()
        .all(|&x| x <= 1.01 * reference + 1e-9))
}

/// Per-state `sup_n h_{α_n}(x)` and whether the tail is nonexplosive: the
/// maximum over the last third of the schedule is within 1% of the maximum
/// over the middle third.
pub fn check_condition_b(run: &VanishingDiscountRun) -> (Vec<f64>, bool) {
    let n = run.n_states();
    let len = run.h_per_alpha.len();
    let third = (len / 3).max(1);
    let mid = third..(2 * third).min(len);
    let last = (len - third)..len;
    let mut sup = vec![f64::NEG_INFINITY; n];
    let mut ok = true;
    for s in 0..n {
        for h in &run.h_per_alpha {
            sup[s] = sup[s].max(h[s]);
        }
        let mid_max = run.h_per_alpha[mid.clone()]
            .iter()
            .map(|h| h[s])
            .fold(f64::NEG_INFINITY, f64::max);
        let last_max = run.h_per_alpha[last.clone()]
            .iter()
            .map(|h| h[s])
            .fold(f64::NEG_INFINITY, f64::max);
        if last_max > 1.01 * mid_max.max(0.0) + 1e-9 {
            ok = false;
        }
    }
    (sup, ok)
}

/// ACOI certificate for a candidate pair `(ρ, h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcoiCertificate {
    pub rho: f64,
    pub h: Vec<f64>,
    /// `ρ + h(x) - min_a {c(x,a) + Σ_y h(y) q(y|x,a)}`.
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    pub tol: f64,
    pub verdict: bool,
    pub policy: StationaryPolicy,
}

impl AcoiCertificate {
    /// Re-checks the stored fields against each other.
    pub fn is_consistent(&self) -> bool {
        let min = self.residuals.iter().copied().fold(f64::INFINITY, f64::min);
        self.residuals.len() == self.h.len()
            && self.policy.choice.len() == self.h.len()
            && (min - self.min_residual).abs() <= 1e-15 * (1.0 + min.abs())
            && self.verdict == (self.min_residual >= -self.tol)
    }
}

pub fn acoi_residual(mdp: &FiniteMdp, rho: f64, h: &[f64], tol: f64) -> Result<AcoiCertificate> {
    if h.len() != mdp.n_states() {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: h.len(),
        });
    }
    if h.iter().any(|x| !x.is_finite()) || !rho.is_finite() {
        return Err(Error::Domain("ACOI candidate must be finite".into()));
    }
    let th = mdp.bellman_raw(h, 1.0);
    let residuals: Vec<f64> = h.iter().zip(&th).map(|(hi, ti)| rho + hi - ti).collect();
    let min_residual = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let positions = greedy_positions(mdp, h, 1.0, 0.0);
    Ok(AcoiCertificate {
        rho,
        h: h.to_vec(),
        residuals,
        min_residual,
        tol,
        verdict: min_residual >= -tol,
        policy: mdp.policy_from_positions(&positions),
    })
}

/// Stationary policy choosing actions within `eps` of the ACOI right-hand
/// side; refuses failed certificates.
/// Which candidate pair a certificate was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    /// `(ρ̂*, h_lower)`: last schedule value and lower tail envelope.
    Envelope,
    /// `(rho_extrapolated, h_extrapolated)`.
    Extrapolated,
}

/// Certifies a run: the envelope pair is tried first; if its residual falls
/// below `-tol` (it carries an `O(1-α_N)` defect), the extrapolated pair is
/// checked instead.
pub fn certify_run(
    mdp: &FiniteMdp,
    run: &VanishingDiscountRun,
    tol: f64,
) -> Result<(AcoiCertificate, CertificateSource)> {
    let raw = acoi_residual(mdp, run.rho_star, &run.h_lower, tol)?;
    if raw.verdict {
        return Ok((raw, CertificateSource::Envelope));
    }
    let ext = acoi_residual(mdp, run.rho_extrapolated, &run.h_extrapolated, tol)?;
    Ok((ext, CertificateSource::Extrapolated))
}

pub fn acoi_to_policy(
    mdp: &FiniteMdp,
    cert: &AcoiCertificate,
    eps: f64,
) -> Result<StationaryPolicy> {
    if !cert.verdict {
        return Err(Error::CertificateInvalid {
            min_residual: cert.min_residual,
            tol: cert.tol,
        });
    }
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be nonnegative")));
    }
    Ok(mdp.policy_from_positions(&greedy_positions(mdp, &cert.h, 1.0, eps)))
}

/// Per-state long-run average cost of a stationary policy from the exact
/// recursion `J_{k+1} = c_μ + P_μ J_k`, estimated as `(J_H - J_{H-w})/w`
/// with `w` the last tenth of the horizon. Since `J_n = n g + h + o(1)`,
/// this removes the `h/n` bias of `J_H/H`; horizons below 10 fall back to
/// `J_H/H`.
pub fn average_cost_eval(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    horizon: usize,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let (c, rows) = mdp.policy_chain(policy)?;
    let n = mdp.n_states();
    let window = if horizon >= 10 { horizon / 10 } else { horizon };
    let mut j = vec![0.0; n];
    let mut base = vec![0.0; n];
    for k in 1..=horizon {
        if k == horizon + 1 - window {
            base.clone_from(&j);
        }
        j = (0..n).map(|s| c[s] + rows[s].expect(&j)).collect();
    }
    Ok(j.iter().zip(&base).map(|(a, b)| (a - b) / window as f64).collect())
}

/// Structured summary of a run and its certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingReport {
    pub mode: ModelClass,
    pub alphas: Vec<f64>,
    pub ref_state: Option<usize>,
    pub rho_sequence: Vec<f64>,
    pub rho_star: f64,
    pub rho_extrapolated: f64,
    pub h_lower: Vec<f64>,
    pub h_upper: Vec<f64>,
    pub certificate_source: CertificateSource,
    pub certificate_rho: f64,
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    pub verdict: bool,
    pub solver_residuals: Vec<f64>,
    pub solver_iterations: Vec<usize>,
}

impl VanishingReport {
    pub fn new(
        run: &VanishingDiscountRun,
        cert: &AcoiCertificate,
        source: CertificateSource,
    ) -> Self {
        Self {
            mode: run.mode,
            alphas: run.schedule.alphas().to_vec(),
            ref_state: run.schedule.ref_state(),
            rho_sequence: run.rho_sequence.clone(),
            rho_star: run.rho_star,
            rho_extrapolated: run.rho_extrapolated,
            h_lower: run.h_lower.clone(),
            h_upper: run.h_upper.clone(),
            certificate_source: source,
            certificate_rho: cert.rho,
            residuals: cert.residuals.clone(),
            min_residual: cert.min_residual,
            verdict: cert.verdict,
            solver_residuals: run.v_per_alpha.iter().map(|s| s.residual).collect(),
            solver_iterations: run.v_per_alpha.iter().map(|s| s.iterations).collect(),
        }
    }
}

/// Plot data: `alpha, one_minus_alpha_times_value, h_<probe>...`.
pub fn trace_csv(run: &VanishingDiscountRun, probes: &[usize]) -> String {
    let mut out = String::from("alpha,one_minus_alpha_times_value");
    for p in probes {
        let _ = write!(out, ",h_{p}");
    }
    out.push('\n');
    for (i, &alpha) in run.schedule.alphas().iter().enumerate() {
        let _ = write!(out, "{alpha:.17e},{:.17e}", run.rho_sequence[i]);
        for &p in probes {
            let _ = write!(out, ",{:.17e}", run.h_per_alpha[i][p]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::KernelRow;

    fn two_cycle(class: ModelClass) -> FiniteMdp {
        FiniteMdp::new(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![0], vec![0]],
            vec![vec![0.0], vec![2.0]],
            vec![vec![KernelRow::point_mass(1)], vec![KernelRow::point_mass(0)]],
            vec![1.0, 1.0],
            class,
        )
        .unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(DiscountSchedule::new(vec![0.5, 0.9], None).is_err());
        assert!(DiscountSchedule::new(vec![0.5, 0.4, 0.9], None).is_err());
        assert!(DiscountSchedule::new(vec![0.5, 0.9, 1.0], None).is_err());
        let g = DiscountSchedule::geometric(20, None).unwrap();
        assert_eq!(g.alphas()[0], 0.5);
        assert_eq!(g.alphas()[19], 1.0 - 2f64.powi(-20));
    }

    #[test]
    fn relative_values_definitions() {
        let mdp = two_cycle(ModelClass::UC);
        let sol = crate::solver::solve_dcoe(&mdp, 0.5, 1e-12, 1000).unwrap();
        let h = relative_values_uc(&sol, 1).unwrap();
        assert_eq!(h[1], 0.0);
        assert!((h[0] - (sol.v.values[0] - sol.v.values[1])).abs() < 1e-12);
        let (hp, m) = relative_values_pc(&sol);
        assert_eq!(hp.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert!((m - sol.v.values[0]).abs() < 1e-12);
    }

    #[test]
    fn two_cycle_certificate() {
        let mdp = two_cycle(ModelClass::PC);
        let cert = acoi_residual(&mdp, 1.0, &[0.0, 1.0], 1e-9).unwrap();
        assert!(cert.residuals.iter().all(|r| r.abs() <= 1e-12));
        assert!(cert.verdict);
        assert!(cert.is_consistent());
        let shifted = acoi_residual(&mdp, 1.0, &[5.0, 6.0], 1e-9).unwrap();
        for (a, b) in cert.residuals.iter().zip(&shifted.residuals) {
            assert!((a - b).abs() <= 1e-12);
        }
        let bumped = acoi_residual(&mdp, 1.1, &[0.0, 1.0], 1e-9).unwrap();
        for (a, b) in cert.residuals.iter().zip(&bumped.residuals) {
            assert!((b - a - 0.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn failed_certificate_refused() {
        let mdp = two_cycle(ModelClass::PC);
        let cert = acoi_residual(&mdp, 0.5, &[0.0, 1.0], 1e-9).unwrap();
        assert!(!cert.verdict);
        assert!(matches!(
            acoi_to_policy(&mdp, &cert, 0.0),
            Err(Error::CertificateInvalid { .. })
        ));
    }

    #[test]
    fn average_cost_of_cycle() {
        let mdp = two_cycle(ModelClass::PC);
        let p = StationaryPolicy { choice: vec![0, 0] };
        for horizon in [1, 7, 100, 1001] {
            let j = average_cost_eval(&mdp, &p, horizon).unwrap();
            for x in j {
                assert!((x - 1.0).abs() <= 2.0 / horizon as f64 + 1e-12, "{x} at {horizon}");
            }
        }
        assert!(average_cost_eval(&mdp, &p, 0).is_err());
    }

    #[test]
    fn mode_must_match() {
        let mdp = two_cycle(ModelClass::PC);
        let sched = DiscountSchedule::geometric(5, Some(0)).unwrap();
        assert!(run_schedule(&mdp, &sched, ModelClass::UC, 1e-10).is_err());
        let uc = two_cycle(ModelClass::UC);
        let no_ref = DiscountSchedule::geometric(5, None).unwrap();
        assert!(run_schedule(&uc, &no_ref, ModelClass::UC, 1e-10).is_err());
    }

    #[test]
    fn extrapolation_is_exact_for_affine() {
        let f = |a: f64| 3.0 + 7.0 * (1.0 - a);
        assert!((extrapolate(0.5, f(0.5), 0.75, f(0.75)) - 3.0).abs() < 1e-14);
    }
}
