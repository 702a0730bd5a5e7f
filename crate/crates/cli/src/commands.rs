use std::fmt::Write as _;

use acoi::conditions::{
    egoroff_extract, gus_test, lower_epilimit, minimal_majorizer, select_k_eps, EgoroffResult,
    MajorizationWitness,
};
use acoi::mdp::check_uc_model;
use acoi::models::inventory::uc_model_constants;
use acoi::simulation::{
    compute_h, hitting_time_with_z, verify_comparison_drift, verify_h_bound, verify_stopped_cost_bound,
    y_alpha, z_for_level, DriftReport, HBound, HBoundReport, PolicyRule, StopRule, StoppedBoundReport,
    StoppingTimeReport,
};
use acoi::solver::{solve_dcoe_with, DcoeSolution, SolverConfig};
use acoi::vanishing::{
    certify_run, check_assumption_uc_bounded, check_condition_b, run_schedule_with, trace_csv,
    uc_bound_is_stable, RunOptions, VanishingDiscountRun, VanishingReport,
};
use acoi::models::ExampleSpec;
use acoi::{ModelClass, StationaryPolicy};
use serde::{Deserialize, Serialize};

use crate::config::{LoadedKind, LoadedModel, RunConfig};
use crate::error::CliError;
use crate::output::{OutputDir, Provenance};

pub const CERTIFICATE_FILE: &str = "acoi_certificate.json";
pub const RUN_FILE: &str = "vanish_run.json";
pub const TRACE_FILE: &str = "vanish_trace.csv";
pub const CONDITIONS_FILE: &str = "conditions.json";
pub const SOLVE_SUMMARY_FILE: &str = "solve_summary.csv";
pub const SOLVER_FAILURE_FILE: &str = "solver_failure.json";
pub const SIM_REPORT_FILE: &str = "sim_report.csv";
pub const BOUNDS_FILE: &str = "bounds.json";

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn prepare(cfg: &RunConfig) -> Result<(LoadedModel, Provenance), CliError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    Ok((model, provenance(cfg)))
}

#[derive(Serialize, Deserialize)]
pub struct SolveFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub solution: DcoeSolution,
}

#[derive(Serialize)]
struct SolverFailure<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    alpha: f64,
    error: String,
    residual: Option<f64>,
    iterations: Option<usize>,
}

/// `(1-α) m_α` in positive-cost mode, `(1-α) v_α(x̄)` otherwise.
fn scaled_value(sol: &DcoeSolution, mode: ModelClass, ref_state: Option<usize>) -> f64 {
    match (mode, ref_state) {
        (ModelClass::UC, Some(r)) => sol.gain + (1.0 - sol.alpha) * sol.relative[r],
        _ => sol.min_value().1,
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let (model, prov) = prepare(cfg)?;
    let alphas = cfg.schedule.alphas()?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let probes = cfg.probes_for(model.mdp.n_states());
    let mut summary = String::from("alpha,residual,iterations,scaled_value");
    for p in &probes {
        let _ = write!(summary, ",v_{p}");
    }
    summary.push('\n');
    for &alpha in &alphas {
        let sc = SolverConfig {
            tol: cfg.tolerances.solver.min((1.0 - alpha) * 1e-6),
            anchor: model.ref_state.unwrap_or(0),
            ..SolverConfig::default()
        };
        let sol = match solve_dcoe_with(&model.mdp, alpha, &sc) {
            Ok(s) => s,
            Err(e) => {
                let (residual, iterations) = match &e {
                    acoi::Error::NonConvergence {
                        residual, iterations, ..
                    } => (Some(*residual), Some(*iterations)),
                    _ => (None, None),
                };
                out.write_json(
                    SOLVER_FAILURE_FILE,
                    &SolverFailure {
                        provenance: &prov,
                        alpha,
                        error: e.to_string(),
                        residual,
                        iterations,
                    },
                )?;
                return Err(e.into());
            }
        };
        let _ = write!(
            summary,
            "{alpha:.17e},{:.6e},{},{:.17e}",
            sol.residual,
            sol.iterations,
            scaled_value(&sol, model.mdp.model_class(), model.ref_state)
        );
        for &p in &probes {
            let _ = write!(summary, ",{:.17e}", sol.v.values[p]);
        }
        summary.push('\n');
        out.write_json(
            &format!("dcoe_{alpha}.json"),
            &SolveFile {
                provenance: prov.clone(),
                solution: sol,
            },
        )?;
    }
    out.write(SOLVE_SUMMARY_FILE, summary.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub rho: f64,
    pub h: Vec<f64>,
    pub policy: StationaryPolicy,
    pub report: VanishingReport,
}

#[derive(Serialize, Deserialize)]
pub struct RunFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub run: VanishingDiscountRun,
}

fn vanish_run(cfg: &RunConfig, model: &LoadedModel) -> Result<VanishingDiscountRun, CliError> {
    let alphas = cfg.schedule.alphas()?;
    if alphas.len() < 3 {
        return Err(CliError::Config(
            "the vanishing-discount run needs at least 3 schedule points".into(),
        ));
    }
    let schedule = cfg.schedule.schedule(model.ref_state)?;
    let opts = RunOptions {
        solver_tol: cfg.tolerances.solver,
        ..RunOptions::default()
    };
    Ok(run_schedule_with(&model.mdp, &schedule, model.mdp.model_class(), &opts)?)
}

pub fn cmd_vanish(cfg: &RunConfig) -> Result<(), CliError> {
    let (model, prov) = prepare(cfg)?;
    let run = vanish_run(cfg, &model)?;
    let (cert, source) = certify_run(&model.mdp, &run, cfg.tolerances.acoi)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let probes = cfg.probes_for(model.mdp.n_states());
    out.write(TRACE_FILE, trace_csv(&run, &probes).as_bytes())?;
    out.write_json(
        RUN_FILE,
        &RunFile {
            provenance: prov.clone(),
            run: run.clone(),
        },
    )?;
    out.write_json(
        CERTIFICATE_FILE,
        &CertificateFile {
            provenance: prov,
            rho: cert.rho,
            h: cert.h.clone(),
            policy: cert.policy.clone(),
            report: VanishingReport::new(&run, &cert, source),
        },
    )?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct StateConditions {
    pub state: usize,
    pub witness: MajorizationWitness,
}

#[derive(Serialize, Deserialize)]
pub struct GusReport {
    pub total_mass: f64,
    pub passes: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Boundedness {
    /// Per-state sup of the relative values over the schedule.
    Pc { envelope_sups: Vec<f64>, holds: bool },
    Uc { max_weighted_norm: f64, stable: bool },
}

#[derive(Serialize, Deserialize)]
pub struct InvariantCheck {
    pub max_weighted_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Serialize, Deserialize)]
pub struct EpiSummary {
    pub chain_ok: bool,
    pub inf_sequence_liminf: f64,
    pub inf_of_epilimit: f64,
    pub inf_of_pointwise_liminf: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ConditionsFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub eps: f64,
    pub states: Vec<StateConditions>,
    pub gus_test: GusReport,
    pub egoroff: Option<EgoroffResult>,
    pub egoroff_error: Option<String>,
    pub boundedness: Boundedness,
    pub epi: EpiSummary,
    pub invariant: Option<InvariantCheck>,
    pub uc_model: Option<acoi::mdp::UcModelReport>,
}

fn read_prerequisite<T: for<'de> Deserialize<'de>>(
    out: &std::path::Path,
    name: &str,
) -> Result<T, CliError> {
    let path = out.join(name);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::Missing(format!("{} not found; run `vanish` first", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Missing(format!("{} is unreadable: {e}", path.display())))
}

pub fn cmd_check(cfg: &RunConfig) -> Result<(), CliError> {
    let (model, prov) = prepare(cfg)?;
    let run_file: RunFile = read_prerequisite(&cfg.output_dir, RUN_FILE)?;
    let _: CertificateFile = read_prerequisite(&cfg.output_dir, CERTIFICATE_FILE)?;
    if run_file.provenance.config_hash != prov.config_hash {
        return Err(CliError::Missing(format!(
            "{RUN_FILE} was produced by a different config; rerun `vanish`"
        )));
    }
    let run = run_file.run;
    let mdp = &model.mdp;
    if run.n_states() != mdp.n_states() {
        return Err(CliError::Missing(format!("{RUN_FILE} does not match the model")));
    }
    let eps = cfg.check.eps;
    let states = (0..mdp.n_states())
        .map(|s| {
            let k = select_k_eps(mdp, s, eps, &run.v_per_alpha, None)?;
            let mut witness = minimal_majorizer(mdp, s, &k)?;
            witness.eps = eps;
            Ok(StateConditions { state: s, witness })
        })
        .collect::<acoi::Result<Vec<_>>>()?;
    let (total_mass, passes) = gus_test(mdp);
    let anchor = model.ref_state.unwrap_or(0);
    let (egoroff, egoroff_error) = match egoroff_extract(
        &run.h_per_alpha,
        &run.h_extrapolated,
        &states[anchor].witness,
        cfg.check.delta,
        cfg.check.eta,
    ) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let boundedness = match mdp.model_class() {
        ModelClass::PC => {
            let (envelope_sups, holds) = check_condition_b(&run);
            Boundedness::Pc { envelope_sups, holds }
        }
        ModelClass::UC => Boundedness::Uc {
            max_weighted_norm: check_assumption_uc_bounded(&run, mdp.weight())?,
            stable: uc_bound_is_stable(&run, mdp.weight())?,
        },
    };
    let epi = lower_epilimit(&run.h_per_alpha, mdp.states())?;
    let invariant = match &model.kind {
        LoadedKind::Invariant(b) if b.region.len() == mdp.n_states() => {
            let norm = check_assumption_uc_bounded(&run, mdp.weight())?;
            let bound = b.weighted_bound();
            Some(InvariantCheck {
                max_weighted_norm: norm,
                bound,
                holds: norm <= bound + 1e-8,
            })
        }
        _ => None,
    };
    let uc_model = match &model.kind {
        LoadedKind::Uc(spec) => {
            let derived = spec.derive()?;
            let (c_hat, lambda, b) = uc_model_constants(mdp, &derived);
            Some(check_uc_model(mdp, lambda, b, c_hat)?)
        }
        _ => None,
    };
    let out = OutputDir::create(&cfg.output_dir)?;
    out.write_json(
        CONDITIONS_FILE,
        &ConditionsFile {
            provenance: prov,
            eps,
            states,
            gus_test: GusReport { total_mass, passes },
            egoroff,
            egoroff_error,
            boundedness,
            epi: EpiSummary {
                chain_ok: epi.chain_ok,
                inf_sequence_liminf: epi.inf_sequence_liminf,
                inf_of_epilimit: epi.inf_of_epilimit,
                inf_of_pointwise_liminf: epi.inf_of_pointwise_liminf,
            },
            invariant,
            uc_model,
        },
    )?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct BoundsFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub policy: PolicyRule,
    pub hitting: Vec<StoppingTimeReport>,
    pub h_values: Vec<HBound>,
    pub h_check: Option<HBoundReport>,
    pub stopped_check: Option<StoppedBoundReport>,
    pub drift: DriftReport,
    pub all_satisfied: bool,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let (model, prov) = prepare(cfg)?;
    let sim = &cfg.simulation;
    let z = z_for_level(cfg.tolerances.ci_level)?;
    let states = model.mdp.states();
    let (lo, hi) = (states[0], states[states.len() - 1]);
    let mut h_values = Vec::new();
    let mut h_check = None;
    let mut stopped_check = None;
    let (spec, policy, stop, starts) = match &model.kind {
        LoadedKind::Pc(spec) => {
            let run = vanish_run(cfg, &model)?;
            let last = run.v_per_alpha.last().expect("nonempty schedule");
            let y = y_alpha(&model.mdp, last, spec.l, spec.m)?;
            let probes = cfg.probes_for(model.mdp.n_states());
            for &p in &probes {
                h_values.push(compute_h(spec, states[p])?);
            }
            h_check = Some(verify_h_bound(&run, spec, sim.eps_bar, &probes)?);
            stopped_check = Some(verify_stopped_cost_bound(
                &run,
                &model.mdp,
                spec,
                sim.eps_bar,
                &probes,
                sim.stopped_reps,
                0.0,
                cfg.seed,
            )?);
            let policy = sim.policy.clone().unwrap_or(PolicyRule::BaseStock {
                level: spec.l,
                target: y,
            });
            let starts = sim.starts.clone().unwrap_or_else(|| vec![spec.l + 5.0]);
            (
                ExampleSpec::PcInventory(spec.clone()),
                policy,
                StopRule::Below { level: spec.l },
                starts,
            )
        }
        LoadedKind::Uc(spec) => {
            let derived = spec.derive()?;
            let policy = sim.policy.clone().unwrap_or(PolicyRule::NoOrder);
            let starts = sim.starts.clone().unwrap_or_else(|| vec![derived.l_tilde]);
            (ExampleSpec::UcProduction(spec.clone()), policy, StopRule::AtZero, starts)
        }
        _ => {
            return Err(CliError::Config(
                "simulate needs a continuous builtin model (pc_inventory or uc_production)".into(),
            ))
        }
    };
    let hitting = starts
        .iter()
        .map(|&x0| hitting_time_with_z(&spec, &policy, x0, stop, sim.n_reps, sim.cap, cfg.seed, z))
        .collect::<acoi::Result<Vec<_>>>()?;
    let drift = verify_comparison_drift(&spec, (lo, hi), sim.drift_samples)?;
    let all_satisfied = hitting.iter().all(|r| r.bound_rhs.is_none() || r.bound_satisfied)
        && drift.passed
        && h_check.as_ref().is_none_or(|r| r.all_ok)
        && stopped_check.as_ref().is_none_or(|r| r.passed);

    let mut csv = String::from(
        "start_state,n_reps,censored,mean_tau,ci_halfwidth,mean_cost_to_tau,mean_kappa_term,mean_terminal_cost,bound_rhs,bound_satisfied\n",
    );
    for r in &hitting {
        let _ = writeln!(
            csv,
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            r.start_state,
            r.n_reps,
            r.censored,
            r.mean_tau,
            r.ci_halfwidth,
            r.mean_cost_to_tau,
            r.mean_kappa_term,
            r.mean_terminal_cost,
            r.bound_rhs.map_or(String::new(), |b| format!("{b:.17e}")),
            r.bound_satisfied
        );
    }
    let out = OutputDir::create(&cfg.output_dir)?;
    out.write(SIM_REPORT_FILE, csv.as_bytes())?;
    out.write_json(
        BOUNDS_FILE,
        &BoundsFile {
            provenance: prov,
            policy,
            hitting,
            h_values,
            h_check,
            stopped_check,
            drift,
            all_satisfied,
        },
    )?;
    Ok(())
}
