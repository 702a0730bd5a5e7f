use std::path::{Path, PathBuf};

use acoi::models::inventory::{build_pc_inventory, build_uc_production, GridSpec};
use acoi::models::{
    build_circle_mdp, build_invariant, InvariantModelSpec, PcInventorySpec, UcProductionSpec,
};
use acoi::simulation::PolicyRule;
use acoi::vanishing::DiscountSchedule;
use acoi::{FiniteMdp, ModelClass};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub ref_state: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub probes: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("acoi_out")
}

/// Exactly one model source.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Builtin(Builtin),
    /// Serialized model document, relative to the config file.
    Path(PathBuf),
    Inline(acoi::mdp::MdpDocument),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    PcInventory {
        #[serde(default)]
        spec: Option<PcInventorySpec>,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    UcProduction {
        #[serde(default)]
        spec: Option<UcProductionSpec>,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    Invariant {
        #[serde(default)]
        spec: Option<InvariantModelSpec>,
        #[serde(default = "default_invariant_states")]
        n_states: usize,
        #[serde(default = "default_invariant_actions")]
        n_actions: usize,
    },
    PartialInvariant,
    Circle {
        #[serde(default = "default_circle_states")]
        n_states: usize,
    },
}

fn default_invariant_states() -> usize {
    6
}
fn default_invariant_actions() -> usize {
    3
}
fn default_circle_states() -> usize {
    60
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Geometric { n_points: usize },
    Custom { alphas: Vec<f64> },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Geometric {
            n_points: acoi::vanishing::DEFAULT_SCHEDULE_POINTS,
        }
    }
}

impl ScheduleConfig {
    /// Discount factors; at least one, each in `(0,1)`, strictly increasing.
    pub fn alphas(&self) -> Result<Vec<f64>, CliError> {
        let alphas: Vec<f64> = match self {
            ScheduleConfig::Geometric { n_points } => {
                (1..=*n_points).map(|n| 1.0 - 0.5f64.powi(n as i32)).collect()
            }
            ScheduleConfig::Custom { alphas } => alphas.clone(),
        };
        if alphas.is_empty() {
            return Err(CliError::Config("schedule must have at least one point".into()));
        }
        if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(CliError::Config("discount factors must lie in (0, 1)".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("discount factors must be strictly increasing".into()));
        }
        Ok(alphas)
    }

    pub fn schedule(&self, ref_state: Option<usize>) -> Result<DiscountSchedule, CliError> {
        DiscountSchedule::new(self.alphas()?, ref_state).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_solver_tol")]
    pub solver: f64,
    #[serde(default = "default_acoi_tol")]
    pub acoi: f64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

fn default_solver_tol() -> f64 {
    acoi::solver::DEFAULT_TOL
}
fn default_acoi_tol() -> f64 {
    1e-6
}
fn default_ci_level() -> f64 {
    0.99
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: default_solver_tol(),
            acoi: default_acoi_tol(),
            ci_level: default_ci_level(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Slack defining the selected action sets.
    #[serde(default = "default_k_eps")]
    pub eps: f64,
    /// Mass bound for the Egoroff exclusion set.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Uniform gap allowed off the exclusion set.
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_k_eps() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    0.05
}
fn default_eta() -> f64 {
    0.1
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            eps: default_k_eps(),
            delta: default_delta(),
            eta: default_eta(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Start states of the hitting-time estimates; model-specific default.
    #[serde(default)]
    pub starts: Option<Vec<f64>>,
    /// Policy simulated; the model's comparison policy by default.
    #[serde(default)]
    pub policy: Option<PolicyRule>,
    #[serde(default = "default_eps_bar")]
    pub eps_bar: f64,
    #[serde(default = "default_drift_samples")]
    pub drift_samples: usize,
    /// Replicates per probe for the stopped-cost check.
    #[serde(default = "default_stopped_reps")]
    pub stopped_reps: usize,
}

fn default_reps() -> usize {
    100_000
}
fn default_cap() -> usize {
    acoi::simulation::DEFAULT_CAP
}
fn default_eps_bar() -> f64 {
    0.5
}
fn default_drift_samples() -> usize {
    41
}
fn default_stopped_reps() -> usize {
    2_000
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_reps: default_reps(),
            cap: default_cap(),
            starts: None,
            policy: None,
            eps_bar: default_eps_bar(),
            drift_samples: default_drift_samples(),
            stopped_reps: default_stopped_reps(),
        }
    }
}

/// A model ready to run, with the pieces of its source the commands need.
pub struct LoadedModel {
    pub mdp: FiniteMdp,
    pub ref_state: Option<usize>,
    pub kind: LoadedKind,
}

pub enum LoadedKind {
    Pc(PcInventorySpec),
    Uc(UcProductionSpec),
    Invariant(Box<acoi::models::InvariantBuild>),
    Other,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let ModelSource::Path(p) = &mut cfg.model {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.schedule.alphas()?;
        let t = &self.tolerances;
        if !(t.solver > 0.0 && t.acoi >= 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        acoi::simulation::z_for_level(t.ci_level).map_err(|e| CliError::Config(e.to_string()))?;
        if self.simulation.n_reps == 0 || self.simulation.cap == 0 {
            return Err(CliError::Config("n_reps and cap must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn build_model(&self) -> Result<LoadedModel, CliError> {
        let config_err = |e: acoi::Error| CliError::Config(e.to_string());
        let loaded = match &self.model {
            ModelSource::Builtin(Builtin::PcInventory { spec, grid }) => {
                let spec = spec.clone().unwrap_or_default();
                let grid = grid.unwrap_or_else(PcInventorySpec::default_grid);
                LoadedModel {
                    mdp: build_pc_inventory(&spec, &grid).map_err(config_err)?,
                    ref_state: None,
                    kind: LoadedKind::Pc(spec),
                }
            }
            ModelSource::Builtin(Builtin::UcProduction { spec, grid }) => {
                let spec = spec.clone().unwrap_or_default();
                let grid = grid.unwrap_or_else(UcProductionSpec::default_grid);
                LoadedModel {
                    mdp: build_uc_production(&spec, &grid).map_err(config_err)?,
                    ref_state: Some(0),
                    kind: LoadedKind::Uc(spec),
                }
            }
            ModelSource::Builtin(Builtin::Invariant {
                spec,
                n_states,
                n_actions,
            }) => {
                let spec = spec
                    .clone()
                    .unwrap_or_else(|| InvariantModelSpec::random(self.seed, *n_states, *n_actions));
                invariant(&spec)?
            }
            ModelSource::Builtin(Builtin::PartialInvariant) => {
                invariant(&InvariantModelSpec::partial_builtin())?
            }
            ModelSource::Builtin(Builtin::Circle { n_states }) => LoadedModel {
                mdp: build_circle_mdp(*n_states).map_err(config_err)?,
                ref_state: None,
                kind: LoadedKind::Other,
            },
            ModelSource::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                document_model(FiniteMdp::from_json(&text).map_err(config_err)?)
            }
            ModelSource::Inline(doc) => {
                document_model(FiniteMdp::from_document(doc.clone()).map_err(config_err)?)
            }
        };
        let ref_state = self.ref_state.or(loaded.ref_state);
        if let Some(r) = ref_state {
            if r >= loaded.mdp.n_states() {
                return Err(CliError::Config(format!("reference state {r} out of range")));
            }
        }
        if let Some(probes) = &self.probes {
            if let Some(p) = probes.iter().find(|&&p| p >= loaded.mdp.n_states()) {
                return Err(CliError::Config(format!("probe state {p} out of range")));
            }
        }
        Ok(LoadedModel { ref_state, ..loaded })
    }

    /// Configured probes, or up to 11 equispaced states.
    pub fn probes_for(&self, n_states: usize) -> Vec<usize> {
        match &self.probes {
            Some(p) => p.clone(),
            None if n_states <= 11 => (0..n_states).collect(),
            None => {
                let mut v: Vec<usize> = (0..=10).map(|k| k * (n_states - 1) / 10).collect();
                v.dedup();
                v
            }
        }
    }
}

fn invariant(spec: &InvariantModelSpec) -> Result<LoadedModel, CliError> {
    let built = build_invariant(spec).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(LoadedModel {
        mdp: built.mdp.clone(),
        ref_state: Some(spec.ref_state),
        kind: LoadedKind::Invariant(Box::new(built)),
    })
}

fn document_model(mdp: FiniteMdp) -> LoadedModel {
    let ref_state = match mdp.model_class() {
        ModelClass::UC => Some(0),
        ModelClass::PC => None,
    };
    LoadedModel {
        mdp,
        ref_state,
        kind: LoadedKind::Other,
    }
}
