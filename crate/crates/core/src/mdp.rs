//! Discretized MDP data model, weighted norms and the dynamic programming
//! operators.
//!
//! A [`FiniteMdp`] is a Borel-space model sampled on a finite grid. Kernel rows
//! are stored sparsely since the inventory builders produce rows with a few
//! dozen nonzeros over several hundred states. Costs and kernel rows are
//! indexed by *position* in the per-state admissible list; [`StationaryPolicy`]
//! stores *global* action indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on kernel row sums for a constructed model.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on kernel row sums when loading a serialized model.
pub const LOAD_ROW_SUM_TOL: f64 = 1e-9;

const PAR_THRESHOLD: usize = 64;

/// Model class: nonnegative costs (PC) or unbounded costs under a drift
/// condition (UC).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelClass {
    PC,
    UC,
}

/// Sparse probability vector over states: `(state index, mass)` pairs with
/// strictly increasing indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct KernelRow {
    entries: Vec<(usize, f64)>,
}

impl KernelRow {
    /// Builds a row from arbitrary `(state, mass)` pairs, merging duplicates and
    /// dropping zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(j, _)| j);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (j, p) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == j => last.1 += p,
                _ => entries.push((j, p)),
            }
        }
        entries.retain(|&(_, p)| p != 0.0);
        Self { entries }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self {
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(j, &p)| (j, p))
                .collect(),
        }
    }

    pub fn point_mass(state: usize) -> Self {
        Self {
            entries: vec![(state, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.entries
            .binary_search_by_key(&state, |&(j, _)| j)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// `Σ_y f(y) q(y)`.
    #[inline]
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, p)| p * f[j]).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(j, p) in &self.entries {
            out[j] = p;
        }
        out
    }

    /// Rescales the row to sum to one. Rows already within 1e-12 of one
    /// are left untouched so that repeated loading is idempotent.
    pub fn normalize(&mut self) {
        let s = self.sum();
        if s > 0.0 && (s - 1.0).abs() > 1e-12 {
            for e in &mut self.entries {
                e.1 /= s;
            }
        }
    }
}

/// A discretized Borel-space MDP.
#[derive(Clone, Debug)]
pub struct FiniteMdp {
    states: Vec<f64>,
    labels: Vec<String>,
    actions: Vec<f64>,
    admissible: Vec<Vec<usize>>,
    cost: Vec<Vec<f64>>,
    kernel: Vec<Vec<KernelRow>>,
    weight: Vec<f64>,
    model_class: ModelClass,
}

impl FiniteMdp {
    /// Validates and assembles a model. `cost[s][k]` and `kernel[s][k]` belong
    /// to the action `admissible[s][k]`.
    pub fn new(
        states: Vec<f64>,
        actions: Vec<f64>,
        admissible: Vec<Vec<usize>>,
        cost: Vec<Vec<f64>>,
        kernel: Vec<Vec<KernelRow>>,
        weight: Vec<f64>,
        model_class: ModelClass,
    ) -> Result<Self> {
        let labels = (0..states.len()).map(|s| format!("s{s}")).collect();
        let mdp = Self {
            states,
            labels,
            actions,
            admissible,
            cost,
            kernel,
            weight,
            model_class,
        };
        mdp.validate(ROW_SUM_TOL)?;
        Ok(mdp)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.states.len() {
            return Err(Error::Dimension {
                expected: self.states.len(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    fn validate(&self, row_tol: f64) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty state space".into()));
        }
        for (name, len) in [
            ("admissible", self.admissible.len()),
            ("cost", self.cost.len()),
            ("kernel", self.kernel.len()),
            ("weight", self.weight.len()),
        ] {
            if len != n {
                return Err(Error::InvalidModel(format!(
                    "{name} has {len} entries for {n} states"
                )));
            }
        }
        for s in 0..n {
            let adm = &self.admissible[s];
            if adm.is_empty() {
                return Err(Error::InvalidModel(format!("A(x) is empty at state {s}")));
            }
            if self.cost[s].len() != adm.len() || self.kernel[s].len() != adm.len() {
                return Err(Error::InvalidModel(format!(
                    "state {s}: cost/kernel rows do not match the admissible list"
                )));
            }
            for (k, &a) in adm.iter().enumerate() {
                if a >= self.actions.len() {
                    return Err(Error::InvalidModel(format!(
                        "state {s}: action index {a} out of range"
                    )));
                }
                let c = self.cost[s][k];
                if !c.is_finite() {
                    return Err(Error::InvalidModel(format!("state {s}: non-finite cost")));
                }
                if self.model_class == ModelClass::PC && c < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "state {s}, action {a}: negative cost {c} in a PC model"
                    )));
                }
                let row = &self.kernel[s][k];
                for &(j, p) in row.entries() {
                    if j >= n {
                        return Err(Error::InvalidModel(format!(
                            "state {s}, action {a}: kernel references state {j}"
                        )));
                    }
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "state {s}, action {a}: invalid probability {p}"
                        )));
                    }
                }
                let sum = row.sum();
                if (sum - 1.0).abs() > row_tol {
                    return Err(Error::InvalidModel(format!(
                        "state {s}, action {a}: kernel row sums to {sum}"
                    )));
                }
            }
            if !(self.weight[s] >= 1.0) || !self.weight[s].is_finite() {
                return Err(Error::InvalidModel(format!(
                    "weight {} < 1 at state {s}",
                    self.weight[s]
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn admissible(&self, s: usize) -> &[usize] {
        &self.admissible[s]
    }

    pub fn costs(&self, s: usize) -> &[f64] {
        &self.cost[s]
    }

    pub fn rows(&self, s: usize) -> &[KernelRow] {
        &self.kernel[s]
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn model_class(&self) -> ModelClass {
        self.model_class
    }

    /// Total number of admissible state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.admissible.iter().map(Vec::len).sum()
    }

    /// Position of global action `a` in `A(s)`.
    pub fn action_position(&self, s: usize, a: usize) -> Option<usize> {
        self.admissible[s].iter().position(|&b| b == a)
    }

    /// Nearest grid state to a coordinate.
    pub fn nearest_state(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &y) in self.states.iter().enumerate() {
            let d = (y - x).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// `c(s,k) + α Σ_y v(y) q(y|s,k)` for the `k`-th admissible action.
    #[inline]
    pub fn q_value(&self, s: usize, k: usize, v: &[f64], alpha: f64) -> f64 {
        self.cost[s][k] + alpha * self.kernel[s][k].expect(v)
    }

    /// Minimum Q-value at state `s` and the lowest position attaining it.
    pub fn min_q(&self, s: usize, v: &[f64], alpha: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.admissible[s].len() {
            let q = self.q_value(s, k, v, alpha);
            if q < best.1 {
                best = (k, q);
            }
        }
        best
    }

    /// `(T_α v)` as a raw vector.
    pub(crate) fn bellman_raw(&self, v: &[f64], alpha: f64) -> Vec<f64> {
        let n = self.n_states();
        if n >= PAR_THRESHOLD {
            (0..n)
                .into_par_iter()
                .map(|s| self.min_q(s, v, alpha).1)
                .collect()
        } else {
            (0..n).map(|s| self.min_q(s, v, alpha).1).collect()
        }
    }

    /// Positions of a stationary policy's choices within the admissible lists.
    pub fn policy_positions(&self, policy: &StationaryPolicy) -> Result<Vec<usize>> {
        if policy.choice.len() != self.n_states() {
            return Err(Error::Dimension {
                expected: self.n_states(),
                got: policy.choice.len(),
            });
        }
        policy
            .choice
            .iter()
            .enumerate()
            .map(|(s, &a)| {
                self.action_position(s, a).ok_or_else(|| {
                    Error::InvalidModel(format!("policy action {a} not admissible at state {s}"))
                })
            })
            .collect()
    }

    /// Policy from per-state positions.
    pub fn policy_from_positions(&self, positions: &[usize]) -> StationaryPolicy {
        StationaryPolicy {
            choice: positions
                .iter()
                .enumerate()
                .map(|(s, &k)| self.admissible[s][k])
                .collect(),
        }
    }

    /// `(c_μ, P_μ)` for a stationary policy.
    pub fn policy_chain(&self, policy: &StationaryPolicy) -> Result<(Vec<f64>, Vec<&KernelRow>)> {
        let pos = self.policy_positions(policy)?;
        let costs = pos.iter().enumerate().map(|(s, &k)| self.cost[s][k]).collect();
        let rows = pos.iter().enumerate().map(|(s, &k)| &self.kernel[s][k]).collect();
        Ok((costs, rows))
    }

    pub fn to_document(&self) -> MdpDocument {
        let n = self.n_states();
        MdpDocument {
            states: self.states.clone(),
            labels: Some(self.labels.clone()),
            actions: self.actions.clone(),
            admissible: self.admissible.clone(),
            cost: self.cost.clone(),
            kernel: self
                .kernel
                .iter()
                .map(|rows| rows.iter().map(|r| r.to_dense(n)).collect())
                .collect(),
            weight: self.weight.clone(),
            model_class: self.model_class,
        }
    }

    /// Loads a serialized model; rows within `1 ± 1e-9` are renormalized.
    pub fn from_document(doc: MdpDocument) -> Result<Self> {
        let n = doc.states.len();
        let mut kernel = Vec::with_capacity(n);
        for (s, rows) in doc.kernel.into_iter().enumerate() {
            let mut out = Vec::with_capacity(rows.len());
            for dense in rows {
                if dense.len() != n {
                    return Err(Error::InvalidModel(format!(
                        "state {s}: kernel row has {} entries for {n} states",
                        dense.len()
                    )));
                }
                let mut row = KernelRow::from_dense(&dense);
                let sum = row.sum();
                if (sum - 1.0).abs() > LOAD_ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "state {s}: kernel row sums to {sum}"
                    )));
                }
                row.normalize();
                out.push(row);
            }
            kernel.push(out);
        }
        let labels = doc.labels.clone();
        let mdp = Self::new(
            doc.states,
            doc.actions,
            doc.admissible,
            doc.cost,
            kernel,
            doc.weight,
            doc.model_class,
        )?;
        match labels {
            Some(l) => mdp.with_labels(l),
            None => Ok(mdp),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }
}

/// Serialized form of a [`FiniteMdp`]. Kernel rows are dense over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub states: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub actions: Vec<f64>,
    pub admissible: Vec<Vec<usize>>,
    pub cost: Vec<Vec<f64>>,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub weight: Vec<f64>,
    pub model_class: ModelClass,
}

/// A function on the state grid with a designated reference state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFn {
    pub values: Vec<f64>,
    pub ref_state: usize,
}

impl ValueFn {
    pub fn new(values: Vec<f64>, ref_state: usize) -> Result<Self> {
        if ref_state >= values.len() {
            return Err(Error::Parameter(format!(
                "reference state {ref_state} out of range for {} states",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("value function has non-finite entries".into()));
        }
        Ok(Self { values, ref_state })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            ref_state: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at_ref(&self) -> f64 {
        self.values[self.ref_state]
    }

    pub fn weighted_norm(&self, w: &[f64]) -> Result<f64> {
        weighted_norm(&self.values, w)
    }
}

/// Deterministic stationary policy; `choice[s]` is a global action index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub choice: Vec<usize>,
}

/// `‖f‖_w = max_s |f(s)| / w(s)`.
pub fn weighted_norm(f: &[f64], w: &[f64]) -> Result<f64> {
    if f.len() != w.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            got: f.len(),
        });
    }
    Ok(f.iter()
        .zip(w)
        .map(|(x, wi)| x.abs() / wi)
        .fold(0.0, f64::max))
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Applies `T_α`; `α = 1` gives the undiscounted operator `T`.
pub fn bellman_apply(mdp: &FiniteMdp, v: &ValueFn, alpha: f64) -> Result<ValueFn> {
    if v.len() != mdp.n_states() {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: v.len(),
        });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} not in (0, 1]")));
    }
    Ok(ValueFn {
        values: mdp.bellman_raw(&v.values, alpha),
        ref_state: v.ref_state,
    })
}

/// Selects, per state, the lowest-position action whose Q-value is within
/// `eps` of the minimum.
pub fn greedy_policy(mdp: &FiniteMdp, v: &ValueFn, alpha: f64, eps: f64) -> Result<StationaryPolicy> {
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be nonnegative")));
    }
    if v.len() != mdp.n_states() {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: v.len(),
        });
    }
    Ok(mdp.policy_from_positions(&greedy_positions(mdp, &v.values, alpha, eps)))
}

pub(crate) fn greedy_positions(mdp: &FiniteMdp, v: &[f64], alpha: f64, eps: f64) -> Vec<usize> {
    let pick = |s: usize| {
        let qs: Vec<f64> = (0..mdp.admissible(s).len())
            .map(|k| mdp.q_value(s, k, v, alpha))
            .collect();
        let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
        qs.iter().position(|&q| q <= min + eps).unwrap_or(0)
    };
    let n = mdp.n_states();
    if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(pick).collect()
    } else {
        (0..n).map(pick).collect()
    }
}

/// Outcome of checking the UC model conditions against candidate constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcModelReport {
    pub c_hat: f64,
    pub lambda: f64,
    pub b: f64,
    pub holds: bool,
    pub violating_states: Vec<usize>,
    /// Smallest `ĉ` with `|c(x,a)| ≤ ĉ w(x)` everywhere.
    pub min_c_hat: f64,
    /// Smallest `b ≥ 0` with `Σ w q ≤ λ w(x) + b` everywhere, for the given `λ`.
    pub min_b: f64,
}

/// Checks `sup_a |c(x,a)| ≤ ĉ w(x)` and `Σ_y w(y) q(y|x,a) ≤ λ w(x) + b`.
pub fn check_uc_model(
    mdp: &FiniteMdp,
    candidate_lambda: f64,
    candidate_b: f64,
    candidate_chat: f64,
) -> Result<UcModelReport> {
    if !(0.0..1.0).contains(&candidate_lambda) {
        return Err(Error::Parameter(format!(
            "lambda = {candidate_lambda} not in [0, 1)"
        )));
    }
    let w = mdp.weight();
    let slack = 1e-12;
    let mut min_c_hat: f64 = 0.0;
    let mut min_b: f64 = 0.0;
    let mut violating = Vec::new();
    for s in 0..mdp.n_states() {
        let mut ok = true;
        for k in 0..mdp.admissible(s).len() {
            let ratio = mdp.costs(s)[k].abs() / w[s];
            min_c_hat = min_c_hat.max(ratio);
            let drift = mdp.rows(s)[k].expect(w);
            let need_b = drift - candidate_lambda * w[s];
            min_b = min_b.max(need_b);
            if ratio > candidate_chat * (1.0 + slack) + slack
                || need_b > candidate_b + slack * w[s].max(1.0)
            {
                ok = false;
            }
        }
        if !ok {
            violating.push(s);
        }
    }
    Ok(UcModelReport {
        c_hat: candidate_chat,
        lambda: candidate_lambda,
        b: candidate_b,
        holds: violating.is_empty(),
        violating_states: violating,
        min_c_hat,
        min_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn self_loop(c: f64) -> FiniteMdp {
        FiniteMdp::new(
            vec![0.0],
            vec![0.0],
            vec![vec![0]],
            vec![vec![c]],
            vec![vec![KernelRow::point_mass(0)]],
            vec![1.0],
            ModelClass::PC,
        )
        .unwrap()
    }

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(weighted_norm(&[0.0, 0.0, 0.0], &[1.0, 3.0, 7.0]).unwrap(), 0.0);
        assert_eq!(weighted_norm(&[2.0, -4.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(
            weighted_norm(&[1.0], &[1.0, 1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn bellman_self_loop() {
        let mdp = self_loop(1.0);
        let v = bellman_apply(&mdp, &ValueFn::zeros(1), 0.5).unwrap();
        assert_eq!(v.values, vec![1.0]);
        let v2 = bellman_apply(&mdp, &ValueFn::new(vec![2.0], 0).unwrap(), 0.5).unwrap();
        assert_eq!(v2.values, vec![2.0]);
        assert!(bellman_apply(&mdp, &ValueFn::zeros(1), 0.0).is_err());
    }

    #[test]
    fn rejects_bad_models() {
        let bad_row = FiniteMdp::new(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![0], vec![0]],
            vec![vec![1.0], vec![1.0]],
            vec![
                vec![KernelRow::from_dense(&[0.5, 0.4])],
                vec![KernelRow::point_mass(1)],
            ],
            vec![1.0, 1.0],
            ModelClass::PC,
        );
        assert!(matches!(bad_row, Err(Error::InvalidModel(_))));

        let empty = FiniteMdp::new(
            vec![0.0],
            vec![0.0],
            vec![vec![]],
            vec![vec![]],
            vec![vec![]],
            vec![1.0],
            ModelClass::PC,
        );
        assert!(empty.is_err());

        let negative_pc = FiniteMdp::new(
            vec![0.0],
            vec![0.0],
            vec![vec![0]],
            vec![vec![-1.0]],
            vec![vec![KernelRow::point_mass(0)]],
            vec![1.0],
            ModelClass::PC,
        );
        assert!(negative_pc.is_err());

        let light_weight = FiniteMdp::new(
            vec![0.0],
            vec![0.0],
            vec![vec![0]],
            vec![vec![1.0]],
            vec![vec![KernelRow::point_mass(0)]],
            vec![0.5],
            ModelClass::UC,
        );
        assert!(light_weight.is_err());
    }

    #[test]
    fn greedy_tie_breaks_low() {
        let mdp = FiniteMdp::new(
            vec![0.0],
            vec![0.0, 1.0],
            vec![vec![0, 1]],
            vec![vec![1.0, 1.0]],
            vec![vec![KernelRow::point_mass(0), KernelRow::point_mass(0)]],
            vec![1.0],
            ModelClass::PC,
        )
        .unwrap();
        let p = greedy_policy(&mdp, &ValueFn::zeros(1), 0.9, 0.0).unwrap();
        assert_eq!(p.choice, vec![0]);
        assert!(greedy_policy(&mdp, &ValueFn::zeros(1), 0.9, -1.0).is_err());
    }

    #[test]
    fn uc_check_bounded_costs() {
        let mdp = self_loop(3.0);
        let r = check_uc_model(&mdp, 0.0, 1.0, 3.0).unwrap();
        assert!(r.holds);
        assert_eq!(r.min_c_hat, 3.0);
        assert_eq!(r.min_b, 1.0);
        assert!(check_uc_model(&mdp, 1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn uc_check_detects_heavy_state() {
        // state 0 sends all mass to state 1 whose weight dwarfs w(0)
        let mdp = FiniteMdp::new(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![0], vec![0]],
            vec![vec![0.0], vec![0.0]],
            vec![vec![KernelRow::point_mass(1)], vec![KernelRow::point_mass(0)]],
            vec![1.0, 1e6],
            ModelClass::UC,
        )
        .unwrap();
        for (lambda, b) in [(0.0, 1.0), (0.5, 100.0), (0.99, 1e3)] {
            let r = check_uc_model(&mdp, lambda, b, 1.0).unwrap();
            assert!(!r.holds);
            assert_eq!(r.violating_states, vec![0]);
        }
    }

    #[test]
    fn document_round_trip() {
        let mdp = self_loop(2.5);
        let text = mdp.to_json().unwrap();
        let back = FiniteMdp::from_json(&text).unwrap();
        assert_eq!(back.costs(0), &[2.5]);
        assert_eq!(back.model_class(), ModelClass::PC);
    }

    #[test]
    fn load_tolerance_is_1e9() {
        let mut doc = self_loop(1.0).to_document();
        doc.kernel[0][0][0] = 1.0 + 5e-10;
        let mdp = FiniteMdp::from_document(doc.clone()).unwrap();
        assert_eq!(mdp.rows(0)[0].sum(), 1.0);
        doc.kernel[0][0][0] = 1.0 + 5e-9;
        assert!(FiniteMdp::from_document(doc).is_err());
    }
}
