//! Checkers for the model hypotheses: action-set selection, minimal
//! majorizing measures, uniform-integrability tails, the global majorizer
//! test, Egoroff sets and lower epi-limit diagnostics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::solver::DcoeSolution;

/// Slack used when comparing exact inequalities in floating point.
pub const CHAIN_SLACK: f64 = 1e-9;

/// Minimal measure dominating `q(·|x,a)` for every `a ∈ K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorizationWitness {
    pub state: usize,
    pub eps: f64,
    /// Global action indices.
    pub k_eps: Vec<usize>,
    pub nu_atoms: BTreeMap<usize, f64>,
    pub nu_total: f64,
    /// `(ℓ, sup_{a∈K} Σ_{g(y)≥ℓ} g(y) q(y|x,a))`.
    pub ui_tail: Vec<(f64, f64)>,
}

impl MajorizationWitness {
    pub fn mass(&self, y: usize) -> f64 {
        self.nu_atoms.get(&y).copied().unwrap_or(0.0)
    }

    /// `ν(B)` for a set of states.
    pub fn measure(&self, set: &[usize]) -> f64 {
        set.iter().map(|&y| self.mass(y)).sum()
    }
}

fn positions_of(mdp: &FiniteMdp, state: usize, k: &[usize]) -> Result<Vec<usize>> {
    if state >= mdp.n_states() {
        return Err(Error::Parameter(format!("state {state} out of range")));
    }
    if k.is_empty() {
        return Err(Error::Parameter("action subset must be nonempty".into()));
    }
    k.iter()
        .map(|&a| {
            mdp.action_position(state, a).ok_or_else(|| {
                Error::Parameter(format!("action {a} is not admissible at state {state}"))
            })
        })
        .collect()
}

/// Smallest prefix (by Q-value rank at the largest supplied α) of the
/// admissible actions satisfying
/// `min_{a∈K} {c + α Σ v_α q} ≤ v_α(x) + ε` for every solution with
/// `α ≥ alpha_bar`. When `alpha_bar` is `None` the last half of the supplied
/// solutions (by α) is used.
pub fn select_k_eps(
    mdp: &FiniteMdp,
    state: usize,
    eps: f64,
    solutions: &[DcoeSolution],
    alpha_bar: Option<f64>,
) -> Result<Vec<usize>> {
    if solutions.is_empty() {
        return Err(Error::Parameter("no discounted solutions supplied".into()));
    }
    if state >= mdp.n_states() {
        return Err(Error::Parameter(format!("state {state} out of range")));
    }
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be nonnegative")));
    }
    let mut sorted: Vec<&DcoeSolution> = solutions.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let used: Vec<&DcoeSolution> = match alpha_bar {
        Some(bar) => sorted.iter().copied().filter(|s| s.alpha >= bar).collect(),
        None => sorted[sorted.len() / 2..].to_vec(),
    };
    if used.is_empty() {
        return Err(Error::Parameter("no solution with alpha >= alpha_bar".into()));
    }
    let last = used[used.len() - 1];
    let n_adm = mdp.admissible(state).len();
    let mut order: Vec<usize> = (0..n_adm).collect();
    order.sort_by(|&i, &j| {
        last.q_gap(mdp, state, i)
            .total_cmp(&last.q_gap(mdp, state, j))
            .then(i.cmp(&j))
    });
    let gaps: Vec<Vec<f64>> = used
        .iter()
        .map(|s| (0..n_adm).map(|k| s.q_gap(mdp, state, k)).collect())
        .collect();
    let mut best = vec![f64::INFINITY; used.len()];
    for (len, &k) in order.iter().enumerate() {
        for (b, g) in best.iter_mut().zip(&gaps) {
            *b = b.min(g[k]);
        }
        if best.iter().all(|&b| b <= eps) || len + 1 == n_adm {
            let adm = mdp.admissible(state);
            let mut chosen: Vec<usize> = order[..=len].iter().map(|&p| adm[p]).collect();
            chosen.sort_unstable();
            return Ok(chosen);
        }
    }
    unreachable!("admissible sets are nonempty")
}

/// Re-checks the selection inequality for `K` against every solution.
pub fn k_eps_holds(
    mdp: &FiniteMdp,
    state: usize,
    eps: f64,
    k: &[usize],
    solutions: &[DcoeSolution],
) -> Result<bool> {
    let pos = positions_of(mdp, state, k)?;
    Ok(solutions.iter().all(|s| {
        pos.iter()
            .map(|&p| s.q_gap(mdp, state, p))
            .fold(f64::INFINITY, f64::min)
            <= eps
    }))
}

/// Coordinatewise maximum of the rows `q(·|x,a)`, `a ∈ K`. The tail profile
/// uses `g = w` at every distinct weight level on the support of `ν`.
pub fn minimal_majorizer(mdp: &FiniteMdp, state: usize, k: &[usize]) -> Result<MajorizationWitness> {
    let pos = positions_of(mdp, state, k)?;
    let rows = mdp.rows(state);
    let mut atoms: BTreeMap<usize, f64> = BTreeMap::new();
    for &p in &pos {
        for (y, q) in rows[p].iter() {
            let e = atoms.entry(y).or_insert(0.0);
            *e = e.max(q);
        }
    }
    let nu_total = atoms.values().sum();
    let w = mdp.weight();
    let mut levels: Vec<f64> = atoms.keys().map(|&y| w[y]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut k_sorted = k.to_vec();
    k_sorted.sort_unstable();
    let mut witness = MajorizationWitness {
        state,
        eps: 0.0,
        k_eps: k_sorted,
        nu_atoms: atoms,
        nu_total,
        ui_tail: Vec::new(),
    };
    witness.ui_tail = uniform_integrability_tail(mdp, state, &witness.k_eps, w, &levels)?;
    Ok(witness)
}

/// Majorizers for every state in parallel, with `K(x) = A(x)`.
pub fn majorizers_full(mdp: &FiniteMdp) -> Result<Vec<MajorizationWitness>> {
    (0..mdp.n_states())
        .into_par_iter()
        .map(|s| minimal_majorizer(mdp, s, mdp.admissible(s)))
        .collect()
}

/// Margin below 2 required of the total majorizer mass, so that rounding
/// in the sum cannot turn an exact 2 into a pass.
pub const GUS_SLACK: f64 = 1e-9;

/// Total mass of the minimal measure dominating every kernel row of the
/// model, and whether it is below `2 - GUS_SLACK`.
pub fn gus_test(mdp: &FiniteMdp) -> (f64, bool) {
    let mut nu = vec![0.0f64; mdp.n_states()];
    for s in 0..mdp.n_states() {
        for row in mdp.rows(s) {
            for (y, q) in row.iter() {
                nu[y] = nu[y].max(q);
            }
        }
    }
    let total: f64 = nu.iter().sum();
    (total, total < 2.0 - GUS_SLACK)
}

/// `sup_{a∈K} Σ_{y: g(y) ≥ ℓ} g(y) q(y|x,a)` for each level.
pub fn uniform_integrability_tail(
    mdp: &FiniteMdp,
    state: usize,
    k: &[usize],
    g: &[f64],
    levels: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if g.len() != mdp.n_states() {
        return Err(Error::Dimension {
            expected: mdp.n_states(),
            got: g.len(),
        });
    }
    if let Some(x) = g.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("integrand must be nonnegative, found {x}")));
    }
    if levels.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Parameter("levels must be strictly increasing".into()));
    }
    let pos = positions_of(mdp, state, k)?;
    let rows = mdp.rows(state);
    Ok(levels
        .iter()
        .map(|&l| {
            let sup = pos
                .iter()
                .map(|&p| {
                    rows[p]
                        .iter()
                        .filter(|&(y, _)| g[y] >= l)
                        .map(|(y, q)| g[y] * q)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            (l, sup)
        })
        .collect())
}

/// Set on which a sequence converges uniformly, up to a set of small
/// `ν`-mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoroffResult {
    #[serde(rename = "D")]
    pub d: Vec<usize>,
    pub complement_mass: f64,
    pub n_star: usize,
    pub uniform_gap: f64,
}

fn tail_deviation(f_seq: &[Vec<f64>], f_limit: &[f64], n_star: usize, s: usize) -> f64 {
    f_seq[n_star..]
        .iter()
        .map(|f| (f[s] - f_limit[s]).abs())
        .fold(0.0, f64::max)
}

impl EgoroffResult {
    /// Recomputes the gap and the complement mass from the raw inputs.
    pub fn verify(
        &self,
        f_seq: &[Vec<f64>],
        f_limit: &[f64],
        nu: &MajorizationWitness,
        delta: f64,
        eta: f64,
    ) -> bool {
        if self.n_star >= f_seq.len() {
            return false;
        }
        let gap = self
            .d
            .iter()
            .map(|&s| tail_deviation(f_seq, f_limit, self.n_star, s))
            .fold(0.0, f64::max);
        let complement: f64 = (0..f_limit.len())
            .filter(|s| self.d.binary_search(s).is_err())
            .map(|s| nu.mass(s))
            .sum();
        gap <= eta && complement < delta
    }
}

/// Scans `n_star` upward and drops every state whose deviation
/// `sup_{m≥n_star} |f_m - f|` exceeds `eta`; returns the first index at which
/// the dropped states carry `ν`-mass below `delta`.
pub fn egoroff_extract(
    f_seq: &[Vec<f64>],
    f_limit: &[f64],
    nu: &MajorizationWitness,
    delta: f64,
    eta: f64,
) -> Result<EgoroffResult> {
    if f_seq.is_empty() {
        return Err(Error::Parameter("empty sequence".into()));
    }
    if !(delta > 0.0 && eta > 0.0) {
        return Err(Error::Parameter("delta and eta must be positive".into()));
    }
    let n = f_limit.len();
    if let Some(f) = f_seq.iter().find(|f| f.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: f.len(),
        });
    }
    // Suffix maxima of |f_m - f| give the tail deviation for every n_star.
    let mut dev = vec![0.0f64; n];
    let mut tails = vec![Vec::new(); f_seq.len()];
    for m in (0..f_seq.len()).rev() {
        for s in 0..n {
            dev[s] = dev[s].max((f_seq[m][s] - f_limit[s]).abs());
        }
        tails[m] = dev.clone();
    }
    for (n_star, dev) in tails.iter().enumerate() {
        let mut d = Vec::new();
        let mut complement_mass = 0.0;
        let mut uniform_gap = 0.0f64;
        for (s, &e) in dev.iter().enumerate() {
            if e > eta {
                complement_mass += nu.mass(s);
            } else {
                d.push(s);
                uniform_gap = uniform_gap.max(e);
            }
        }
        if complement_mass < delta {
            return Ok(EgoroffResult {
                d,
                complement_mass,
                n_star,
                uniform_gap,
            });
        }
    }
    Err(Error::InsufficientSequence(format!(
        "no index within {} terms leaves a complement of mass below {delta}",
        f_seq.len()
    )))
}

/// Grid approximation of the lower epi-limit and the inequality chain
/// `liminf inf f_n ≤ inf e-lim f_n ≤ inf liminf f_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiDiagnostics {
    pub lower_epilimit: Vec<f64>,
    pub inf_sequence_liminf: f64,
    pub inf_of_epilimit: f64,
    pub inf_of_pointwise_liminf: f64,
    pub chain_ok: bool,
    pub radius_cells: usize,
    /// First index of the tail over which finite-sequence liminfs are taken.
    pub tail_start: usize,
}

/// Start of the tail (last half) used for finite-sequence liminfs.
fn tail_start(len: usize) -> usize {
    len / 2
}

fn validate_sequence(f_seq: &[Vec<f64>], grid: &[f64]) -> Result<()> {
    if f_seq.is_empty() {
        return Err(Error::Parameter("empty sequence".into()));
    }
    if grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Parameter("grid must be sorted".into()));
    }
    if let Some(f) = f_seq.iter().find(|f| f.len() != grid.len()) {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: f.len(),
        });
    }
    Ok(())
}

pub fn lower_epilimit(f_seq: &[Vec<f64>], grid: &[f64]) -> Result<EpiDiagnostics> {
    lower_epilimit_with(f_seq, grid, 1)
}

/// Lower epi-limit with balls of `radius_cells` grid cells: at each grid
/// point, the tail-liminf of the ball minimum of `f_n`.
pub fn lower_epilimit_with(
    f_seq: &[Vec<f64>],
    grid: &[f64],
    radius_cells: usize,
) -> Result<EpiDiagnostics> {
    validate_sequence(f_seq, grid)?;
    let n = grid.len();
    let start = tail_start(f_seq.len());
    let tail = &f_seq[start..];
    let mut epi = vec![f64::INFINITY; n];
    let mut pointwise = vec![f64::INFINITY; n];
    for f in tail {
        for i in 0..n {
            let lo = i.saturating_sub(radius_cells);
            let hi = (i + radius_cells).min(n - 1);
            let ball = f[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
            epi[i] = epi[i].min(ball);
            pointwise[i] = pointwise[i].min(f[i]);
        }
    }
    let inf_sequence_liminf = tail
        .iter()
        .map(|f| f.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let inf_of_epilimit = epi.iter().copied().fold(f64::INFINITY, f64::min);
    let inf_of_pointwise_liminf = pointwise.iter().copied().fold(f64::INFINITY, f64::min);
    let chain_ok = inf_sequence_liminf <= inf_of_epilimit
        && inf_of_epilimit <= inf_of_pointwise_liminf + CHAIN_SLACK;
    Ok(EpiDiagnostics {
        lower_epilimit: epi,
        inf_sequence_liminf,
        inf_of_epilimit,
        inf_of_pointwise_liminf,
        chain_ok,
        radius_cells,
        tail_start: start,
    })
}

/// Whether the interior of the grid (both endpoints excluded) carries
/// `eps`-minimizers along a subsequence: the inequality must hold at the
/// final index and on at least half of the tail.
pub fn epi_compactness_condition(f_seq: &[Vec<f64>], grid: &[f64], eps: f64) -> Result<bool> {
    validate_sequence(f_seq, grid)?;
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let n = grid.len();
    if n < 3 {
        return Ok(true);
    }
    let holds = |f: &Vec<f64>| {
        let inf_all = f.iter().copied().fold(f64::INFINITY, f64::min);
        let inf_k = f[1..n - 1].iter().copied().fold(f64::INFINITY, f64::min);
        inf_k <= inf_all + eps
    };
    let tail = &f_seq[tail_start(f_seq.len())..];
    let good = tail.iter().filter(|f| holds(f)).count();
    Ok(holds(&f_seq[f_seq.len() - 1]) && 2 * good >= tail.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{KernelRow, ModelClass};

    fn two_action_disjoint() -> FiniteMdp {
        FiniteMdp::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.0, 1.0],
            vec![vec![0, 1], vec![0], vec![0], vec![0]],
            vec![vec![0.0, 1.0], vec![0.0], vec![0.0], vec![0.0]],
            vec![
                vec![
                    KernelRow::from_pairs(vec![(0, 0.5), (1, 0.5)]),
                    KernelRow::from_pairs(vec![(2, 0.25), (3, 0.75)]),
                ],
                vec![KernelRow::point_mass(0)],
                vec![KernelRow::point_mass(0)],
                vec![KernelRow::point_mass(0)],
            ],
            vec![1.0, 2.0, 3.0, 4.0],
            ModelClass::UC,
        )
        .unwrap()
    }

    #[test]
    fn majorizer_single_and_disjoint() {
        let mdp = two_action_disjoint();
        let one = minimal_majorizer(&mdp, 0, &[0]).unwrap();
        assert!((one.nu_total - 1.0).abs() < 1e-15);
        let both = minimal_majorizer(&mdp, 0, &[0, 1]).unwrap();
        assert!((both.nu_total - 2.0).abs() < 1e-15);
        assert!(both.ui_tail.windows(2).all(|p| p[1].1 <= p[0].1));
        assert!(minimal_majorizer(&mdp, 1, &[1]).is_err());
        assert!(minimal_majorizer(&mdp, 0, &[]).is_err());
    }

    #[test]
    fn ui_tail_basics() {
        let mdp = two_action_disjoint();
        let ones = vec![1.0; 4];
        let t = uniform_integrability_tail(&mdp, 0, &[0, 1], &ones, &[0.5]).unwrap();
        assert_eq!(t[0].1, 1.0);
        let t = uniform_integrability_tail(&mdp, 0, &[0, 1], mdp.weight(), &[4.5]).unwrap();
        assert_eq!(t[0].1, 0.0);
        assert!(uniform_integrability_tail(&mdp, 0, &[0], &[1.0, -1.0, 0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn gus_identical_rows() {
        let row = KernelRow::from_pairs(vec![(0, 0.3), (1, 0.7)]);
        let mdp = FiniteMdp::new(
            vec![0.0, 1.0],
            vec![0.0],
            vec![vec![0], vec![0]],
            vec![vec![0.0], vec![0.0]],
            vec![vec![row.clone()], vec![row]],
            vec![1.0, 1.0],
            ModelClass::PC,
        )
        .unwrap();
        let (mass, passes) = gus_test(&mdp);
        assert!((mass - 1.0).abs() < 1e-15 && passes);
    }

    #[test]
    fn egoroff_constant_sequence() {
        let f = vec![1.0, 2.0, 3.0];
        let nu = MajorizationWitness {
            state: 0,
            eps: 0.0,
            k_eps: vec![0],
            nu_atoms: (0..3).map(|s| (s, 1.0)).collect(),
            nu_total: 3.0,
            ui_tail: vec![],
        };
        let r = egoroff_extract(&[f.clone(), f.clone()], &f, &nu, 0.1, 0.1).unwrap();
        assert_eq!(r.d, vec![0, 1, 2]);
        assert_eq!(r.n_star, 0);
        assert_eq!(r.complement_mass, 0.0);
        assert!(r.verify(&[f.clone(), f.clone()], &f, &nu, 0.1, 0.1));
        let far = vec![vec![10.0, 2.0, 3.0]];
        assert!(matches!(
            egoroff_extract(&far, &f, &nu, 0.5, 0.1),
            Err(Error::InsufficientSequence(_))
        ));
    }

    #[test]
    fn epilimit_alternating() {
        let grid: Vec<f64> = (0..5).map(f64::from).collect();
        let g = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let h = vec![2.0, 7.0, 1.0, 8.0, 2.0];
        let seq: Vec<Vec<f64>> = (0..10).map(|n| if n % 2 == 0 { g.clone() } else { h.clone() }).collect();
        let d = lower_epilimit_with(&seq, &grid, 0).unwrap();
        let expect: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a.min(*b)).collect();
        assert_eq!(d.lower_epilimit, expect);
        assert_eq!(d.inf_of_epilimit, 1.0);
        assert_eq!(d.inf_sequence_liminf, 1.0);
        assert!(d.chain_ok);
        let d1 = lower_epilimit(&seq, &grid).unwrap();
        assert!(d1.lower_epilimit.iter().zip(&expect).all(|(a, b)| a <= b));
    }

    #[test]
    fn epi_compactness_examples() {
        let grid: Vec<f64> = (0..=10).map(f64::from).collect();
        let constant = vec![vec![2.0; 11]; 8];
        assert!(epi_compactness_condition(&constant, &grid, 0.1).unwrap());
        let escaping: Vec<Vec<f64>> = (1..=20)
            .map(|n| grid.iter().map(|y| (y - n as f64).abs()).collect())
            .collect();
        assert!(!epi_compactness_condition(&escaping, &grid, 0.4).unwrap());
        let inside: Vec<Vec<f64>> = (1..=20)
            .map(|n| grid.iter().map(|y| (y - 5.0).abs() + 1.0 / n as f64).collect())
            .collect();
        assert!(epi_compactness_condition(&inside, &grid, 0.1).unwrap());
    }
}
