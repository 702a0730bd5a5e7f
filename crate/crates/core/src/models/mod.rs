//! Example models: the inventory systems, invariant models and the circle
//! model, as continuous specifications and as grid discretizations.

pub mod assumptions;
pub mod circle;
pub mod demand;
pub mod invariant;
pub mod inventory;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::KernelRow;

pub use assumptions::{verify_example_assumptions, AssumptionCheck, AssumptionReport, ExampleSpec};
pub use circle::build_circle_mdp;
pub use demand::{BaseLaw, DemandFamily, Saturation};
pub use invariant::{build_invariant, InvariantBuild, InvariantModelSpec, PartialInvariance};
pub use inventory::{
    build_pc_inventory, build_uc_production, GridSpec, PcInventorySpec, UcDerived, UcProductionSpec,
};

/// One-dimensional cost descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    Zero,
    Linear { slope: f64 },
    /// `setup · 1[z > 0] + slope · z`.
    Setup { setup: f64, slope: f64 },
    /// `holding · z⁺ + shortage · z⁻`.
    HoldingShortage { holding: f64, shortage: f64 },
    Quadratic { coef: f64 },
}

impl CostFn {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            CostFn::Zero => 0.0,
            CostFn::Linear { slope } => slope * z,
            CostFn::Setup { setup, slope } => {
                if z > 0.0 {
                    setup + slope * z
                } else {
                    slope * z
                }
            }
            CostFn::HoldingShortage { holding, shortage } => {
                holding * z.max(0.0) + shortage * (-z).max(0.0)
            }
            CostFn::Quadratic { coef } => coef * z * z,
        }
    }

    /// Points where the function has kinks or jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CostFn::Setup { .. } | CostFn::HoldingShortage { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// `sup` over `[lo, hi]`; exact for the catalog since every entry is
    /// piecewise monotone with pieces split at 0.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.eval(lo).max(self.eval(hi));
        if lo < 0.0 && hi > 0.0 {
            best = best.max(self.eval(0.0));
        }
        if let CostFn::Setup { .. } = self {
            if hi > 0.0 {
                best = best.max(self.eval(hi.max(f64::MIN_POSITIVE)));
            }
        }
        best
    }
}

/// Uniform grid `x_min + k·step`, `k = 0..n`.
pub(crate) fn uniform_grid(x_min: f64, x_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(x_max > x_min) {
        return Err(Error::Parameter(format!(
            "grid needs n >= 2 and x_max > x_min, got [{x_min}, {x_max}] with {n} points"
        )));
    }
    let step = (x_max - x_min) / (n - 1) as f64;
    Ok((0..n).map(|k| x_min + k as f64 * step).collect())
}

/// Index of the grid cell `[x_j, x_{j+1})` containing `y`, clamped to the grid.
pub(crate) fn floor_index(grid: &[f64], y: f64) -> usize {
    let step = grid[1] - grid[0];
    let k = ((y - grid[0]) / step + 1e-9).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(grid.len() - 1)
    }
}

/// Law of `a - ξ(a)` projected onto the grid: cell `[x_j, x_{j+1})` is sent
/// to `x_j`, mass below the grid to the first state and mass above it to the
/// last state. The projection never moves mass upward.
pub(crate) fn project_next_state(grid: &[f64], demand: &DemandFamily, a: f64) -> KernelRow {
    let n = grid.len();
    let (lo, hi) = demand.support(a);
    let j_lo = floor_index(grid, a - hi).saturating_sub(1);
    let j_hi = (floor_index(grid, a - lo) + 1).min(n - 1);
    let cdf_at = |t: f64| demand.cdf(a, t);
    let mut pairs = Vec::new();
    for j in j_lo..=j_hi {
        let upper = if j == 0 { 1.0 } else { cdf_at(a - grid[j]) };
        let lower = if j + 1 == n { 0.0 } else { cdf_at(a - grid[j + 1]) };
        let mass = upper - lower;
        if mass > 0.0 {
            pairs.push((j, mass));
        }
    }
    let mut row = KernelRow::from_pairs(pairs);
    row.normalize();
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_catalog() {
        let k = CostFn::Setup { setup: 1.0, slope: 1.0 };
        assert_eq!(k.eval(0.0), 0.0);
        assert_eq!(k.eval(2.0), 3.0);
        let psi = CostFn::HoldingShortage { holding: 1.0, shortage: 1.0 };
        assert_eq!(psi.eval(-3.0), 3.0);
        assert_eq!(psi.sup_on(-1.0, 3.0), 3.0);
        assert_eq!(CostFn::Linear { slope: 0.1 }.sup_on(0.0, 3.0), 0.1 * 3.0);
    }

    #[test]
    fn projection_preserves_mass() {
        let grid = uniform_grid(-2.0, 2.0, 41).unwrap();
        let d = DemandFamily::uniform(0.0, 1.0).unwrap();
        for a in [-2.0, -1.55, 0.0, 1.23, 2.0] {
            let row = project_next_state(&grid, &d, a);
            assert!((row.sum() - 1.0).abs() < 1e-12);
            for (j, _) in row.iter() {
                assert!(grid[j] <= a + 1e-12);
            }
        }
        let det = DemandFamily::deterministic(0.1).unwrap();
        let row = project_next_state(&grid, &det, 0.5);
        assert_eq!(row.entries().len(), 1);
        assert!((grid[row.entries()[0].0] - 0.4).abs() < 1e-12);
    }
}
