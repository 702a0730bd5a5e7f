//! Action-dependent demand laws with closed-form CDFs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_pieces, DEFAULT_TOL};
use crate::error::{Error, Result};

/// Relative tolerance with which a deterministic demand counts as reached.
const ATOM_TOL: f64 = 1e-9;

/// Law of the unscaled demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum BaseLaw {
    Uniform { lo: f64, hi: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
    /// Exponential with the given rate, conditioned on `[lo, hi]`.
    TruncatedExponential { rate: f64, lo: f64, hi: f64 },
    Deterministic { value: f64 },
}

impl BaseLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaseLaw::Uniform { lo, hi } => lo >= 0.0 && hi > lo,
            BaseLaw::Triangular { lo, mode, hi } => lo >= 0.0 && lo <= mode && mode <= hi && hi > lo,
            BaseLaw::TruncatedExponential { rate, lo, hi } => rate > 0.0 && lo >= 0.0 && hi > lo,
            BaseLaw::Deterministic { value } => value >= 0.0,
        };
        if ok && self.support().1.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid demand law {self:?}")))
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            BaseLaw::Uniform { lo, hi }
            | BaseLaw::Triangular { lo, hi, .. }
            | BaseLaw::TruncatedExponential { lo, hi, .. } => (lo, hi),
            BaseLaw::Deterministic { value } => (value, value),
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        match *self {
            BaseLaw::Uniform { lo, hi } => ((y - lo) / (hi - lo)).clamp(0.0, 1.0),
            BaseLaw::Triangular { lo, mode, hi } => {
                if y <= lo {
                    0.0
                } else if y >= hi {
                    1.0
                } else if y <= mode {
                    (y - lo).powi(2) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - y).powi(2) / ((hi - lo) * (hi - mode))
                }
            }
            BaseLaw::TruncatedExponential { rate, lo, hi } => {
                if y <= lo {
                    0.0
                } else if y >= hi {
                    1.0
                } else {
                    (-(rate * (y - lo))).exp_m1() / (-(rate * (hi - lo))).exp_m1()
                }
            }
            BaseLaw::Deterministic { value } => {
                if y >= value - ATOM_TOL * value.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn density(&self, y: f64) -> f64 {
        match *self {
            BaseLaw::Uniform { lo, hi } => {
                if (lo..=hi).contains(&y) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            BaseLaw::Triangular { lo, mode, hi } => {
                if y < lo || y > hi {
                    0.0
                } else if y <= mode && mode > lo {
                    2.0 * (y - lo) / ((hi - lo) * (mode - lo))
                } else if y > mode {
                    2.0 * (hi - y) / ((hi - lo) * (hi - mode))
                } else {
                    2.0 / (hi - lo)
                }
            }
            BaseLaw::TruncatedExponential { rate, lo, hi } => {
                if y < lo || y > hi {
                    0.0
                } else {
                    rate * (-rate * (y - lo)).exp() / -(-(rate * (hi - lo))).exp_m1()
                }
            }
            BaseLaw::Deterministic { .. } => f64::NAN,
        }
    }

    fn density_bound(&self) -> f64 {
        match *self {
            BaseLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            BaseLaw::Triangular { lo, hi, .. } => 2.0 / (hi - lo),
            BaseLaw::TruncatedExponential { rate, lo, hi } => rate / -(-(rate * (hi - lo))).exp_m1(),
            BaseLaw::Deterministic { .. } => f64::INFINITY,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            BaseLaw::Triangular { mode, .. } => vec![mode],
            _ => Vec::new(),
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match *self {
            BaseLaw::Uniform { lo, hi } => lo + u * (hi - lo),
            BaseLaw::Triangular { lo, mode, hi } => {
                let split = (mode - lo) / (hi - lo);
                if u <= split {
                    lo + (u * (hi - lo) * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
                }
            }
            BaseLaw::TruncatedExponential { rate, lo, hi } => {
                lo - (u * (-(rate * (hi - lo))).exp_m1()).ln_1p() / rate
            }
            BaseLaw::Deterministic { value } => value,
        }
    }
}

/// Demand scaling below a saturation level: `ξ(a) = s(a) ξ₀` with `s`
/// rising linearly from `scale_at_zero` at `a ≤ 0` to 1 at `a ≥ level`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub level: f64,
    pub scale_at_zero: f64,
}

/// Family `{F_a}` of demand laws indexed by the post-order stock level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandFamily {
    pub base: BaseLaw,
    #[serde(default)]
    pub saturation: Option<Saturation>,
}

impl DemandFamily {
    pub fn new(base: BaseLaw, saturation: Option<Saturation>) -> Result<Self> {
        let f = Self { base, saturation };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(base: BaseLaw) -> Result<Self> {
        Self::new(base, None)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::constant(BaseLaw::Uniform { lo, hi })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::constant(BaseLaw::Deterministic { value })
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Some(s) = self.saturation {
            if !(s.level >= 0.0 && s.scale_at_zero >= 0.0 && s.level.is_finite()) {
                return Err(Error::InvalidModel(format!("invalid saturation {s:?}")));
            }
        }
        Ok(())
    }

    /// Level beyond which the law no longer depends on `a`.
    pub fn saturation_level(&self) -> Option<f64> {
        self.saturation.map(|s| s.level)
    }

    pub fn scale(&self, a: f64) -> f64 {
        match self.saturation {
            Some(s) if s.level > 0.0 && a < s.level => {
                let t = (a / s.level).clamp(0.0, 1.0);
                s.scale_at_zero + (1.0 - s.scale_at_zero) * t
            }
            _ => 1.0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.base, BaseLaw::Deterministic { .. })
    }

    /// Whether `F_a` is a point mass.
    pub fn has_atom(&self, a: f64) -> bool {
        self.is_deterministic() || self.scale(a) == 0.0
    }

    pub fn support(&self, a: f64) -> (f64, f64) {
        let s = self.scale(a);
        let (lo, hi) = self.base.support();
        (s * lo, s * hi)
    }

    /// `P(ξ(a) ≤ y)`.
    pub fn cdf(&self, a: f64, y: f64) -> f64 {
        let s = self.scale(a);
        if s == 0.0 {
            return if y >= 0.0 { 1.0 } else { 0.0 };
        }
        self.base.cdf(y / s)
    }

    /// Density of `ξ(a)` at `y`; `None` for point masses.
    pub fn density(&self, a: f64, y: f64) -> Option<f64> {
        if self.has_atom(a) {
            return None;
        }
        let s = self.scale(a);
        Some(self.base.density(y / s) / s)
    }

    /// `sup_y f_a(y)`; infinite for point masses.
    pub fn density_bound(&self, a: f64) -> f64 {
        let s = self.scale(a);
        if s == 0.0 {
            f64::INFINITY
        } else {
            self.base.density_bound() / s
        }
    }

    /// `E[f(ξ(a))]`; `breaks` lists points where `f` has kinks or jumps.
    pub fn expect<F: Fn(f64) -> f64>(&self, a: f64, f: F, breaks: &[f64]) -> f64 {
        if self.has_atom(a) {
            return f(self.support(a).0);
        }
        let (lo, hi) = self.support(a);
        let s = self.scale(a);
        let mut all: Vec<f64> = breaks.to_vec();
        all.extend(self.base.breakpoints().into_iter().map(|b| b * s));
        let width = (hi - lo).max(1.0);
        integrate_pieces(
            |y| f(y) * self.base.density(y / s) / s,
            lo,
            hi,
            &all,
            DEFAULT_TOL * width.min(1.0),
        )
    }

    pub fn mean(&self, a: f64) -> f64 {
        let s = self.scale(a);
        let m = match self.base {
            BaseLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            BaseLaw::Triangular { lo, mode, hi } => (lo + mode + hi) / 3.0,
            BaseLaw::Deterministic { value } => value,
            BaseLaw::TruncatedExponential { .. } => return self.expect(a, |y| y, &[]),
        };
        s * m
    }

    /// `E[ξ(a) 1(ξ(a) > d)]`, right-continuous in `d`.
    pub fn tail_expectation(&self, a: f64, d: f64) -> f64 {
        if self.has_atom(a) {
            let v = self.support(a).0;
            return if v > d { v } else { 0.0 };
        }
        let (lo, hi) = self.support(a);
        if d >= hi {
            return 0.0;
        }
        let from = d.max(lo);
        let s = self.scale(a);
        let breaks: Vec<f64> = self.base.breakpoints().into_iter().map(|b| b * s).collect();
        integrate_pieces(|y| y * self.base.density(y / s) / s, from, hi, &breaks, DEFAULT_TOL)
    }

    pub fn sample<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.scale(a) * self.base.quantile(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn catalog() -> Vec<DemandFamily> {
        vec![
            DemandFamily::uniform(1.0, 2.0).unwrap(),
            DemandFamily::constant(BaseLaw::Triangular { lo: 0.5, mode: 1.0, hi: 3.0 }).unwrap(),
            DemandFamily::constant(BaseLaw::TruncatedExponential { rate: 2.0, lo: 0.0, hi: 4.0 }).unwrap(),
            DemandFamily::new(
                BaseLaw::Uniform { lo: 1.0, hi: 3.0 },
                Some(Saturation { level: 2.0, scale_at_zero: 0.5 }),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn densities_integrate_to_one() {
        for f in catalog() {
            for a in [-1.0, 0.0, 0.7, 2.0, 9.0] {
                let total = f.expect(a, |_| 1.0, &[]);
                assert!((total - 1.0).abs() < 1e-8, "{f:?} at {a}: {total}");
                let (lo, hi) = f.support(a);
                assert_eq!(f.cdf(a, lo - 1e-6), 0.0);
                assert_eq!(f.cdf(a, hi), 1.0);
            }
        }
    }

    #[test]
    fn means_match_quadrature() {
        for f in catalog() {
            for a in [0.0, 1.0, 5.0] {
                let q = f.expect(a, |y| y, &[]);
                assert!((f.mean(a) - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_tail_closed_form() {
        let f = DemandFamily::uniform(1.0, 2.0).unwrap();
        for d in [0.0f64, 1.0, 1.3, 1.581, 2.0, 2.5] {
            let c = d.clamp(1.0, 2.0);
            let exact = (4.0 - c * c) / 2.0;
            assert!((f.tail_expectation(0.0, d) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn saturation_is_constant_above_level() {
        let f = &catalog()[3];
        assert_eq!(f.support(2.0), f.support(10.0));
        assert_eq!(f.support(0.0), (0.5, 1.5));
        assert!((f.mean(1.0) - 0.75 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn atom_at_zero_scale() {
        let f = DemandFamily::new(
            BaseLaw::Uniform { lo: 1.0, hi: 2.0 },
            Some(Saturation { level: 1.0, scale_at_zero: 0.0 }),
        )
        .unwrap();
        assert!(f.has_atom(0.0));
        assert_eq!(f.density_bound(-1.0), f64::INFINITY);
        assert!(f.density_bound(1.0).is_finite());
    }

    #[test]
    fn deterministic_cdf_tolerates_rounding() {
        let f = DemandFamily::deterministic(0.05).unwrap();
        assert_eq!(f.cdf(0.0, 0.15 - 0.1), 1.0);
        assert_eq!(f.cdf(0.0, 0.049), 0.0);
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for f in catalog() {
            for _ in 0..1000 {
                let x = f.sample(1.0, &mut rng);
                let (lo, hi) = f.support(1.0);
                assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
    }
}
