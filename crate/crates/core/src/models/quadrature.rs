//! Adaptive Simpson quadrature.

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, m, fm, whole, tol, MAX_DEPTH)
}

/// Integrates over `[a,b]` split at the interior breakpoints, so kinks and
/// jumps of the integrand do not slow convergence.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut lo = a;
    let mut total = 0.0;
    let pieces = pts.len() + 1;
    for hi in pts.into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, hi, tol / pieces as f64);
        lo = hi;
    }
    total
}
