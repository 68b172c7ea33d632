//! Adaptive Simpson quadrature.
//!
//! Good enough for every integral in this crate: smooth pulse shapes,
//! Gaussian-weighted averages and slowly oscillating tails over finite
//! windows. Discontinuous integrands must be split at their breakpoints by
//! the caller.

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    min_depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || (min_depth == 0 && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    let md = min_depth.saturating_sub(1);
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, md)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, md)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is pre-split into 7 panels and each panel is forced through
/// two subdivision levels before the error estimate may terminate, so
/// features the first Simpson nodes happen to miss (narrow peaks, zeros
/// aligned with the nodes) still get seen.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    const PANELS: u32 = 7;
    let mut total = 0.0;
    for k in 0..PANELS {
        let pa = a + (b - a) * k as f64 / PANELS as f64;
        let pb = a + (b - a) * (k + 1) as f64 / PANELS as f64;
        let m = 0.5 * (pa + pb);
        let fa = f(pa);
        let fm = f(m);
        let fb = f(pb);
        let whole = simpson(fa, fm, fb, pb - pa);
        total += adapt(&f, pa, pb, fa, fm, fb, whole, tol / PANELS as f64, 48, 2);
    }
    total
}

/// Integrate over `[a, b]` splitting at the interior `points` first.
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| *p > a && *p < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    let n = cuts.len() + 1;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, hi, tol / n as f64);
        lo = hi;
    }
    total
}
