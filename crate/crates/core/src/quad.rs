//! Adaptive composite Simpson quadrature.

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Classic adaptive Simpson with Richardson correction on top of an initial
/// 64-panel split, so narrow features cannot hide from the first-level
/// estimate. Recursion in each panel stops when the two-panel estimate
/// agrees with the one-panel estimate to `15 ×` the local tolerance budget,
/// or at a depth of 52.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    const PANELS: usize = 64;
    let tol = (abs_tol / PANELS as f64).max(f64::MIN_POSITIVE);
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    let mut fa = f(a);
    for i in 0..PANELS {
        let lo = a + i as f64 * h;
        let hi = lo + h;
        let m = 0.5 * (lo + hi);
        let fm = f(m);
        let fb = f(hi);
        let whole = h / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(f, lo, hi, fa, fm, fb, whole, tol, 52);
        fa = fb;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Mean and variance of a density by quadrature over `[lo, hi]`.
pub fn density_moments<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, abs_tol: f64) -> (f64, f64) {
    let mean = integrate(&|x| x * f(x), lo, hi, abs_tol);
    let second = integrate(&|x| x * x * f(x), lo, hi, abs_tol);
    (mean, second - mean * mean)
}
