//! Stable evaluation of the displaced-Fock counting density
//!
//! ```text
//! P(x|n) = Hₙ(x/√2)² e^{-x²/2} / (n! 2ⁿ √(2π))
//! ```
//!
//! in the rescaled units where the displaced vacuum has unit variance
//! (`Var = 2n+1` in general). Evaluation runs the normalized ladder
//!
//! ```text
//! h₀ = 1,   hₙ₊₁ = (x hₙ - √n hₙ₋₁) / √(n+1),   P(x|n) = hₙ² e^{-x²/2}/√(2π),
//! ```
//!
//! with power-of-two rescaling so the range `n ≲ 10⁴`, `|x| ≤ 45` stays
//! inside f64 even where `hₙ` itself would overflow.

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
const RESCALE_LIMIT: f64 = 1.3e151; // ~2^502
const RESCALE_FACTOR: f64 = 7.458340731200207e-155; // 2^-512
const RESCALE_EXP2: i32 = 512;

/// `y · 2^k` without intermediate under/overflow.
fn scale_by_exp2(mut y: f64, mut k: i32) -> f64 {
    while k < -900 {
        y *= (2.0_f64).powi(-900);
        k += 900;
        if y == 0.0 {
            return 0.0;
        }
    }
    while k > 900 {
        y *= (2.0_f64).powi(900);
        k -= 900;
    }
    y * (2.0_f64).powi(k)
}

/// `P(x|n)` for every `n = 0..=n_max` at one point.
pub fn prob_all_orders(n_max: usize, x: f64) -> Vec<f64> {
    // base = e^{-x²/2}/√(2π), carried as mantissa · 2^exp so large |x| works
    let ln_base = -0.5 * x * x - LN_SQRT_2PI;
    let base_exp = (ln_base / std::f64::consts::LN_2).floor();
    let base_mant = (ln_base - base_exp * std::f64::consts::LN_2).exp();
    let base_exp = base_exp as i32;

    let mut out = Vec::with_capacity(n_max + 1);
    let mut h_prev = 0.0_f64;
    let mut h_cur = 1.0_f64;
    let mut scale: i32 = 0; // true hₙ = h_cur · 2^scale

    out.push(scale_by_exp2(base_mant, base_exp));
    for n in 0..n_max {
        let nf = n as f64;
        let h_next = (x * h_cur - nf.sqrt() * h_prev) / (nf + 1.0).sqrt();
        h_prev = h_cur;
        h_cur = h_next;
        if h_cur.abs() > RESCALE_LIMIT || h_prev.abs() > RESCALE_LIMIT {
            h_cur *= RESCALE_FACTOR;
            h_prev *= RESCALE_FACTOR;
            scale += RESCALE_EXP2;
        }
        out.push(scale_by_exp2(h_cur * h_cur * base_mant, base_exp + 2 * scale));
    }
    out
}

/// `P(x|n)` for a single order.
pub fn prob(n: usize, x: f64) -> f64 {
    *prob_all_orders(n, x).last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{density_moments, integrate};
    use approx::assert_relative_eq;

    #[test]
    fn low_orders_match_explicit_polynomials() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &x in &[-3.7, -0.4, 0.0, 1.1, 2.9] {
            assert_relative_eq!(prob(0, x), phi(x), max_relative = 1e-13);
            assert_relative_eq!(prob(1, x), x * x * phi(x), max_relative = 1e-12);
            assert_relative_eq!(
                prob(2, x),
                0.5 * (x * x - 1.0).powi(2) * phi(x),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn matches_independently_computed_references() {
        // frozen from 40-digit evaluation of the closed form
        let cases = [
            (7, 2.2, 0.020686873879077093),
            (40, 1.3, 0.0078087035168391101),
            (500, 0.0, 0.014228135026761886),
            (500, 5.0, 0.00014136874838179654),
            (500, 31.0, 0.000232401217341086),
            (500, 35.0, 0.010687892355806647),
            (1200, 10.0, 0.008477463536186886),
        ];
        for &(n, x, want) in &cases {
            assert_relative_eq!(prob(n, x), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn normalized_and_with_linear_variance() {
        for n in 0..=10 {
            let f = |x: f64| prob(n, x);
            let hi = (2.0 * n as f64 + 1.0).sqrt() + 12.0;
            let mass = integrate(&f, -hi, hi, 1e-12);
            assert!((mass - 1.0).abs() < 1e-10, "n={n}: mass {mass}");
            let (mean, var) = density_moments(&f, -hi, hi, 1e-12);
            assert!(mean.abs() < 1e-10);
            assert!(
                (var - (2.0 * n as f64 + 1.0)).abs() < 1e-8,
                "n={n}: var {var}"
            );
        }
    }

    #[test]
    fn all_orders_consistent_with_single_order() {
        let x = 3.3;
        let all = prob_all_orders(300, x);
        for &n in &[0usize, 5, 77, 300] {
            assert_relative_eq!(all[n], prob(n, x), max_relative = 1e-14);
        }
    }

    #[test]
    fn far_tail_underflows_to_zero_without_panic() {
        let p = prob_all_orders(50, 44.0);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(p[0], 0.0); // e^{-968} is far below f64
    }
}
