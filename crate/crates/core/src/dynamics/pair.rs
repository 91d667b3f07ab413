//! Loss-free propagation on the invariant pair subspace.
//!
//! With Γ = 0 the master equation started from vacuum (or any squeezed
//! vacuum) never leaves `span{|n,n⟩}`: pair creation moves occupation along
//! the diagonal only. On that subspace the generator is the tridiagonal
//! Hamiltonian
//!
//! ```text
//! ⟨n|H|n⟩ = 2δn,   ⟨n+1|H|n⟩ = ω(n+1),
//! ```
//!
//! and the state stays pure, so evolution reduces to `ψ(t) = exp(-iHt)ψ(0)`
//! on an `(n_max + 1)`-vector. This is what makes large mean pair numbers
//! (`sinh²(ωt)` in the thousands) affordable: the cutoff only has to cover
//! the occupation tail, not a two-mode matrix.
//!
//! The exponential is expanded in Chebyshev polynomials of the spectrally
//! rescaled Hamiltonian with Bessel-function coefficients; the series is
//! truncated once the coefficients are far below double precision, so the
//! propagator is exact to round-off at roughly one `H`-application per unit
//! of `‖H‖·t`.

use num_complex::Complex64;

use crate::fockspace::{DensityMatrix, FockCutoff};
use crate::{Error, Result};

use super::BOUNDARY_POPULATION_TOL;

/// Pure state on the pair subspace `span{|n,n⟩}`.
#[derive(Debug, Clone)]
pub struct PairState {
    cutoff: FockCutoff,
    amps: Vec<Complex64>,
}

impl PairState {
    pub fn vacuum(cutoff: FockCutoff) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.dim()];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { cutoff, amps }
    }

    /// Truncated squeezed vacuum `ψₙ ∝ (-i tanh ξ)ⁿ / cosh ξ`, with tail mass.
    pub fn from_tmsv(xi: f64, cutoff: FockCutoff) -> Result<(Self, f64)> {
        if !(xi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "squeezing parameter must be nonnegative, got {xi}"
            )));
        }
        let mut amps = Vec::with_capacity(cutoff.dim());
        let ratio = Complex64::new(0.0, -xi.tanh());
        let mut amp = Complex64::new(1.0 / xi.cosh(), 0.0);
        for _ in 0..cutoff.dim() {
            amps.push(amp);
            amp *= ratio;
        }
        let tail = xi.tanh().powi(2).powi(cutoff.dim() as i32);
        let mut state = Self { cutoff, amps };
        state.renormalize();
        Ok((state, tail))
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for a in &mut self.amps {
                *a /= norm;
            }
        }
    }

    /// `⟨N₊⟩ = Σ n |ψₙ|²` (equal to `⟨N₋⟩` on this subspace).
    pub fn n_plus_mean(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    /// Population of the last retained occupation.
    pub fn boundary_population(&self) -> f64 {
        self.amps.last().map(|a| a.norm_sqr()).unwrap_or(0.0)
    }

    /// Embed as a two-mode density matrix (small cutoffs; for cross-checks).
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let dim = self.cutoff.two_mode_dim();
        let mut full = vec![Complex64::new(0.0, 0.0); dim];
        for (n, a) in self.amps.iter().enumerate() {
            full[self.cutoff.index(n, n)] = *a;
        }
        DensityMatrix::from_pure(&full, self.cutoff)
    }
}

/// `y = (H - center) x / half_width` with the tridiagonal pair Hamiltonian.
fn apply_scaled(
    x: &[Complex64],
    y: &mut [Complex64],
    omega: f64,
    delta: f64,
    center: f64,
    half_width: f64,
) {
    let n = x.len();
    let inv = 1.0 / half_width;
    for m in 0..n {
        let mut acc = Complex64::new((2.0 * delta * m as f64 - center) * inv, 0.0) * x[m];
        if m > 0 {
            acc += Complex64::new(omega * m as f64 * inv, 0.0) * x[m - 1];
        }
        if m + 1 < n {
            acc += Complex64::new(omega * (m + 1) as f64 * inv, 0.0) * x[m + 1];
        }
        y[m] = acc;
    }
}

/// `J₀(z) … J_{k_max}(z)` by Miller's downward recurrence, normalized with
/// `J₀ + 2 Σ J₂ₘ = 1`.
pub fn bessel_j_sequence(k_max: usize, z: f64) -> Vec<f64> {
    assert!(z >= 0.0, "order sequence only for z ≥ 0");
    if z == 0.0 {
        let mut out = vec![0.0; k_max + 1];
        out[0] = 1.0;
        return out;
    }
    let start = k_max + 40 + (z.sqrt() as usize);
    let mut values = vec![0.0_f64; start + 2];
    values[start + 1] = 0.0;
    values[start] = 1e-300;
    for m in (1..=start).rev() {
        let next = (2.0 * m as f64 / z) * values[m] - values[m + 1];
        values[m - 1] = next;
        if next.abs() > 1e250 {
            for v in values[m - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = values[0];
    let mut m = 2;
    while m <= start {
        norm += 2.0 * values[m];
        m += 2;
    }
    values.truncate(k_max + 1);
    for v in &mut values {
        *v /= norm;
    }
    values
}

/// Chebyshev expansion of `exp(-iHt)` applied to `state`.
///
/// The spectral interval comes from Gershgorin disks with a small safety
/// margin; the expansion order is `‖H‖t` plus a tail wide enough that the
/// dropped Bessel coefficients are below double precision.
pub fn propagate_pair_state(
    state: &PairState,
    omega: f64,
    delta: f64,
    t: f64,
) -> Result<PairState> {
    if !(omega >= 0.0) || !delta.is_finite() || !(t >= 0.0) {
        return Err(Error::InvalidParameter(
            "pair propagation needs omega ≥ 0, finite delta, t ≥ 0".into(),
        ));
    }
    let n = state.amps.len();
    if t == 0.0 || n == 1 {
        return Ok(state.clone());
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in 0..n {
        let d = 2.0 * delta * m as f64;
        let mut r = 0.0;
        if m > 0 {
            r += omega * m as f64;
        }
        if m + 1 < n {
            r += omega * (m + 1) as f64;
        }
        lo = lo.min(d - r);
        hi = hi.max(d + r);
    }
    let center = 0.5 * (hi + lo);
    let half_width = (0.5 * (hi - lo) * 1.0005).max(1e-300);

    let z = half_width * t;
    let order = (z + 15.0 * z.cbrt() + 30.0).ceil() as usize;
    let bessel = bessel_j_sequence(order, z);

    let mut phi_prev = state.amps.clone();
    let mut phi_cur = vec![Complex64::new(0.0, 0.0); n];
    apply_scaled(&phi_prev, &mut phi_cur, omega, delta, center, half_width);

    // acc = Σₖ (2 - δ₀ₖ)(-i)ᵏ Jₖ(z) Tₖ(H̃) ψ
    let mut acc: Vec<Complex64> = phi_prev.iter().map(|a| a * bessel[0]).collect();
    let mut coeff_phase = Complex64::new(0.0, -1.0); // (-i)^k
    for (a, p) in acc.iter_mut().zip(&phi_cur) {
        *a += coeff_phase * 2.0 * bessel[1] * p;
    }
    let mut phi_next = vec![Complex64::new(0.0, 0.0); n];
    for item in bessel.iter().take(order + 1).skip(2) {
        coeff_phase *= Complex64::new(0.0, -1.0);
        apply_scaled(&phi_cur, &mut phi_next, omega, delta, center, half_width);
        for m in 0..n {
            phi_next[m] = phi_next[m] * 2.0 - phi_prev[m];
        }
        let c = coeff_phase * 2.0 * item;
        for (a, p) in acc.iter_mut().zip(&phi_next) {
            *a += c * p;
        }
        std::mem::swap(&mut phi_prev, &mut phi_cur);
        std::mem::swap(&mut phi_cur, &mut phi_next);
    }

    let global = Complex64::new(0.0, -center * t).exp();
    for a in &mut acc {
        *a *= global;
    }
    let mut out = PairState {
        cutoff: state.cutoff,
        amps: acc,
    };
    out.renormalize();
    Ok(out)
}

/// `⟨N₊⟩(t)` along `times` for Γ = 0 evolution from vacuum. Errors if the
/// occupation tail ever reaches the cutoff boundary.
pub fn pair_growth_curve(
    omega: f64,
    delta: f64,
    cutoff: FockCutoff,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut sorted: Vec<(usize, f64)> = times.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    if let Some(&(_, first)) = sorted.first() {
        if first < 0.0 {
            return Err(Error::InvalidParameter("negative sample time".into()));
        }
    }
    let mut out = vec![0.0; times.len()];
    let mut state = PairState::vacuum(cutoff);
    let mut t_cur = 0.0;
    for (idx, t) in sorted {
        state = propagate_pair_state(&state, omega, delta, t - t_cur)?;
        t_cur = t;
        let pop = state.boundary_population();
        if pop > BOUNDARY_POPULATION_TOL {
            return Err(Error::CutoffOverflow {
                population: pop,
                threshold: BOUNDARY_POPULATION_TOL,
                t,
            });
        }
        out[idx] = state.n_plus_mean();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_matches_integral_representation() {
        // oracle: J_k(z) = (1/π) ∫₀^π cos(kθ - z sin θ) dθ
        let z = 7.3;
        let seq = bessel_j_sequence(12, z);
        for k in [0usize, 1, 3, 7, 12] {
            let oracle = integrate(
                &|theta: f64| (k as f64 * theta - z * theta.sin()).cos(),
                0.0,
                std::f64::consts::PI,
                1e-13,
            ) / std::f64::consts::PI;
            assert_relative_eq!(seq[k], oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn bessel_sum_of_squares_identity() {
        // J₀² + 2 Σ Jₖ² = 1
        let seq = bessel_j_sequence(120, 31.0);
        let sum = seq[0] * seq[0]
            + 2.0 * seq[1..].iter().map(|j| j * j).sum::<f64>();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn propagation_reproduces_squeezed_vacuum_amplitudes() {
        // closed-form solution of the Γ = δ = 0 evolution from vacuum;
        // truncation reflects O(|ψ_N|) amplitude at the boundary, so the
        // elementwise check needs a tail far below the tolerance
        let xi = 1.0_f64;
        let cutoff = FockCutoff::new(120);
        let got = propagate_pair_state(&PairState::vacuum(cutoff), 1.0, 0.0, xi).unwrap();
        let (want, _) = PairState::from_tmsv(xi, cutoff).unwrap();
        for (g, w) in got.amplitudes().iter().zip(want.amplitudes()) {
            assert!((g - w).norm() < 1e-10, "{g} vs {w}");
        }
        assert_relative_eq!(got.n_plus_mean(), xi.sinh().powi(2), max_relative = 1e-10);
    }

    #[test]
    fn propagation_is_time_additive() {
        let cutoff = FockCutoff::adequate_for_xi(1.2);
        let one_shot = propagate_pair_state(&PairState::vacuum(cutoff), 1.0, 0.7, 1.2).unwrap();
        let mut stepped = PairState::vacuum(cutoff);
        for _ in 0..3 {
            stepped = propagate_pair_state(&stepped, 1.0, 0.7, 0.4).unwrap();
        }
        for (a, b) in one_shot.amplitudes().iter().zip(stepped.amplitudes()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn detuning_suppresses_transfer() {
        let cutoff = FockCutoff::new(220);
        let resonant = propagate_pair_state(&PairState::vacuum(cutoff), 1.0, 0.0, 2.0).unwrap();
        let detuned = propagate_pair_state(&PairState::vacuum(cutoff), 1.0, 4.0, 2.0).unwrap();
        assert!(detuned.n_plus_mean() < 0.3 * resonant.n_plus_mean());
    }

    #[test]
    fn growth_curve_matches_closed_form_to_large_occupation() {
        let cutoff = FockCutoff::adequate_for_xi(2.2);
        let times = [0.0, 0.5, 1.1, 2.2];
        let curve = pair_growth_curve(1.0, 0.0, cutoff, &times).unwrap();
        assert_eq!(curve[0], 0.0);
        for (t, n) in times.iter().zip(&curve).skip(1) {
            assert_relative_eq!(*n, t.sinh().powi(2), max_relative = 1e-6);
        }
    }

    #[test]
    fn growth_curve_detects_cutoff_overflow() {
        let res = pair_growth_curve(1.0, 0.0, FockCutoff::new(10), &[3.0]);
        assert!(matches!(res, Err(crate::Error::CutoffOverflow { .. })));
    }
}
