//! Time evolution under pair creation with one-mode loss.
//!
//! The Hamiltonian (ħ = 1, all rates angular frequencies in rad/s) is
//!
//! ```text
//! H = δ (a₋†a₋ + a₊†a₊) + ω (a₋†a₊† + a₊a₋)
//! ```
//!
//! and loss at rate Γ on the `-1` mode enters through the Lindblad master
//! equation
//!
//! ```text
//! dρ/dt = -i[H, ρ] + (Γ/2)(2 a₋ ρ a₋† - a₋†a₋ ρ - ρ a₋†a₋).
//! ```
//!
//! Because `H` is quadratic and the loss linear, the populations
//! `N± = ⟨a±†a±⟩` and pair correlators `2iv = ⟨a₋†a₊† - a₋a₊⟩`,
//! `2u = ⟨a₋†a₊† + a₋a₊⟩` close exactly:
//!
//! ```text
//! dN₋/dt = -Γ N₋ + 2ω v
//! dN₊/dt =         2ω v
//! dv/dt  = -(Γ/2) v + ω (1 + N₋ + N₊) + 2δ u
//! du/dt  = -(Γ/2) u - 2δ v
//! ```
//!
//! Three equivalent propagation routes are provided, from general to fast:
//!
//! - [`evolve_density`]: dense master-equation integration (any state).
//! - [`sectors`]: the same generator restricted to the conserved
//!   block-diagonal structure in `d = n₊ - n₋` (vacuum-class states).
//! - [`pair`]: the Γ = 0 unitary case on the invariant pair subspace
//!   `span{|n,n⟩}`, which reaches very large occupations cheaply.
//!
//! All integrators are fixed-step classic 4th-order Runge–Kutta with
//! per-step re-hermitization and trace renormalization; the pair-subspace
//! propagator instead expands `exp(-iHt)` in Chebyshev polynomials.

pub mod pair;
pub mod sectors;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fockspace::{build_operators, CMatrix, DensityMatrix, OperatorSet};
use crate::{Error, Result};

/// Population allowed on the truncation boundary before the cutoff is
/// declared overflowed.
pub const BOUNDARY_POPULATION_TOL: f64 = 1e-6;
/// Largest tolerated per-step trace drift of the master-equation integrator.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Relative change of `N₊(t_final)` under step halving accepted by the
/// moment-integrator convergence self-check.
pub const MOMENT_SELF_CHECK_TOL: f64 = 1e-8;

/// Physical rates and integration controls.
///
/// `omega` is the pair-creation rate and `delta` the detuning, both angular
/// frequencies in rad/s; `gamma` is the `-1`-mode loss rate in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDynamicsParams {
    pub omega: f64,
    pub gamma: f64,
    pub delta: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl SpinDynamicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be nonnegative, got {}",
                self.omega
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        if self.t_final == 0.0 {
            0
        } else {
            (self.t_final / self.dt).ceil() as usize
        }
    }
}

/// The four closed moments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentState {
    pub n_minus: f64,
    pub n_plus: f64,
    pub v: f64,
    pub u: f64,
}

impl MomentState {
    fn axpy(&self, scale: f64, rhs: &MomentState) -> MomentState {
        MomentState {
            n_minus: self.n_minus + scale * rhs.n_minus,
            n_plus: self.n_plus + scale * rhs.n_plus,
            v: self.v + scale * rhs.v,
            u: self.u + scale * rhs.u,
        }
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &MomentState) -> f64 {
        (self.n_minus - other.n_minus)
            .abs()
            .max((self.n_plus - other.n_plus).abs())
            .max((self.v - other.v).abs())
            .max((self.u - other.u).abs())
    }
}

fn moment_rhs(s: &MomentState, p: &SpinDynamicsParams) -> MomentState {
    MomentState {
        n_minus: -p.gamma * s.n_minus + 2.0 * p.omega * s.v,
        n_plus: 2.0 * p.omega * s.v,
        v: -0.5 * p.gamma * s.v + p.omega * (1.0 + s.n_minus + s.n_plus) + 2.0 * p.delta * s.u,
        u: -0.5 * p.gamma * s.u - 2.0 * p.delta * s.v,
    }
}

/// Moment trajectory sampled at every integrator step.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MomentState>,
}

impl MomentTrajectory {
    pub fn final_state(&self) -> MomentState {
        *self.states.last().expect("trajectory has at least t = 0")
    }

    /// State at the step closest to `t`.
    pub fn at_time(&self, t: f64) -> MomentState {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.states[idx]
    }
}

/// Integrate the closed moment system from vacuum (`N± = v = u = 0`).
pub fn evolve_moments(params: &SpinDynamicsParams) -> Result<MomentTrajectory> {
    params.validate()?;
    let steps = params.steps();
    let dt = if steps == 0 {
        params.dt
    } else {
        params.t_final / steps as f64
    };
    let mut state = MomentState::default();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(state);
    for step in 0..steps {
        let k1 = moment_rhs(&state, params);
        let k2 = moment_rhs(&state.axpy(0.5 * dt, &k1), params);
        let k3 = moment_rhs(&state.axpy(0.5 * dt, &k2), params);
        let k4 = moment_rhs(&state.axpy(dt, &k3), params);
        state = MomentState {
            n_minus: state.n_minus
                + dt / 6.0 * (k1.n_minus + 2.0 * k2.n_minus + 2.0 * k3.n_minus + k4.n_minus),
            n_plus: state.n_plus
                + dt / 6.0 * (k1.n_plus + 2.0 * k2.n_plus + 2.0 * k3.n_plus + k4.n_plus),
            v: state.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            u: state.u + dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
        };
        times.push((step + 1) as f64 * dt);
        states.push(state);
    }
    Ok(MomentTrajectory { times, states })
}

/// [`evolve_moments`] with a convergence self-check: the integration is
/// repeated at half the step and must reproduce `N₊(t_final)` to
/// [`MOMENT_SELF_CHECK_TOL`] relative.
pub fn evolve_moments_checked(params: &SpinDynamicsParams) -> Result<MomentTrajectory> {
    let coarse = evolve_moments(params)?;
    let fine = evolve_moments(&SpinDynamicsParams {
        dt: params.dt / 2.0,
        ..*params
    })?;
    let a = coarse.final_state().n_plus;
    let b = fine.final_state().n_plus;
    let scale = a.abs().max(b.abs()).max(1e-30);
    if (a - b).abs() / scale > MOMENT_SELF_CHECK_TOL {
        return Err(Error::StepSize(format!(
            "halving dt changes N₊(t_final) by {:.3e} relative",
            (a - b).abs() / scale
        )));
    }
    Ok(coarse)
}

/// Loss-free growth law `⟨N₊⟩ = sinh²(ωt)`.
pub fn mean_pairs_closed_form(omega: f64, t: f64) -> f64 {
    debug_assert!(omega >= 0.0 && t >= 0.0);
    (omega * t).sinh().powi(2)
}

/// Final `+1`-mode population for each loss rate in `gamma_grid`, sorted by Γ.
pub fn zeno_sweep(
    base: &SpinDynamicsParams,
    gamma_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    for &g in gamma_grid {
        if !(g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be nonnegative, got {g}"
            )));
        }
    }
    let mut table: Vec<(f64, f64)> = gamma_grid
        .par_iter()
        .map(|&gamma| {
            let params = SpinDynamicsParams { gamma, ..*base };
            evolve_moments(&params).map(|traj| (gamma, traj.final_state().n_plus))
        })
        .collect::<Result<_>>()?;
    table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(table)
}

/// Pair-creation Hamiltonian `δ(a₋†a₋ + a₊†a₊) + ω(a₋†a₊† + a₊a₋)`.
pub fn build_hamiltonian(params: &SpinDynamicsParams, ops: &OperatorSet) -> CMatrix {
    let n_minus = ops.a_minus.adjoint() * &ops.a_minus;
    let n_plus = ops.a_plus.adjoint() * &ops.a_plus;
    let pair_up = ops.a_minus.adjoint() * ops.a_plus.adjoint();
    let pair_down = &ops.a_plus * &ops.a_minus;
    (n_minus + n_plus) * Complex64::new(params.delta, 0.0)
        + (pair_up + pair_down) * Complex64::new(params.omega, 0.0)
}

/// Nonzero entries `(row, col, value)` of a dense matrix; the mode operators
/// and the Hamiltonian are extremely sparse, and the master-equation RHS is
/// assembled from these in O(dim²) instead of O(dim³).
fn sparse_entries(m: &CMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut entries = Vec::new();
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            let v = m[(i, j)];
            if v.norm_sqr() > 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    entries
}

/// `out += scale · A_sparse · B`
fn acc_sparse_dense(
    out: &mut CMatrix,
    a: &[(usize, usize, Complex64)],
    b: &CMatrix,
    scale: Complex64,
) {
    let n = b.nrows();
    let b_slice = b.as_slice();
    let out_slice = out.as_mut_slice();
    for j in 0..n {
        let col = j * n;
        for &(i, k, v) in a {
            out_slice[col + i] += scale * v * b_slice[col + k];
        }
    }
}

/// `out += scale · A · B_sparse`
fn acc_dense_sparse(
    out: &mut CMatrix,
    a: &CMatrix,
    b: &[(usize, usize, Complex64)],
    scale: Complex64,
) {
    let n = a.nrows();
    let a_slice = a.as_slice();
    let out_slice = out.as_mut_slice();
    for &(k, j, v) in b {
        let sv = scale * v;
        let (acol, ocol) = (k * n, j * n);
        for i in 0..n {
            out_slice[ocol + i] += sv * a_slice[acol + i];
        }
    }
}

/// Right-hand side of the master equation,
/// `-i[H, ρ] + (Γ/2)(2 a₋ ρ a₋† - a₋†a₋ ρ - ρ a₋†a₋)`.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    hamiltonian: &CMatrix,
    gamma: f64,
    ops: &OperatorSet,
) -> Result<CMatrix> {
    let dim = rho.data().nrows();
    if hamiltonian.nrows() != dim || ops.a_minus.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: hamiltonian.nrows().max(ops.a_minus.nrows()),
        });
    }
    let h_sp = sparse_entries(hamiltonian);
    let mut out = CMatrix::zeros(dim, dim);
    let i = Complex64::new(0.0, 1.0);
    acc_sparse_dense(&mut out, &h_sp, rho.data(), -i);
    acc_dense_sparse(&mut out, rho.data(), &h_sp, i);

    if gamma > 0.0 {
        let a_sp = sparse_entries(&ops.a_minus);
        let adag_sp: Vec<_> = a_sp.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        // Γ a₋ ρ a₋†
        let mut jump = CMatrix::zeros(dim, dim);
        acc_sparse_dense(&mut jump, &a_sp, rho.data(), Complex64::new(1.0, 0.0));
        acc_dense_sparse(&mut out, &jump, &adag_sp, Complex64::new(gamma, 0.0));
        // -(Γ/2)(a₋†a₋ ρ + ρ a₋†a₋); a₋†a₋ is diagonal with entry Σᵢ|a₋ᵢₖ|²
        let mut number_diag = vec![0.0_f64; dim];
        for &(_, k, v) in &a_sp {
            number_diag[k] += v.norm_sqr();
        }
        let rho_slice = rho.data().as_slice();
        let out_slice = out.as_mut_slice();
        for j in 0..dim {
            let col = j * dim;
            for i in 0..dim {
                let damp = 0.5 * gamma * (number_diag[i] + number_diag[j]);
                out_slice[col + i] -= Complex64::new(damp, 0.0) * rho_slice[col + i];
            }
        }
    }
    Ok(out)
}

/// Density-matrix trajectory sampled every `stride` steps.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest per-step trace drift absorbed by renormalization.
    pub max_trace_drift: f64,
}

/// Integrate the master equation from `rho0` with classic RK4, sampling every
/// `stride` steps. Each step is re-hermitized and trace-renormalized; the
/// drift absorbed that way is reported and bounded by [`TRACE_DRIFT_TOL`].
pub fn evolve_density(
    rho0: &DensityMatrix,
    params: &SpinDynamicsParams,
    stride: usize,
) -> Result<DensityTrajectory> {
    params.validate()?;
    let stride = stride.max(1);
    let cutoff = rho0.cutoff();
    let ops = build_operators(cutoff);
    let hamiltonian = build_hamiltonian(params, &ops);

    let steps = params.steps();
    let dt = if steps == 0 {
        params.dt
    } else {
        params.t_final / steps as f64
    };
    let cdt = |s: f64| Complex64::new(s * dt, 0.0);

    let mut rho = rho0.clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    let mut max_drift = 0.0_f64;

    for step in 0..steps {
        let t = step as f64 * dt;
        let k1 = lindblad_rhs(&rho, &hamiltonian, params.gamma, &ops)?;
        let mid1 = DensityMatrix::from_raw(rho.data() + &k1 * cdt(0.5), cutoff);
        let k2 = lindblad_rhs(&mid1, &hamiltonian, params.gamma, &ops)?;
        let mid2 = DensityMatrix::from_raw(rho.data() + &k2 * cdt(0.5), cutoff);
        let k3 = lindblad_rhs(&mid2, &hamiltonian, params.gamma, &ops)?;
        let end = DensityMatrix::from_raw(rho.data() + &k3 * cdt(1.0), cutoff);
        let k4 = lindblad_rhs(&end, &hamiltonian, params.gamma, &ops)?;

        let mut next = rho.data()
            + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * cdt(1.0 / 6.0);

        // step hygiene: (ρ + ρ†)/2, then renormalize the trace
        let n = next.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (next[(i, j)] + next[(j, i)].conj());
                next[(i, j)] = avg;
                next[(j, i)] = avg.conj();
            }
            next[(i, i)] = Complex64::new(next[(i, i)].re, 0.0);
        }
        let trace: f64 = (0..n).map(|i| next[(i, i)].re).sum();
        let drift = (trace - 1.0).abs();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::StepSize(format!(
                "trace drift {drift:.3e} per step at t = {t:.6} s; reduce dt"
            )));
        }
        max_drift = max_drift.max(drift);
        next /= Complex64::new(trace, 0.0);

        rho = DensityMatrix::from_raw(next, cutoff);

        let done = step + 1 == steps;
        if (step + 1) % stride == 0 || done {
            let pop = rho.boundary_population();
            if pop > BOUNDARY_POPULATION_TOL {
                return Err(Error::CutoffOverflow {
                    population: pop,
                    threshold: BOUNDARY_POPULATION_TOL,
                    t: t + dt,
                });
            }
            times.push((step + 1) as f64 * dt);
            states.push(rho.clone());
        }
    }

    Ok(DensityTrajectory {
        times,
        states,
        max_trace_drift: max_drift,
    })
}

/// The four closed moments of a density matrix.
pub fn pair_moments(rho: &DensityMatrix) -> MomentState {
    let cutoff = rho.cutoff();
    let dim = cutoff.dim();
    let data = rho.data();
    let mut n_minus = 0.0;
    let mut n_plus = 0.0;
    for nm in 0..dim {
        for np in 0..dim {
            let p = data[(cutoff.index(nm, np), cutoff.index(nm, np))].re;
            n_minus += nm as f64 * p;
            n_plus += np as f64 * p;
        }
    }
    // ⟨a₋a₊⟩ = Σ √(n₋n₊) ⟨n₋,n₊|ρ|n₋-1,n₊-1⟩
    let mut c = Complex64::new(0.0, 0.0);
    for nm in 1..dim {
        for np in 1..dim {
            c += ((nm * np) as f64).sqrt()
                * data[(cutoff.index(nm, np), cutoff.index(nm - 1, np - 1))];
        }
    }
    MomentState {
        n_minus,
        n_plus,
        v: -c.im,
        u: c.re,
    }
}
