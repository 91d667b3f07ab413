//! Master-equation propagation in the conserved sector decomposition.
//!
//! The generator couples `|n₋, n₊⟩⟨m₋, m₊|` only within and between sectors
//! of fixed `d = n₊ - n₋ = m₊ - m₋`: the Hamiltonian creates and destroys
//! pairs (d unchanged) and the loss jump `a₋ ρ a₋†` lowers `n₋` on both
//! sides at once (d → d+1 for ket and bra together). Any state that is
//! block-diagonal in `d` with `d ≥ 0` — vacuum, every squeezed vacuum, and
//! everything they evolve into — stays that way.
//!
//! Storing only the blocks shrinks the state from `(n_max+1)⁴` to
//! `Σ_d (n_max+1-d)² ≈ n_max³/3` complex numbers, which is what makes dense
//! parameter sweeps cheap. The physics is identical to [`super::evolve_density`];
//! the equivalence is asserted in the integration tests.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fockspace::{CMatrix, DensityMatrix, FockCutoff};
use crate::{Error, Result};

use super::{
    MomentState, SpinDynamicsParams, BOUNDARY_POPULATION_TOL, TRACE_DRIFT_TOL,
};

type Blocks = Vec<DMatrix<Complex64>>;

/// Density operator restricted to the `d = n₊ - n₋ ≥ 0` sector blocks.
/// Block `d` is indexed by `n₋` and holds `⟨n₋, n₋+d| ρ |m₋, m₋+d⟩`.
#[derive(Debug, Clone)]
pub struct SectorDensity {
    cutoff: FockCutoff,
    blocks: Blocks,
}

impl SectorDensity {
    pub fn vacuum(cutoff: FockCutoff) -> Self {
        let mut blocks = empty_blocks(cutoff);
        blocks[0][(0, 0)] = Complex64::new(1.0, 0.0);
        Self { cutoff, blocks }
    }

    /// Truncated squeezed vacuum (all weight in the `d = 0` block).
    pub fn from_tmsv(xi: f64, cutoff: FockCutoff) -> Result<(Self, f64)> {
        let (pair, tail) = super::pair::PairState::from_tmsv(xi, cutoff)?;
        let mut blocks = empty_blocks(cutoff);
        let amps = pair.amplitudes();
        for i in 0..cutoff.dim() {
            for j in 0..cutoff.dim() {
                blocks[0][(i, j)] = amps[i] * amps[j].conj();
            }
        }
        Ok((Self { cutoff, blocks }, tail))
    }

    /// Project a full density matrix onto the sector blocks; the second
    /// return is the norm of what the projection discards (zero for states
    /// reachable from vacuum under this generator).
    pub fn from_density(rho: &DensityMatrix) -> (Self, f64) {
        let cutoff = rho.cutoff();
        let dim = cutoff.dim();
        let mut blocks = empty_blocks(cutoff);
        let mut kept = 0.0;
        for d in 0..dim {
            let size = dim - d;
            for i in 0..size {
                for j in 0..size {
                    let v = rho.data()[(cutoff.index(i, i + d), cutoff.index(j, j + d))];
                    blocks[d][(i, j)] = v;
                    kept += v.norm_sqr();
                }
            }
        }
        let total: f64 = rho.data().iter().map(|z| z.norm_sqr()).sum();
        (Self { cutoff, blocks }, (total - kept).max(0.0).sqrt())
    }

    /// Embed back into the full two-mode space.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let dim = self.cutoff.dim();
        let mut data = CMatrix::zeros(dim * dim, dim * dim);
        for d in 0..dim {
            let size = dim - d;
            for i in 0..size {
                for j in 0..size {
                    data[(self.cutoff.index(i, i + d), self.cutoff.index(j, j + d))] =
                        self.blocks[d][(i, j)];
                }
            }
        }
        DensityMatrix::new(data, self.cutoff)
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (0..b.nrows()).map(|i| b[(i, i)].re).sum::<f64>())
            .sum()
    }

    /// Population with `n₊ = n_max` (the only reachable boundary states).
    pub fn boundary_population(&self) -> f64 {
        let n_max = self.cutoff.n_max;
        self.blocks
            .iter()
            .enumerate()
            .map(|(d, b)| {
                let i = n_max - d;
                b[(i, i)].re
            })
            .sum()
    }

    /// The closed moments (`⟨a₋a₊⟩` lives inside the blocks).
    pub fn moments(&self) -> MomentState {
        let mut n_minus = 0.0;
        let mut n_plus = 0.0;
        let mut c = Complex64::new(0.0, 0.0);
        for (d, b) in self.blocks.iter().enumerate() {
            let size = b.nrows();
            for i in 0..size {
                let p = b[(i, i)].re;
                n_minus += i as f64 * p;
                n_plus += (i + d) as f64 * p;
            }
            // ⟨a₋a₊⟩ = Σ √(n₋ n₊) ⟨n₋, n₊| ρ |n₋-1, n₊-1⟩
            for i in 1..size {
                c += ((i * (i + d)) as f64).sqrt() * b[(i, i - 1)];
            }
        }
        MomentState {
            n_minus,
            n_plus,
            v: -c.im,
            u: c.re,
        }
    }
}

fn empty_blocks(cutoff: FockCutoff) -> Blocks {
    (0..cutoff.dim())
        .map(|d| DMatrix::zeros(cutoff.dim() - d, cutoff.dim() - d))
        .collect()
}

/// Per-sector tridiagonal Hamiltonian coefficients.
struct SectorHamiltonian {
    /// `diag[d][i] = δ(2i + d)`
    diag: Vec<Vec<f64>>,
    /// `off[d][i] = ω √((i+1)(i+1+d))` coupling `i ↔ i+1`
    off: Vec<Vec<f64>>,
}

impl SectorHamiltonian {
    fn new(params: &SpinDynamicsParams, cutoff: FockCutoff) -> Self {
        let dim = cutoff.dim();
        let mut diag = Vec::with_capacity(dim);
        let mut off = Vec::with_capacity(dim);
        for d in 0..dim {
            let size = dim - d;
            diag.push(
                (0..size)
                    .map(|i| params.delta * (2 * i + d) as f64)
                    .collect(),
            );
            off.push(
                (0..size.saturating_sub(1))
                    .map(|i| params.omega * (((i + 1) * (i + 1 + d)) as f64).sqrt())
                    .collect(),
            );
        }
        Self { diag, off }
    }
}

/// `out_d = -i[H_d, ρ_d] - (Γ/2)(n̂₋ρ_d + ρ_d n̂₋) + Γ·(lift of ρ_{d-1})`
fn sector_rhs(
    blocks: &Blocks,
    out: &mut Blocks,
    h: &SectorHamiltonian,
    gamma: f64,
) {
    let i_unit = Complex64::new(0.0, 1.0);
    for (d, b) in blocks.iter().enumerate() {
        let size = b.nrows();
        let diag = &h.diag[d];
        let off = &h.off[d];
        let o = &mut out[d];
        for j in 0..size {
            for i in 0..size {
                // (H ρ)ᵢⱼ
                let mut hp = Complex64::new(diag[i], 0.0) * b[(i, j)];
                if i > 0 {
                    hp += Complex64::new(off[i - 1], 0.0) * b[(i - 1, j)];
                }
                if i + 1 < size {
                    hp += Complex64::new(off[i], 0.0) * b[(i + 1, j)];
                }
                // (ρ H)ᵢⱼ
                let mut ph = b[(i, j)] * Complex64::new(diag[j], 0.0);
                if j > 0 {
                    ph += b[(i, j - 1)] * Complex64::new(off[j - 1], 0.0);
                }
                if j + 1 < size {
                    ph += b[(i, j + 1)] * Complex64::new(off[j], 0.0);
                }
                let mut val = -i_unit * (hp - ph);
                if gamma > 0.0 {
                    val -= Complex64::new(0.5 * gamma * (i + j) as f64, 0.0) * b[(i, j)];
                }
                o[(i, j)] = val;
            }
        }
        if gamma > 0.0 && d > 0 {
            let src = &blocks[d - 1];
            for j in 0..size {
                for i in 0..size {
                    let w = gamma * (((i + 1) * (j + 1)) as f64).sqrt();
                    o[(i, j)] += Complex64::new(w, 0.0) * src[(i + 1, j + 1)];
                }
            }
        }
    }
}

fn blocks_axpy(dst: &mut Blocks, scale: Complex64, src: &Blocks) {
    for (d, s) in dst.iter_mut().zip(src) {
        d.zip_apply(s, |a, b| *a += scale * b);
    }
}

/// Sector trajectory: moments at every sampled step plus the final state.
#[derive(Debug, Clone)]
pub struct SectorTrajectory {
    pub times: Vec<f64>,
    pub moments: Vec<MomentState>,
    pub final_state: SectorDensity,
    pub max_trace_drift: f64,
}

/// RK4 integration of the master equation in sector form, with the same step
/// hygiene and error contract as [`super::evolve_density`].
pub fn evolve_sectors(
    initial: &SectorDensity,
    params: &SpinDynamicsParams,
    stride: usize,
) -> Result<SectorTrajectory> {
    params.validate()?;
    let stride = stride.max(1);
    let cutoff = initial.cutoff;
    let h = SectorHamiltonian::new(params, cutoff);

    let steps = params.steps();
    let dt = if steps == 0 {
        params.dt
    } else {
        params.t_final / steps as f64
    };

    let mut state = initial.clone();
    let mut k1 = empty_blocks(cutoff);
    let mut k2 = empty_blocks(cutoff);
    let mut k3 = empty_blocks(cutoff);
    let mut k4 = empty_blocks(cutoff);
    let mut work = empty_blocks(cutoff);

    let mut times = vec![0.0];
    let mut moments = vec![state.moments()];
    let mut max_drift = 0.0_f64;

    for step in 0..steps {
        let t = step as f64 * dt;
        sector_rhs(&state.blocks, &mut k1, &h, params.gamma);
        for (w, (s, k)) in work.iter_mut().zip(state.blocks.iter().zip(&k1)) {
            w.copy_from(s);
            w.zip_apply(k, |a, b| *a += Complex64::new(0.5 * dt, 0.0) * b);
        }
        sector_rhs(&work, &mut k2, &h, params.gamma);
        for (w, (s, k)) in work.iter_mut().zip(state.blocks.iter().zip(&k2)) {
            w.copy_from(s);
            w.zip_apply(k, |a, b| *a += Complex64::new(0.5 * dt, 0.0) * b);
        }
        sector_rhs(&work, &mut k3, &h, params.gamma);
        for (w, (s, k)) in work.iter_mut().zip(state.blocks.iter().zip(&k3)) {
            w.copy_from(s);
            w.zip_apply(k, |a, b| *a += Complex64::new(dt, 0.0) * b);
        }
        sector_rhs(&work, &mut k4, &h, params.gamma);

        let sixth = Complex64::new(dt / 6.0, 0.0);
        let third = Complex64::new(dt / 3.0, 0.0);
        blocks_axpy(&mut state.blocks, sixth, &k1);
        blocks_axpy(&mut state.blocks, third, &k2);
        blocks_axpy(&mut state.blocks, third, &k3);
        blocks_axpy(&mut state.blocks, sixth, &k4);

        // hygiene: hermitize each block, renormalize the total trace
        for b in &mut state.blocks {
            let size = b.nrows();
            for i in 0..size {
                for j in (i + 1)..size {
                    let avg = 0.5 * (b[(i, j)] + b[(j, i)].conj());
                    b[(i, j)] = avg;
                    b[(j, i)] = avg.conj();
                }
                b[(i, i)] = Complex64::new(b[(i, i)].re, 0.0);
            }
        }
        let trace = state.trace();
        let drift = (trace - 1.0).abs();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::StepSize(format!(
                "trace drift {drift:.3e} per step at t = {t:.6} s; reduce dt"
            )));
        }
        max_drift = max_drift.max(drift);
        let inv = Complex64::new(1.0 / trace, 0.0);
        for b in &mut state.blocks {
            b.apply(|z| *z *= inv);
        }

        let done = step + 1 == steps;
        if (step + 1) % stride == 0 || done {
            let pop = state.boundary_population();
            if pop > BOUNDARY_POPULATION_TOL {
                return Err(Error::CutoffOverflow {
                    population: pop,
                    threshold: BOUNDARY_POPULATION_TOL,
                    t: t + dt,
                });
            }
            times.push((step + 1) as f64 * dt);
            moments.push(state.moments());
        }
    }

    Ok(SectorTrajectory {
        times,
        moments,
        final_state: state,
        max_trace_drift: max_drift,
    })
}
