//! Truncated two-mode Fock basis.
//!
//! Both modes (labelled `-1` and `+1` after the Zeeman levels they model)
//! share one per-mode occupation cutoff `n_max`. A two-mode basis state
//! `|n₋, n₊⟩` is stored at index `n₋ · (n_max + 1) + n₊`, so single-mode
//! operators lift to the two-mode space as `a₋ = a ⊗ 1` and `a₊ = 1 ⊗ a`.
//!
//! The central states here are the two-mode squeezed vacuum
//!
//! ```text
//! |ξ⟩ = Σₙ (-i tanh ξ)ⁿ / cosh ξ · |n⟩₋ |n⟩₊
//! ```
//!
//! with mean occupation `⟨n±⟩ = sinh²ξ` per mode, and its diagonal weight
//! vector `wₙ = tanh²ⁿξ / cosh²ξ` (a thermal distribution with
//! `n̄ = sinh²ξ`). Truncation is explicit: constructors report the tail mass
//! discarded by the cutoff so callers can check adequacy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

/// Dense complex matrix used throughout the two-mode space.
pub type CMatrix = DMatrix<Complex64>;

/// Tail mass above which weight truncation is considered inadequate.
pub const TAIL_MASS_WARN: f64 = 1e-6;

/// Per-mode occupation cutoff. Basis dimension per mode is `n_max + 1`,
/// two-mode dimension `(n_max + 1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockCutoff {
    pub n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    /// Single-mode dimension `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Two-mode dimension `(n_max + 1)²`.
    pub fn two_mode_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Index of `|n₋, n₊⟩` in the two-mode basis.
    pub fn index(&self, n_minus: usize, n_plus: usize) -> usize {
        debug_assert!(n_minus <= self.n_max && n_plus <= self.n_max);
        n_minus * self.dim() + n_plus
    }

    /// Occupations `(n₋, n₊)` of a flat two-mode index.
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        (index / self.dim(), index % self.dim())
    }

    /// Smallest cutoff whose squeezed-vacuum tail mass `tanh²⁽ᴺ⁺¹⁾ξ` stays
    /// below `1e-8`.
    pub fn adequate_for_xi(xi: f64) -> Self {
        let lambda = xi.tanh().powi(2);
        if lambda <= 0.0 {
            return Self::new(0);
        }
        let n = (1e-8_f64.ln() / lambda.ln()).ceil() as usize;
        Self::new(n.max(1))
    }
}

/// Mode operators on the two-mode space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub cutoff: FockCutoff,
    /// Annihilation operator of the `-1` mode, `a ⊗ 1`.
    pub a_minus: CMatrix,
    /// Annihilation operator of the `+1` mode, `1 ⊗ a`.
    pub a_plus: CMatrix,
    pub identity: CMatrix,
}

/// Single-mode annihilation operator, `⟨n-1| a |n⟩ = √n`.
fn single_mode_annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Build the two-mode operator set for a cutoff.
pub fn build_operators(cutoff: FockCutoff) -> OperatorSet {
    let dim = cutoff.dim();
    let a = single_mode_annihilation(dim);
    let eye = CMatrix::identity(dim, dim);
    OperatorSet {
        cutoff,
        a_minus: a.kronecker(&eye),
        a_plus: eye.kronecker(&a),
        identity: CMatrix::identity(dim * dim, dim * dim),
    }
}

/// Normalized diagonal Fock weights of a single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FockWeights {
    w: Vec<f64>,
}

impl FockWeights {
    /// Normalize a nonnegative weight vector. Entries below `-1e-12` are
    /// rejected; smaller negative round-off is clamped to zero.
    pub fn new(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        for v in &mut w {
            if *v < -1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "negative weight {v:.3e}"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(Self { w })
    }

    /// Vacuum: all weight on `n = 0`.
    pub fn vacuum(n_max: usize) -> Self {
        let mut w = vec![0.0; n_max + 1];
        w[0] = 1.0;
        Self { w }
    }

    /// All weight on a single occupation `n`.
    pub fn delta(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidParameter(format!(
                "delta weight at n = {n} exceeds cutoff {n_max}"
            )));
        }
        let mut w = vec![0.0; n_max + 1];
        w[n] = 1.0;
        Ok(Self { w })
    }

    /// Truncated thermal distribution `wₙ ∝ n̄ⁿ / (1 + n̄)ⁿ⁺¹`.
    pub fn thermal(n_bar: f64, n_max: usize) -> Result<Self> {
        if !(n_bar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mean occupation must be nonnegative, got {n_bar}"
            )));
        }
        let ratio = n_bar / (1.0 + n_bar);
        let mut w = Vec::with_capacity(n_max + 1);
        let mut term = 1.0 / (1.0 + n_bar);
        for _ in 0..=n_max {
            w.push(term);
            term *= ratio;
        }
        Self::new(w)
    }

    pub fn n_max(&self) -> usize {
        self.w.len() - 1
    }

    /// Weight at occupation `n` (zero beyond the cutoff).
    pub fn get(&self, n: usize) -> f64 {
        self.w.get(n).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Mean occupation `Σ n wₙ`.
    pub fn mean_occupation(&self) -> f64 {
        self.w
            .iter()
            .enumerate()
            .map(|(n, w)| n as f64 * w)
            .sum()
    }
}

/// Cached cumulative table for drawing occupations from a weight vector.
#[derive(Debug, Clone)]
pub struct WeightSampler {
    cdf: Vec<f64>,
}

impl WeightSampler {
    pub fn new(weights: &FockWeights) -> Self {
        let mut cdf = Vec::with_capacity(weights.as_slice().len());
        let mut acc = 0.0;
        for &w in weights.as_slice() {
            acc += w;
            cdf.push(acc);
        }
        // guard against round-off at the top
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

/// Squeezed-vacuum diagonal weights `wₙ ∝ tanh²ⁿξ / cosh²ξ`, renormalized
/// over the truncated range. Returns the weights together with the tail mass
/// discarded by the cutoff (`tanh²⁽ᴺ⁺¹⁾ξ`); a tail above [`TAIL_MASS_WARN`]
/// means the cutoff is too small for this squeezing.
pub fn tmsv_weights(xi: f64, cutoff: FockCutoff) -> Result<(FockWeights, f64)> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squeezing parameter must be nonnegative, got {xi}"
        )));
    }
    let lambda = xi.tanh().powi(2);
    let mut w = Vec::with_capacity(cutoff.dim());
    let mut term = 1.0 / xi.cosh().powi(2);
    for _ in 0..cutoff.dim() {
        w.push(term);
        term *= lambda;
    }
    let tail = lambda.powi(cutoff.dim() as i32);
    Ok((FockWeights::new(w)?, tail))
}

/// Truncated two-mode Fock-basis density operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    data: CMatrix,
    cutoff: FockCutoff,
}

impl DensityMatrix {
    /// Hermiticity tolerance on construction.
    pub const HERMITICITY_TOL: f64 = 1e-10;
    /// Trace-normalization tolerance on construction.
    pub const TRACE_TOL: f64 = 1e-8;
    /// Allowed negative eigenvalue excursion.
    pub const EIGENVALUE_TOL: f64 = -1e-8;

    /// Wrap a matrix after checking hermiticity and unit trace.
    pub fn new(data: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        let dim = cutoff.two_mode_dim();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.nrows(),
            });
        }
        let rho = Self { data, cutoff };
        let herm = rho.hermiticity_defect();
        if herm > Self::HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "hermiticity defect {herm:.3e}"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr:.12} ≠ 1")));
        }
        Ok(rho)
    }

    /// Wrap without validation; for integrator internals that maintain the
    /// invariants themselves.
    pub(crate) fn from_raw(data: CMatrix, cutoff: FockCutoff) -> Self {
        Self { data, cutoff }
    }

    /// Pure state `|ψ⟩⟨ψ|` from a normalized two-mode amplitude vector.
    pub fn from_pure(amplitudes: &[Complex64], cutoff: FockCutoff) -> Result<Self> {
        let dim = cutoff.two_mode_dim();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: amplitudes.len(),
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let scale = 1.0 / norm2;
        let mut data = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                data[(i, j)] = amplitudes[i] * amplitudes[j].conj() * scale;
            }
        }
        Ok(Self { data, cutoff })
    }

    /// Two-mode vacuum `|0,0⟩⟨0,0|`.
    pub fn vacuum(cutoff: FockCutoff) -> Self {
        let dim = cutoff.two_mode_dim();
        let mut data = CMatrix::zeros(dim, dim);
        data[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { data, cutoff }
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn trace(&self) -> f64 {
        (0..self.data.nrows()).map(|i| self.data[(i, i)].re).sum()
    }

    /// `Tr ρ²`; equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest elementwise deviation from `ρ = ρ†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.data.nrows();
        let mut max = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }

    /// Smallest eigenvalue (Hermitian part). O(dim³); intended for checks,
    /// not hot paths.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = nalgebra::linalg::SymmetricEigen::new(herm);
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Check all three state invariants, including positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > Self::HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "hermiticity defect {herm:.3e}"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr:.12} ≠ 1")));
        }
        let min = self.min_eigenvalue();
        if min < Self::EIGENVALUE_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// Total population sitting on the truncation boundary
    /// (`n₋ = n_max` or `n₊ = n_max`).
    pub fn boundary_population(&self) -> f64 {
        let n_max = self.cutoff.n_max;
        let mut pop = 0.0;
        for k in 0..=n_max {
            pop += self.data[(self.cutoff.index(n_max, k), self.cutoff.index(n_max, k))].re;
            if k < n_max {
                pop += self.data[(self.cutoff.index(k, n_max), self.cutoff.index(k, n_max))].re;
            }
        }
        pop
    }

    /// Partial trace over the `-1` mode; returns the reduced `+1`-mode matrix.
    pub fn reduced_plus_mode(&self) -> CMatrix {
        let dim = self.cutoff.dim();
        let mut red = CMatrix::zeros(dim, dim);
        for k in 0..dim {
            for l in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..dim {
                    acc += self.data[(self.cutoff.index(m, k), self.cutoff.index(m, l))];
                }
                red[(k, l)] = acc;
            }
        }
        red
    }

    /// Diagonal of the reduced `+1`-mode matrix as a weight vector.
    pub fn plus_mode_weights(&self) -> Result<FockWeights> {
        let red = self.reduced_plus_mode();
        FockWeights::new((0..red.nrows()).map(|k| red[(k, k)].re).collect())
    }
}

/// Truncated two-mode squeezed vacuum as a pure-state density matrix, with
/// the discarded tail mass. The `(-i)ⁿ` amplitude phases are retained.
pub fn tmsv_state(xi: f64, cutoff: FockCutoff) -> Result<(DensityMatrix, f64)> {
    if !(xi >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squeezing parameter must be nonnegative, got {xi}"
        )));
    }
    let dim = cutoff.two_mode_dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    let ratio = Complex64::new(0.0, -xi.tanh());
    let mut amp = Complex64::new(1.0 / xi.cosh(), 0.0);
    for n in 0..cutoff.dim() {
        amps[cutoff.index(n, n)] = amp;
        amp *= ratio;
    }
    let tail = xi.tanh().powi(2).powi(cutoff.dim() as i32);
    Ok((DensityMatrix::from_pure(&amps, cutoff)?, tail))
}

/// `Tr(op · ρ)`.
pub fn expectation(op: &CMatrix, rho: &DensityMatrix) -> Result<Complex64> {
    let dim = rho.data().nrows();
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: op.nrows(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += op[(i, j)] * rho.data()[(j, i)];
        }
    }
    Ok(acc)
}
