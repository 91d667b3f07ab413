//! Counting statistics of the unbalanced homodyne readout.
//!
//! A displaced Fock state `|n⟩` produces the rescaled atom-number density
//! `P(x|n)` of [`displaced_fock_pdf`], a squared Hermite polynomial times a
//! Gaussian with variance `2n + 1` (the displaced vacuum defines the
//! shot-noise unit `V_sn = 1`). Mixtures over Fock weights and Gaussian
//! atom-counting noise are layered on top:
//!
//! - counting noise of `σ` atoms becomes, in rescaled units,
//!   `σ_resc = σ / √(cos²θ (1-cos²θ) N̄)`;
//! - convolving `P(·|n)` with that Gaussian is carried out exactly through
//!   the beam-splitter identity `P_σ(x|n) = √η Σ_k B(k; n, η) P(√η x|k)`
//!   with `η = 1/(1 + σ_resc²)` — adding Gaussian quadrature noise is
//!   equivalent to binomial loss at efficiency `η`.
//!
//! Raw shots relate counts to the dimensionless variable through
//!
//! ```text
//! x = (N₊₁ - cos²θ (N₀' + N₊₁')) / √(cos²θ (1 - cos²θ)(N₀' + N₊₁'))
//! ```
//!
//! and [`sample_shots`] synthesizes seeded Monte Carlo runs by inverting
//! that map atom by atom.

pub mod hermite;
mod sampler;

pub use sampler::DisplacedFockSampler;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::fockspace::{FockWeights, WeightSampler};
use crate::streams::derive_stream;
use crate::{Error, Result};

/// Detector and displacement-pulse parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    /// Gaussian atom-counting noise, in atoms.
    pub sigma_det_atoms: f64,
    /// Transferred condensate fraction `cos²θ` of the displacement pulse.
    pub transfer_fraction: f64,
    /// Mean condensate atom number.
    pub n_condensate_mean: f64,
    /// Shot-to-shot standard deviation of the condensate atom number.
    pub n_condensate_sd: f64,
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.transfer_fraction > 0.0 && self.transfer_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transfer fraction must lie in (0, 1), got {}",
                self.transfer_fraction
            )));
        }
        if !(self.sigma_det_atoms >= 0.0) || !(self.n_condensate_sd >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise scales must be nonnegative".into(),
            ));
        }
        if !(self.n_condensate_mean > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "condensate mean must be positive, got {}",
                self.n_condensate_mean
            )));
        }
        Ok(())
    }

    /// Counting noise expressed in rescaled units, using the mean atom
    /// number in the denominator of the rescaling transform.
    pub fn sigma_rescaled(&self) -> f64 {
        self.sigma_det_atoms
            / (self.transfer_fraction * (1.0 - self.transfer_fraction) * self.n_condensate_mean)
                .sqrt()
    }

    /// Noise-free detection with the same transfer and atom number.
    pub fn noiseless(&self) -> Self {
        Self {
            sigma_det_atoms: 0.0,
            n_condensate_sd: 0.0,
            ..*self
        }
    }
}

/// Counts measured after the displacement pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawShot {
    /// Atoms left in the condensate level, `N₀'`.
    pub n0_after: f64,
    /// Atoms in the `+1` level, `N₊₁'`.
    pub n_plus_after: f64,
}

/// The dimensionless homodyne variable `x` of one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledSample {
    pub x: f64,
}

/// `P(x|n)` of the ideal (noise-free) displaced Fock state.
pub fn displaced_fock_pdf(n: usize, x: f64) -> f64 {
    hermite::prob(n, x)
}

/// Variance of the displaced mixture in shot-noise units: `2⟨n⟩ + 1`.
pub fn displaced_variance(weights: &FockWeights) -> f64 {
    2.0 * weights.mean_occupation() + 1.0
}

fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n_max + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n_max {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Gaussian-noise smearing of a weight vector via the binomial-loss
/// identity: the smeared mixture is `√η Σ_k w̃_k P(√η x|k)` with
/// `w̃_k = Σ_n w_n B(k; n, η)`.
fn smear_weights(weights: &[f64], eta: f64) -> Vec<f64> {
    let n_max = weights.len() - 1;
    let ln_fact = ln_factorials(n_max);
    let ln_eta = eta.ln();
    let ln_one_minus = (1.0 - eta).ln();
    let mut out = vec![0.0_f64; n_max + 1];
    for (n, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (k_lo, k_hi) = if n <= 64 {
            (0, n)
        } else {
            let mu = n as f64 * eta;
            let sd = (n as f64 * eta * (1.0 - eta)).sqrt();
            (
                ((mu - 9.0 * sd - 1.0).floor().max(0.0)) as usize,
                ((mu + 9.0 * sd + 1.0).ceil() as usize).min(n),
            )
        };
        for k in k_lo..=k_hi {
            let ln_b = ln_fact[n] - ln_fact[k] - ln_fact[n - k]
                + k as f64 * ln_eta
                + (n - k) as f64 * ln_one_minus;
            out[k] += w * ln_b.exp();
        }
    }
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// A Fock mixture with detection noise folded in, prepared once and cheap to
/// evaluate pointwise.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    scale: f64,
    weights: Vec<f64>,
}

impl MixtureDensity {
    /// Mixture under `det`'s counting noise.
    pub fn new(weights: &FockWeights, det: &DetectionModel) -> Self {
        Self::with_sigma(weights, det.sigma_rescaled())
    }

    /// Mixture with explicit rescaled noise `sigma`.
    pub fn with_sigma(weights: &FockWeights, sigma: f64) -> Self {
        if sigma == 0.0 {
            return Self {
                scale: 1.0,
                weights: weights.as_slice().to_vec(),
            };
        }
        let eta = 1.0 / (1.0 + sigma * sigma);
        Self {
            scale: eta.sqrt(),
            weights: smear_weights(weights.as_slice(), eta),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let probs = hermite::prob_all_orders(self.weights.len() - 1, self.scale * x);
        self.scale
            * self
                .weights
                .iter()
                .zip(&probs)
                .map(|(w, p)| w * p)
                .sum::<f64>()
    }
}

/// Density of the noise-convolved mixture at one point. For repeated
/// evaluation build a [`MixtureDensity`] once instead.
pub fn mixture_pdf(weights: &FockWeights, x: f64, det: &DetectionModel) -> f64 {
    MixtureDensity::new(weights, det).pdf(x)
}

/// Noise-convolved single-Fock component densities `P_σ(x|k)`,
/// `k = 0..=n_max`; the building blocks of likelihoods and posteriors.
#[derive(Debug, Clone)]
pub struct NoisyComponents {
    scale: f64,
    /// `binom[k][j] = B(j; k, η)`
    binom: Vec<Vec<f64>>,
}

impl NoisyComponents {
    pub fn new(n_max: usize, sigma: f64) -> Self {
        if sigma == 0.0 {
            return Self {
                scale: 1.0,
                binom: (0..=n_max)
                    .map(|k| {
                        let mut row = vec![0.0; k + 1];
                        row[k] = 1.0;
                        row
                    })
                    .collect(),
            };
        }
        let eta = 1.0 / (1.0 + sigma * sigma);
        let ln_fact = ln_factorials(n_max);
        let binom = (0..=n_max)
            .map(|k| {
                (0..=k)
                    .map(|j| {
                        (ln_fact[k] - ln_fact[j] - ln_fact[k - j]
                            + j as f64 * eta.ln()
                            + (k - j) as f64 * (1.0 - eta).ln())
                        .exp()
                    })
                    .collect()
            })
            .collect();
        Self {
            scale: eta.sqrt(),
            binom,
        }
    }

    pub fn n_max(&self) -> usize {
        self.binom.len() - 1
    }

    /// `[P_σ(x|0), …, P_σ(x|n_max)]`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let probs = hermite::prob_all_orders(self.n_max(), self.scale * x);
        self.binom
            .iter()
            .map(|row| {
                self.scale
                    * row
                        .iter()
                        .zip(&probs)
                        .map(|(b, p)| b * p)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Single component `P_σ(x|n)`.
    pub fn component(&self, n: usize, x: f64) -> f64 {
        let probs = hermite::prob_all_orders(n, self.scale * x);
        self.scale
            * self.binom[n]
                .iter()
                .zip(&probs)
                .map(|(b, p)| b * p)
                .sum::<f64>()
    }
}

/// Map measured counts to the dimensionless homodyne variable.
pub fn rescale_shot(shot: &RawShot, det: &DetectionModel) -> Result<RescaledSample> {
    det.validate()?;
    let total = shot.n0_after + shot.n_plus_after;
    if total <= 0.0 {
        return Err(Error::ZeroTotalAtoms);
    }
    let c = det.transfer_fraction;
    let x = (shot.n_plus_after - c * total) / (c * (1.0 - c) * total).sqrt();
    Ok(RescaledSample { x })
}

/// Invert the rescaling: integer counts whose rescaled value reproduces
/// `x_ideal` up to rounding, with `noise_atoms` added to the `+1` count.
pub fn synthesize_raw_shot(
    x_ideal: f64,
    noise_atoms: f64,
    n_total: f64,
    det: &DetectionModel,
) -> RawShot {
    let c = det.transfer_fraction;
    let denom = (c * (1.0 - c) * n_total).sqrt();
    let transferred = (c * n_total + x_ideal * denom + noise_atoms)
        .round()
        .clamp(0.0, n_total);
    RawShot {
        n0_after: n_total - transferred,
        n_plus_after: transferred,
    }
}

/// Raw and rescaled shots of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct ShotData {
    pub raw: Vec<RawShot>,
    pub rescaled: Vec<RescaledSample>,
}

impl ShotData {
    /// Unbiased sample variance of the rescaled values.
    pub fn sample_variance(&self) -> f64 {
        let n = self.rescaled.len() as f64;
        let mean = self.rescaled.iter().map(|s| s.x).sum::<f64>() / n;
        self.rescaled
            .iter()
            .map(|s| (s.x - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rescaled.iter().map(|s| s.x).collect()
    }
}

const SHOT_CHUNK: usize = 1024;

/// Synthesize `n_shots` homodyne measurements of the mixture `weights`.
///
/// Per shot: the condensate size is drawn, an occupation `n` from the
/// weights, an ideal `x` from `P(·|n)`, Gaussian atom noise is added, and
/// integer counts are produced by inverting the rescaling transform. Shots
/// are generated in chunks with streams derived from `(seed, chunk)`, so the
/// output is a pure function of `(weights, det, n_shots, seed)`.
pub fn sample_shots(
    weights: &FockWeights,
    det: &DetectionModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotData> {
    det.validate()?;
    if n_shots == 0 {
        return Err(Error::InvalidParameter("n_shots must be positive".into()));
    }
    let weight_sampler = WeightSampler::new(weights);
    let mut fock = DisplacedFockSampler::new();
    let mut raw = Vec::with_capacity(n_shots);
    let mut rescaled = Vec::with_capacity(n_shots);

    for chunk in 0..n_shots.div_ceil(SHOT_CHUNK) {
        let mut rng = derive_stream(seed, chunk as u64);
        let in_chunk = SHOT_CHUNK.min(n_shots - chunk * SHOT_CHUNK);
        for _ in 0..in_chunk {
            let z_tot: f64 = rng.sample(StandardNormal);
            let n_total = (det.n_condensate_mean + det.n_condensate_sd * z_tot)
                .round()
                .max(1.0);
            let n = weight_sampler.sample(&mut rng);
            let x_ideal = fock.sample(n, &mut rng)?;
            let z_det: f64 = rng.sample(StandardNormal);
            let shot = synthesize_raw_shot(
                x_ideal,
                det.sigma_det_atoms * z_det,
                n_total,
                det,
            );
            rescaled.push(rescale_shot(&shot, det)?);
            raw.push(shot);
        }
    }
    Ok(ShotData { raw, rescaled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::tmsv_weights;
    use crate::fockspace::FockCutoff;
    use crate::quad::{density_moments, integrate};
    use approx::assert_relative_eq;

    fn det_noiseless() -> DetectionModel {
        DetectionModel {
            sigma_det_atoms: 0.0,
            transfer_fraction: 0.08,
            n_condensate_mean: 25_000.0,
            n_condensate_sd: 0.0,
        }
    }

    fn det_paper() -> DetectionModel {
        DetectionModel {
            sigma_det_atoms: 16.0,
            transfer_fraction: 0.08,
            n_condensate_mean: 25_000.0,
            n_condensate_sd: 1_250.0,
        }
    }

    fn gaussian(x: f64, var: f64) -> f64 {
        (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn vacuum_mixture_is_standard_normal() {
        let w = FockWeights::vacuum(4);
        for &x in &[-2.5, 0.0, 0.7, 3.1] {
            assert_relative_eq!(
                mixture_pdf(&w, x, &det_noiseless()),
                gaussian(x, 1.0),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn degenerate_mixture_equals_component() {
        let w = FockWeights::delta(3, 6).unwrap();
        for &x in &[-4.0, -1.2, 0.3, 2.8] {
            assert_relative_eq!(
                mixture_pdf(&w, x, &det_noiseless()),
                displaced_fock_pdf(3, x),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn noisy_vacuum_is_widened_gaussian() {
        let det = det_paper();
        let sigma = det.sigma_rescaled();
        // σ_resc = 16/√(0.08·0.92·25000) ≈ 0.373
        assert_relative_eq!(sigma, 16.0 / 1840.0_f64.sqrt(), epsilon = 1e-12);
        let w = FockWeights::vacuum(3);
        for &x in &[-2.0, 0.0, 1.4] {
            assert_relative_eq!(
                mixture_pdf(&w, x, &det),
                gaussian(x, 1.0 + sigma * sigma),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn smearing_matches_brute_force_convolution() {
        // oracle: direct numerical convolution with the noise Gaussian
        let sigma = 0.45;
        for n in 0..=5 {
            let w = FockWeights::delta(n, 5).unwrap();
            let smeared = MixtureDensity::with_sigma(&w, sigma);
            for &x in &[-3.3, -0.9, 0.0, 1.7, 4.1] {
                let brute = integrate(
                    &|y: f64| hermite::prob(n, y) * gaussian(x - y, sigma * sigma),
                    -20.0,
                    20.0,
                    1e-12,
                );
                assert_relative_eq!(smeared.pdf(x), brute, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn noisy_components_match_mixture_route() {
        let sigma = 0.37;
        let comps = NoisyComponents::new(4, sigma);
        for &x in &[-2.0, 0.0, 0.6, 3.5] {
            let vals = comps.eval(x);
            for n in 0..=4 {
                let w = FockWeights::delta(n, 4).unwrap();
                let want = MixtureDensity::with_sigma(&w, sigma).pdf(x);
                assert_relative_eq!(vals[n], want, max_relative = 1e-10);
                assert_relative_eq!(comps.component(n, x), want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn squeezed_mixture_variance_follows_cosh() {
        let xi = 1.0_f64;
        let (w, _) = tmsv_weights(xi, FockCutoff::new(60)).unwrap();
        let density = MixtureDensity::with_sigma(&w, 0.0);
        let (mean, var) = density_moments(&|x| density.pdf(x), -30.0, 30.0, 1e-11);
        assert!(mean.abs() < 1e-9);
        assert_relative_eq!(var, (2.0 * xi).cosh(), max_relative = 1e-7);
        assert_relative_eq!(
            displaced_variance(&w),
            (2.0 * xi).cosh(),
            max_relative = 1e-7
        );
    }

    #[test]
    fn mixture_variance_adds_noise_quadratically() {
        let (w, _) = tmsv_weights(0.7, FockCutoff::new(40)).unwrap();
        let sigma = 0.5;
        let density = MixtureDensity::with_sigma(&w, sigma);
        let (_, var) = density_moments(&|x| density.pdf(x), -25.0, 25.0, 1e-11);
        assert_relative_eq!(
            var,
            displaced_variance(&w) + sigma * sigma,
            max_relative = 1e-6
        );
    }

    #[test]
    fn thermal_mixture_equals_gaussian() {
        // a thermal Fock mixture of displaced states is exactly Gaussian
        // with variance 2n̄ + 1; this licenses the large-ξ fast path
        let n_bar = 2.0;
        let w = FockWeights::thermal(n_bar, 90).unwrap();
        let density = MixtureDensity::with_sigma(&w, 0.0);
        for &x in &[0.0, 0.8, 2.2, 4.9] {
            assert_relative_eq!(
                density.pdf(x),
                gaussian(x, 2.0 * n_bar + 1.0),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn displaced_variance_examples() {
        assert_relative_eq!(displaced_variance(&FockWeights::vacuum(3)), 1.0);
        assert_relative_eq!(
            displaced_variance(&FockWeights::delta(1, 3).unwrap()),
            3.0
        );
        let (w, _) = tmsv_weights(1.0, FockCutoff::new(60)).unwrap();
        assert_relative_eq!(displaced_variance(&w), 3.7621956910836315, max_relative = 1e-8);
    }

    #[test]
    fn rescale_shot_paper_arithmetic() {
        // cos²θ = 0.08, N_tot = 25 000, N₊₁ = 2 043 → x ≈ 1.0024
        let det = det_noiseless();
        let shot = RawShot {
            n0_after: 25_000.0 - 2_043.0,
            n_plus_after: 2_043.0,
        };
        let x = rescale_shot(&shot, &det).unwrap().x;
        assert_relative_eq!(x, 43.0 / 1840.0_f64.sqrt(), epsilon = 1e-12);
        assert!((x - 1.002) < 1e-2);

        let centered = RawShot {
            n0_after: 23_000.0,
            n_plus_after: 2_000.0,
        };
        assert_eq!(rescale_shot(&centered, &det).unwrap().x, 0.0);

        let empty = RawShot {
            n0_after: 0.0,
            n_plus_after: 0.0,
        };
        assert!(matches!(
            rescale_shot(&empty, &det),
            Err(Error::ZeroTotalAtoms)
        ));
    }

    #[test]
    fn synthesis_round_trip_within_rounding() {
        let det = det_noiseless();
        let n_total = 25_000.0;
        let denom = (0.08_f64 * 0.92 * n_total).sqrt();
        for &x in &[-6.0, -1.3, 0.0, 0.4, 7.7] {
            let shot = synthesize_raw_shot(x, 0.0, n_total, &det);
            assert_eq!(shot.n0_after + shot.n_plus_after, n_total);
            let back = rescale_shot(&shot, &det).unwrap().x;
            assert!(
                (back - x).abs() * denom <= 0.5 + 1e-9,
                "x = {x}: recovered {back}"
            );
        }
    }

    #[test]
    fn vacuum_shots_have_unit_variance() {
        let w = FockWeights::vacuum(2);
        let shots = sample_shots(&w, &det_noiseless(), 200_000, 99).unwrap();
        let var = shots.sample_variance();
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        // binomial splitting of N_tot reproduces the shot-noise unit by
        // construction of the rescaling denominator
    }

    #[test]
    fn squeezed_shots_match_predicted_variance() {
        let xi = 1.0_f64;
        let (w, _) = tmsv_weights(xi, FockCutoff::new(60)).unwrap();
        let shots = sample_shots(&w, &det_paper(), 150_000, 7).unwrap();
        let want = (2.0 * xi).cosh() + det_paper().sigma_rescaled().powi(2);
        let var = shots.sample_variance();
        assert!(
            (var - want).abs() / want < 0.03,
            "variance {var} vs {want}"
        );
    }

    #[test]
    fn shots_are_deterministic_per_seed() {
        let (w, _) = tmsv_weights(0.8, FockCutoff::new(40)).unwrap();
        let a = sample_shots(&w, &det_paper(), 3_000, 123).unwrap();
        let b = sample_shots(&w, &det_paper(), 3_000, 123).unwrap();
        assert_eq!(a.raw, b.raw);
        let c = sample_shots(&w, &det_paper(), 3_000, 124).unwrap();
        assert_ne!(a.raw, c.raw);
    }

    #[test]
    fn detection_model_validation() {
        let mut det = det_paper();
        det.transfer_fraction = 1.2;
        assert!(det.validate().is_err());
        det.transfer_fraction = 0.08;
        det.sigma_det_atoms = -1.0;
        assert!(det.validate().is_err());
        assert!(sample_shots(&FockWeights::vacuum(1), &det_paper(), 0, 1).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn smeared_weights_stay_normalized(
                raw in proptest::collection::vec(0.01f64..1.0, 1..12),
                sigma in 0.05f64..1.5,
            ) {
                let w = FockWeights::new(raw).unwrap();
                let density = MixtureDensity::with_sigma(&w, sigma);
                let sum: f64 = density.weights.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(density.weights.iter().all(|v| *v >= 0.0));
            }

            #[test]
            fn mixture_pdf_nonnegative(
                raw in proptest::collection::vec(0.01f64..1.0, 1..10),
                x in -20.0f64..20.0,
            ) {
                let w = FockWeights::new(raw).unwrap();
                prop_assert!(mixture_pdf(&w, x, &det_paper()) >= 0.0);
            }
        }
    }
}
