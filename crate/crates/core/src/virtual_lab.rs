//! Monte-Carlo model of the photon-counting experiment and the σz/σx
//! reconstruction of the coin density matrix.
//!
//! Each launched photon survives the `t` round trips with probability
//! `survival^t`, is detected with probability `efficiency`, and otherwise is
//! lost. Losses are polarization-neutral, so they only thin the counts.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::constants::PSD_CLAMP_TOL;
use crate::observables::{entropy, ReducedDensityMatrix};
use crate::walk::{PolarizedDistribution, WalkState};
use crate::{Error, Result};

pub const DEFAULT_SURVIVAL: f64 = 0.61;
pub const DEFAULT_EFFICIENCY: f64 = 0.498;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Probability of completing one round trip.
    pub per_step_survival: f64,
    pub detection_efficiency: f64,
    /// Photons launched per basis setting.
    pub shots: u64,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            per_step_survival: DEFAULT_SURVIVAL,
            detection_efficiency: DEFAULT_EFFICIENCY,
            shots: 1_000_000,
            seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (what, p) in [
            ("per_step_survival", self.per_step_survival),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(what, format!("{p} not in [0, 1]")));
            }
        }
        if self.shots == 0 {
            return Err(Error::validation("shots", "must be >= 1"));
        }
        Ok(())
    }

    /// Probability that one launched photon is detected after `t` steps.
    pub fn detection_probability(&self, t: usize) -> f64 {
        self.per_step_survival.powi(t as i32) * self.detection_efficiency
    }

    /// Smallest shot count whose expected detections after `t` steps reach `detections`.
    pub fn shots_for_detections(&self, detections: f64, t: usize) -> u64 {
        (detections / self.detection_probability(t)).ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `{|H>, |V>}`.
    Z,
    /// `{|+>, |->}` with `|±> = (|H> ± |V>)/√2`.
    X,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsRecord {
    pub basis: Basis,
    /// Position → `(N_H, N_V)` for Z, `(N_+, N_-)` for X.
    pub counts: BTreeMap<i64, (u64, u64)>,
    pub t: usize,
    pub total_detected: u64,
}

impl CountsRecord {
    pub fn from_counts(basis: Basis, t: usize, counts: BTreeMap<i64, (u64, u64)>) -> Self {
        let total_detected = counts.values().map(|(a, b)| a + b).sum();
        CountsRecord {
            basis,
            counts,
            t,
            total_detected,
        }
    }

    fn occupied_bins(&self) -> usize {
        self.counts
            .values()
            .map(|&(a, b)| (a > 0) as usize + (b > 0) as usize)
            .sum()
    }
}

/// Exact outcome probabilities of a projective measurement in `basis`.
pub fn basis_distribution(state: &WalkState, basis: Basis) -> PolarizedDistribution {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    PolarizedDistribution(
        state
            .positions()
            .zip(&state.amps)
            .map(|(x, &[a, b])| {
                let pair = match basis {
                    Basis::Z => (a.norm_sqr(), b.norm_sqr()),
                    Basis::X => (((a + b) * r).norm_sqr(), ((a - b) * r).norm_sqr()),
                };
                (x, pair)
            })
            .collect(),
    )
}

/// Draws `n` trials over `probs` (which may sum to less than one; the rest is
/// an implicit discarded category) by sequential conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut remaining_n = n;
    let mut remaining_p = 1.0f64;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if remaining_n == 0 || p <= 0.0 || remaining_p <= 0.0 {
            out.push(0);
            continue;
        }
        let cond = (p / remaining_p).clamp(0.0, 1.0);
        let k = Binomial::new(remaining_n, cond)
            .expect("conditional probability in [0, 1]")
            .sample(rng);
        out.push(k);
        remaining_n -= k;
        remaining_p -= p;
    }
    out
}

fn sample_record(
    rng: &mut ChaCha8Rng,
    dist: &PolarizedDistribution,
    basis: Basis,
    t: usize,
    n: u64,
    scale: f64,
) -> CountsRecord {
    let xs: Vec<i64> = dist.0.keys().copied().collect();
    let probs: Vec<f64> = dist.0.values().flat_map(|&(p, q)| [p * scale, q * scale]).collect();
    let draws = multinomial(rng, n, &probs);
    let counts = xs
        .into_iter()
        .zip(draws.chunks(2))
        .map(|(x, c)| (x, (c[0], c[1])))
        .collect();
    CountsRecord::from_counts(basis, t, counts)
}

pub fn simulate_counts(state: &WalkState, cfg: &DetectionConfig, basis: Basis) -> Result<CountsRecord> {
    cfg.validate()?;
    if !state.is_normalized() {
        return Err(Error::validation("state", "must be normalized before measurement"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist = basis_distribution(state, basis);
    Ok(sample_record(
        &mut rng,
        &dist,
        basis,
        state.t,
        cfg.shots,
        cfg.detection_probability(state.t),
    ))
}

/// Empirical frequencies `N / total_detected`.
pub fn normalize_counts(rec: &CountsRecord) -> Result<PolarizedDistribution> {
    if rec.total_detected == 0 {
        return Err(Error::NoDetections);
    }
    let total = rec.total_detected as f64;
    Ok(PolarizedDistribution(
        rec.counts
            .iter()
            .map(|(&x, &(a, b))| (x, (a as f64 / total, b as f64 / total)))
            .collect(),
    ))
}

/// Whether the measured state is known to have real amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeClass {
    Real,
    Complex,
}

/// `α = Σ P_H`, `β = Σ P_V`, `χ = Σ_x sgn(P_+ - P_-) √(P_H P_V)`.
pub fn reconstruct_from_distributions(
    z: &PolarizedDistribution,
    x: &PolarizedDistribution,
    class: AmplitudeClass,
) -> Result<ReducedDensityMatrix> {
    if class == AmplitudeClass::Complex {
        return Err(Error::UnsupportedReconstruction);
    }
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut chi = 0.0;
    for (&pos, &(ph, pv)) in &z.0 {
        alpha += ph;
        beta += pv;
        let (pp, pm) = x.get(pos);
        let diff = pp - pm;
        if diff != 0.0 {
            chi += diff.signum() * (ph * pv).sqrt();
        }
    }
    let mut rho = ReducedDensityMatrix {
        alpha,
        beta,
        chi: Complex64::new(chi, 0.0),
    };
    let det = rho.determinant();
    if det < 0.0 {
        if det < -PSD_CLAMP_TOL {
            return Err(Error::Domain(format!("reconstructed matrix is not PSD (det {det})")));
        }
        rho.chi *= (alpha * beta).max(0.0).sqrt() / chi.abs();
    }
    Ok(rho)
}

pub fn reconstruct_rho(z: &CountsRecord, x: &CountsRecord, class: AmplitudeClass) -> Result<ReducedDensityMatrix> {
    if z.basis != Basis::Z || x.basis != Basis::X {
        return Err(Error::validation("records", "expected one Z-basis and one X-basis record"));
    }
    if z.t != x.t {
        return Err(Error::validation("records", format!("step mismatch: {} vs {}", z.t, x.t)));
    }
    reconstruct_from_distributions(&normalize_counts(z)?, &normalize_counts(x)?, class)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapEstimate {
    /// Sample standard deviation of the resampled entropies.
    pub stderr: f64,
    /// Set when every resample is identical (each record fills a single bin).
    pub degenerate: bool,
}

pub const MIN_RESAMPLES: usize = 100;

/// Multinomial bootstrap of the reconstructed entropy.
pub fn bootstrap_error(z: &CountsRecord, x: &CountsRecord, resamples: usize, seed: u64) -> Result<BootstrapEstimate> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::validation("resamples", format!("{resamples} < {MIN_RESAMPLES}")));
    }
    // validates both records
    reconstruct_rho(z, x, AmplitudeClass::Real)?;
    if z.occupied_bins() <= 1 && x.occupied_bins() <= 1 {
        return Ok(BootstrapEstimate {
            stderr: 0.0,
            degenerate: true,
        });
    }
    let z_freq = normalize_counts(z)?;
    let x_freq = normalize_counts(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let zr = sample_record(&mut rng, &z_freq, Basis::Z, z.t, z.total_detected, 1.0);
        let xr = sample_record(&mut rng, &x_freq, Basis::X, x.t, x.total_detected, 1.0);
        samples.push(entropy(&reconstruct_rho(&zr, &xr, AmplitudeClass::Real)?)?);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BootstrapEstimate {
        stderr: var.sqrt(),
        degenerate: false,
    })
}
