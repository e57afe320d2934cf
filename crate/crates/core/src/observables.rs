//! Coin entanglement, localization and growth-rate observables.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::constants::{ALGEBRAIC_TOL, AMPLITUDE_FLOOR, NORMALIZATION_TOL};
use crate::walk::{self, Boundary, InitialState, PolarizedDistribution, WalkParams, WalkState, H, V};
use crate::{Error, Result};

/// Coin density matrix `[[α, χ], [χ*, β]]` after tracing out position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedDensityMatrix {
    pub alpha: f64,
    pub beta: f64,
    pub chi: Complex64,
}

impl ReducedDensityMatrix {
    /// `αβ - |χ|²`.
    pub fn determinant(&self) -> f64 {
        self.alpha * self.beta - self.chi.norm_sqr()
    }

    /// `λ_{1,2} = (1 ± √(1 - 4 det)) / 2`, largest first.
    ///
    /// A slightly negative discriminant from rounding is clamped to zero.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let disc = (1.0 - 4.0 * self.determinant()).max(0.0).sqrt();
        [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0]
    }
}

pub fn reduced_density(state: &WalkState) -> Result<ReducedDensityMatrix> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::validation("state", format!("norm^2 = {norm}, expected 1")));
    }
    let mut rho = ReducedDensityMatrix {
        alpha: 0.0,
        beta: 0.0,
        chi: Complex64::new(0.0, 0.0),
    };
    for [a, b] in &state.amps {
        rho.alpha += a.norm_sqr();
        rho.beta += b.norm_sqr();
        rho.chi += a * b.conj();
    }
    Ok(rho)
}

/// Base-2 von Neumann entropy of the coin state.
pub fn entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    let raw = 1.0 - 4.0 * rho.determinant();
    if raw < -ALGEBRAIC_TOL {
        return Err(Error::Domain(format!(
            "eigenvalue outside [0, 1]: discriminant {raw}"
        )));
    }
    let [l1, l2] = rho.eigenvalues();
    for l in [l1, l2] {
        if !(-ALGEBRAIC_TOL..=1.0 + ALGEBRAIC_TOL).contains(&l) {
            return Err(Error::Domain(format!("eigenvalue {l} outside [0, 1]")));
        }
    }
    Ok([l1, l2]
        .into_iter()
        .map(|l| l.clamp(0.0, 1.0))
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Entropy of the coin after evolving `init` for `t` steps with per-step normalization.
pub fn entropy_after(init: &InitialState, params: &WalkParams, t: usize) -> Result<f64> {
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    let state = walk::evolve(init, &params, t)?;
    entropy(&reduced_density(&state)?)
}

/// Inverse participation ratio `Σ_x P(x)²`.
pub fn ipr(site_probabilities: &[f64]) -> f64 {
    site_probabilities.iter().map(|p| p * p).sum()
}

pub fn state_ipr(state: &WalkState) -> f64 {
    ipr(&state
        .amps
        .iter()
        .map(|[a, b]| a.norm_sqr() + b.norm_sqr())
        .collect::<Vec<_>>())
}

/// Growth rates on the lattice-realizable velocities `v = (x - x0)/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRateProfile {
    pub velocities: Vec<f64>,
    /// `λ(v)` or, for polarization-averaged profiles, `λ̄(v)`; `-inf` where the amplitude vanishes.
    pub rates: Vec<f64>,
    /// Polarization-resolved components for averaged profiles.
    pub lambda_h: Option<Vec<f64>>,
    pub lambda_v: Option<Vec<f64>>,
    pub t: usize,
    pub normalized: bool,
}

impl GrowthRateProfile {
    /// Velocity of the largest finite rate; the most negative velocity wins exact ties.
    pub fn argmax_velocity(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&v, &r) in self.velocities.iter().zip(&self.rates) {
            if r.is_finite() && best.is_none_or(|(_, br)| r > br) {
                best = Some((v, r));
            }
        }
        best.map(|(v, _)| v)
    }

    pub fn rate_at(&self, v: f64) -> Option<f64> {
        self.velocities
            .iter()
            .position(|&u| (u - v).abs() < 1e-12)
            .map(|i| self.rates[i])
    }

    /// Largest `|λ(v) - λ(-v)|` over pairs where both sides are finite; `-inf`
    /// sentinels must match exactly.
    pub fn asymmetry(&self) -> f64 {
        let n = self.rates.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.rates[i], self.rates[n - 1 - i]);
                if a.is_finite() && b.is_finite() {
                    (a - b).abs()
                } else if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

fn log_rate(magnitude: f64, t: usize) -> f64 {
    if magnitude < AMPLITUDE_FLOOR {
        f64::NEG_INFINITY
    } else {
        magnitude.ln() / t as f64
    }
}

fn cone_positions(x0: i64, t: usize) -> impl Iterator<Item = i64> {
    let t = t as i64;
    (0..=t).map(move |j| x0 - t + 2 * j)
}

fn require_cone(params: &WalkParams, t: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::validation("t", format!("{t} < 2")));
    }
    if params.boundary != Boundary::Infinite {
        return Err(Error::validation("boundary", "growth rates need the Infinite boundary"));
    }
    Ok(())
}

/// `λ(v) = ln|ψ_x(t)| / t` on the per-step-normalized state.
pub fn lyapunov_profile(init: &InitialState, params: &WalkParams, t: usize) -> Result<GrowthRateProfile> {
    require_cone(params, t)?;
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    let state = walk::evolve(init, &params, t)?;
    let (velocities, rates) = cone_positions(init.position, t)
        .map(|x| {
            let [a, b] = state.amplitude_at(x);
            let v = (x - init.position) as f64 / t as f64;
            (v, log_rate((a.norm_sqr() + b.norm_sqr()).sqrt(), t))
        })
        .unzip();
    Ok(GrowthRateProfile {
        velocities,
        rates,
        lambda_h: None,
        lambda_v: None,
        t,
        normalized: true,
    })
}

/// `λ(0)` from a normalized run of `t` steps launched as `|0, H>`.
pub fn lyapunov_exponent(params: &WalkParams, t: usize) -> Result<f64> {
    let profile = lyapunov_profile(&InitialState::horizontal(0), params, t)?;
    profile
        .rate_at(0.0)
        .ok_or_else(|| Error::validation("t", "x = 0 is not reachable at odd t"))
}

/// `λ̄(v) = (λ_H(v) + λ_V(v))/2` from `|0,H>` and `|0,V>` launches.
pub fn polarization_averaged_growth(params: &WalkParams, t: usize) -> Result<GrowthRateProfile> {
    require_cone(params, t)?;
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    let from_h = walk::evolve(&InitialState::horizontal(0), &params, t)?;
    let from_v = walk::evolve(&InitialState::vertical(0), &params, t)?;
    let mut velocities = Vec::with_capacity(t + 1);
    let mut lambda_h = Vec::with_capacity(t + 1);
    let mut lambda_v = Vec::with_capacity(t + 1);
    let mut rates = Vec::with_capacity(t + 1);
    for x in cone_positions(0, t) {
        let lh = log_rate(from_h.amplitude_at(x)[H].norm(), t);
        let lv = log_rate(from_v.amplitude_at(x)[V].norm(), t);
        velocities.push(x as f64 / t as f64);
        lambda_h.push(lh);
        lambda_v.push(lv);
        rates.push(0.5 * (lh + lv));
    }
    Ok(GrowthRateProfile {
        velocities,
        rates,
        lambda_h: Some(lambda_h),
        lambda_v: Some(lambda_v),
        t,
        normalized: true,
    })
}

/// Launch-resolved distribution: `P_H(x)` of the `|0,H>` launch and `P_V(x)`
/// of the `|0,V>` launch after `t` normalized steps.
pub fn launch_resolved_distribution(params: &WalkParams, t: usize) -> Result<PolarizedDistribution> {
    let params = WalkParams {
        normalize_each_step: true,
        ..*params
    };
    let from_h = walk::probability_distribution(&walk::evolve(&InitialState::horizontal(0), &params, t)?);
    let from_v = walk::probability_distribution(&walk::evolve(&InitialState::vertical(0), &params, t)?);
    let xs: BTreeSet<i64> = from_h.0.keys().chain(from_v.0.keys()).copied().collect();
    Ok(PolarizedDistribution(
        xs.into_iter().map(|x| (x, (from_h.get(x).0, from_v.get(x).1))).collect(),
    ))
}

/// `F = Σ_x (√(p_H q_H) + √(p_V q_V))` over the union of supports.
pub fn fidelity(p: &PolarizedDistribution, q: &PolarizedDistribution) -> f64 {
    let xs: BTreeSet<i64> = p.0.keys().chain(q.0.keys()).copied().collect();
    xs.into_iter()
        .map(|x| {
            let (ph, pv) = p.get(x);
            let (qh, qv) = q.get(x);
            (ph * qh).sqrt() + (pv * qv).sqrt()
        })
        .sum()
}
