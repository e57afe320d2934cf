//! Quasienergy spectra of `H_eff = i ln U` and skin-effect diagnostics.
//!
//! Under PBC the walk block-diagonalizes into 2×2 Bloch matrices
//! `U_k = D(k) L(γ) C(θ)` with `D(k) = diag(e^{ik}, e^{-ik})` (Fourier
//! convention `|k> = Σ_x e^{-ikx}|x>`, H moving toward `+x`). Under OBC the
//! full `2N × 2N` walk matrix is diagonalized densely.
//!
//! Quasienergies use the principal branch `E = -arg λ + i ln|λ|` with
//! `Re E ∈ (-π, π]`, so `e^{-iE} = λ`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::constants::WINDING_MIN_DISTANCE;
use crate::eigen::{eig_dense, CMatrix};
use crate::walk::{Boundary, WalkParams, H, V};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMatrix {
    pub k: f64,
    pub u: [[Complex64; 2]; 2],
}

impl BlochMatrix {
    pub fn determinant(&self) -> Complex64 {
        self.u[0][0] * self.u[1][1] - self.u[0][1] * self.u[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.u[0][0] + self.u[1][1]
    }

    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let half = self.trace() * 0.5;
        let disc = (half * half - self.determinant()).sqrt();
        [half + disc, half - disc]
    }
}

pub fn bloch_matrix(k: f64, theta: f64, gamma: f64) -> BlochMatrix {
    let (s, c) = theta.sin_cos();
    let damp = (-gamma).exp();
    let fwd = Complex64::from_polar(1.0, k);
    let back = Complex64::from_polar(damp, -k);
    BlochMatrix {
        k,
        u: [[fwd * c, fwd * s], [back * s, -back * c]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergySource {
    Pbc { k: f64, band: usize },
    Obc { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiEnergy {
    pub e: Complex64,
    pub source: EnergySource,
}

impl QuasiEnergy {
    pub fn from_eigenvalue(lambda: Complex64, source: EnergySource) -> Self {
        QuasiEnergy {
            e: quasienergy(lambda),
            source,
        }
    }

    /// `e^{-iE}`, the originating eigenvalue of `U`.
    pub fn eigenvalue(&self) -> Complex64 {
        (-Complex64::i() * self.e).exp()
    }
}

/// Principal-branch `E = i ln λ` with `Re E ∈ (-π, π]`.
pub fn quasienergy(lambda: Complex64) -> Complex64 {
    let mut re = -lambda.arg();
    if re <= -PI {
        re += TAU;
    }
    Complex64::new(re, lambda.norm().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumBoundary {
    Pbc,
    Obc,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// PBC: k-major, two bands per k. OBC: one entry per eigenvalue.
    pub energies: Vec<QuasiEnergy>,
    /// OBC spatial profiles `|ψ(x)|²`, each summing to one.
    pub eigenstates: Option<Vec<Vec<f64>>>,
    pub boundary: SpectrumBoundary,
    pub params: WalkParams,
    /// Indices into the k-grid where band assignment was ambiguous.
    pub ambiguous_k: Vec<usize>,
}

impl SpectrumResult {
    pub fn max_abs_imag(&self) -> f64 {
        self.energies.iter().map(|q| q.e.im.abs()).fold(0.0, f64::max)
    }

    pub fn k_samples(&self) -> usize {
        match self.boundary {
            SpectrumBoundary::Pbc => self.energies.len() / 2,
            SpectrumBoundary::Obc => 0,
        }
    }

    /// U-eigenvalues of one tracked PBC band in k order.
    fn band_eigenvalues(&self, band: usize) -> Vec<Complex64> {
        self.energies
            .iter()
            .filter(|q| matches!(q.source, EnergySource::Pbc { band: b, .. } if b == band))
            .map(QuasiEnergy::eigenvalue)
            .collect()
    }
}

fn k_grid(samples: usize) -> impl Iterator<Item = f64> {
    (0..samples).map(move |j| -PI + TAU * j as f64 / samples as f64)
}

/// Assignment-cost difference below which a k-point is flagged as ambiguous.
const TRACKING_AMBIGUITY: f64 = 1e-9;

/// PBC spectrum on a uniform grid over `[-π, π)` with bands tracked by
/// nearest-eigenvalue matching between neighbouring k-points.
pub fn pbc_spectrum(params: &WalkParams, k_samples: usize) -> Result<SpectrumResult> {
    if k_samples < 16 {
        return Err(Error::validation("k_samples", format!("{k_samples} < 16")));
    }
    let mut energies = Vec::with_capacity(2 * k_samples);
    let mut ambiguous_k = Vec::new();
    let mut prev: Option<[Complex64; 2]> = None;
    for (j, k) in k_grid(k_samples).enumerate() {
        let mut pair = bloch_matrix(k, params.theta, params.gamma).eigenvalues();
        if let Some(p) = prev {
            let keep = (pair[0] - p[0]).norm() + (pair[1] - p[1]).norm();
            let swap = (pair[1] - p[0]).norm() + (pair[0] - p[1]).norm();
            if (keep - swap).abs() <= TRACKING_AMBIGUITY {
                ambiguous_k.push(j);
            }
            if swap < keep {
                pair.swap(0, 1);
            }
        }
        prev = Some(pair);
        for (band, &lambda) in pair.iter().enumerate() {
            energies.push(QuasiEnergy::from_eigenvalue(lambda, EnergySource::Pbc { k, band }));
        }
    }
    Ok(SpectrumResult {
        energies,
        eigenstates: None,
        boundary: SpectrumBoundary::Pbc,
        params: *params,
        ambiguous_k,
    })
}

/// Index of basis state `|x, pol>` in the dense representation: site-major,
/// polarization-minor (`2x + pol`).
pub fn basis_index(x: usize, pol: usize) -> usize {
    2 * x + pol
}

/// Explicit `U` on a finite lattice.
///
/// Periodic lattices wrap. Open lattices are closed by reflection: the H
/// component leaving site `N-1` returns as V on `N-1`, and the V component
/// leaving site `0` returns as H on `0`, so the shift stays a permutation.
pub fn dense_walk_matrix(params: &WalkParams) -> Result<CMatrix> {
    params.validate()?;
    let (n, periodic) = match params.boundary {
        Boundary::Infinite => {
            return Err(Error::validation("boundary", "dense matrix needs an Open or Periodic lattice"))
        }
        Boundary::Open(n) => (n, false),
        Boundary::Periodic(n) => (n, true),
    };
    let local = params.local_operator();
    let mut m = CMatrix::zeros(2 * n);
    for x in 0..n {
        let h_target = if x + 1 < n {
            basis_index(x + 1, H)
        } else if periodic {
            basis_index(0, H)
        } else {
            basis_index(x, V)
        };
        let v_target = if x > 0 {
            basis_index(x - 1, V)
        } else if periodic {
            basis_index(n - 1, V)
        } else {
            basis_index(x, H)
        };
        for pol in [H, V] {
            let col = basis_index(x, pol);
            m[(h_target, col)] += Complex64::new(local[H][pol], 0.0);
            m[(v_target, col)] += Complex64::new(local[V][pol], 0.0);
        }
    }
    Ok(m)
}

/// Maximum lattice size accepted by [`obc_spectrum`].
pub const OBC_MAX_SITES: usize = 500;

pub fn obc_spectrum(params: &WalkParams, with_states: bool) -> Result<SpectrumResult> {
    let n = match params.boundary {
        Boundary::Open(n) => n,
        _ => return Err(Error::validation("boundary", "OBC spectrum needs an Open lattice")),
    };
    if n > OBC_MAX_SITES {
        return Err(Error::validation("boundary", format!("N = {n} exceeds {OBC_MAX_SITES}")));
    }
    let m = dense_walk_matrix(params)?;
    let eig = eig_dense(&m)?;
    let energies = eig
        .values
        .iter()
        .enumerate()
        .map(|(index, &l)| QuasiEnergy::from_eigenvalue(l, EnergySource::Obc { index }))
        .collect();
    let eigenstates = with_states.then(|| eig.vectors.iter().map(|v| spatial_profile(v)).collect());
    Ok(SpectrumResult {
        energies,
        eigenstates,
        boundary: SpectrumBoundary::Obc,
        params: *params,
        ambiguous_k: vec![],
    })
}

/// `|ψ(x)|² = |a_x|² + |b_x|²`, normalized to unit sum.
pub fn spatial_profile(v: &[Complex64]) -> Vec<f64> {
    let mut p: Vec<f64> = v.chunks(2).map(|ab| ab.iter().map(|z| z.norm_sqr()).sum()).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Closed PBC curves in the complex-E plane with `Re E` lifted continuously.
///
/// Bands that exchange at the zone boundary are joined into a single curve.
pub fn band_curves(pbc: &SpectrumResult) -> Result<Vec<Vec<Complex64>>> {
    if pbc.boundary != SpectrumBoundary::Pbc {
        return Err(Error::UntrackedBand("spectrum is not a PBC result".into()));
    }
    if !pbc.ambiguous_k.is_empty() {
        return Err(Error::UntrackedBand(format!(
            "ambiguous assignment at k indices {:?}",
            pbc.ambiguous_k
        )));
    }
    let bands = [pbc.band_eigenvalues(0), pbc.band_eigenvalues(1)];
    if bands[0].is_empty() || bands[0].len() != bands[1].len() {
        return Err(Error::UntrackedBand("band lengths differ".into()));
    }
    // where does each band continue after wrapping k -> k + 2π?
    let last = [*bands[0].last().unwrap(), *bands[1].last().unwrap()];
    let first = [bands[0][0], bands[1][0]];
    let keep = (last[0] - first[0]).norm() + (last[1] - first[1]).norm();
    let swap = (last[0] - first[1]).norm() + (last[1] - first[0]).norm();
    if (keep - swap).abs() <= TRACKING_AMBIGUITY {
        return Err(Error::UntrackedBand("ambiguous continuation across the zone boundary".into()));
    }
    let cycles: Vec<Vec<Complex64>> = if keep <= swap {
        bands.to_vec()
    } else {
        vec![bands.concat()]
    };
    cycles.iter().map(|c| lift(c)).collect()
}

fn lift(eigenvalues: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out: Vec<Complex64> = Vec::with_capacity(eigenvalues.len());
    for &l in eigenvalues {
        let mut e = quasienergy(l);
        if let Some(prev) = out.last() {
            e.re += TAU * ((prev.re - e.re) / TAU).round();
        }
        out.push(e);
    }
    let first = out[0];
    let last = *out.last().unwrap();
    let wraps = ((last.re - first.re) / TAU).round();
    if wraps != 0.0 {
        return Err(Error::UntrackedBand(
            "band winds around the quasienergy zone and does not enclose an area".into(),
        ));
    }
    Ok(out)
}

fn shoelace(curve: &[Complex64]) -> f64 {
    let n = curve.len();
    (0..n)
        .map(|i| {
            let a = curve[i];
            let b = curve[(i + 1) % n];
            a.re * b.im - b.re * a.im
        })
        .sum::<f64>()
        * 0.5
}

/// Absolute enclosed area of each closed PBC curve.
pub fn spectral_loop_area(pbc: &SpectrumResult) -> Result<Vec<f64>> {
    Ok(band_curves(pbc)?.iter().map(|c| shoelace(c).abs()).collect())
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0)
    };
    (a + ab * t - p).norm()
}

/// 2π translates of `e0` that fall within reach of `curve`.
fn relevant_translates(curve: &[Complex64], e0: Complex64) -> impl Iterator<Item = Complex64> {
    let lo = curve.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let hi = curve.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let m_lo = ((lo - e0.re) / TAU).floor() as i64 - 1;
    let m_hi = ((hi - e0.re) / TAU).ceil() as i64 + 1;
    (m_lo..=m_hi).map(move |m| e0 + Complex64::new(TAU * m as f64, 0.0))
}

/// Distance from `e0` (modulo 2π in `Re E`) to the polyline PBC curves.
pub fn distance_to_curve(pbc: &SpectrumResult, e0: Complex64) -> Result<f64> {
    let curves = band_curves(pbc)?;
    Ok(curves
        .iter()
        .flat_map(|c| {
            relevant_translates(c, e0)
                .flat_map(|p| (0..c.len()).map(move |i| segment_distance(p, c[i], c[(i + 1) % c.len()])))
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min))
}

/// Total winding number of the PBC curves around `e0`.
pub fn point_gap_winding(pbc: &SpectrumResult, e0: Complex64) -> Result<i64> {
    let distance = distance_to_curve(pbc, e0)?;
    if distance <= WINDING_MIN_DISTANCE {
        return Err(Error::TooCloseToCurve { distance });
    }
    let mut total = 0.0;
    for curve in band_curves(pbc)? {
        for p in relevant_translates(&curve, e0) {
            let n = curve.len();
            for i in 0..n {
                let a = curve[i] - p;
                let b = curve[(i + 1) % n] - p;
                total += (b / a).arg();
            }
        }
    }
    Ok((total / TAU).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
}

/// Probability mass on the `⌈fN⌉` sites next to the heavier edge, and that edge.
pub fn edge_mass_with_side(profile: &[f64], fraction: f64) -> Result<(f64, Edge)> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::validation("fraction", format!("{fraction} not in (0, 0.5]")));
    }
    let n = profile.len();
    if n == 0 {
        return Err(Error::validation("profile", "empty"));
    }
    let width = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let left: f64 = profile[..width].iter().sum();
    let right: f64 = profile[n - width..].iter().sum();
    Ok(if left >= right {
        (left, Edge::Left)
    } else {
        (right, Edge::Right)
    })
}

pub fn edge_mass(profile: &[f64], fraction: f64) -> Result<f64> {
    edge_mass_with_side(profile, fraction).map(|(m, _)| m)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Median edge mass over all eigenstates of an OBC result.
pub fn median_edge_mass(obc: &SpectrumResult, fraction: f64) -> Result<f64> {
    let states = obc
        .eigenstates
        .as_ref()
        .ok_or_else(|| Error::validation("spectrum", "eigenstates were not requested"))?;
    let mut masses = states
        .iter()
        .map(|p| edge_mass(p, fraction))
        .collect::<Result<Vec<_>>>()?;
    median(&mut masses).ok_or_else(|| Error::validation("spectrum", "no eigenstates"))
}
