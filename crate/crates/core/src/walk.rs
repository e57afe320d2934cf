//! State vectors and time evolution of the lossy coined walk.
//!
//! One step applies, in this order, the coin `C(θ)`, the loss `L(γ)` and the
//! conditional shift. The order is fixed: swapping coin and loss changes the
//! non-unitary dynamics.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::constants::{ALGEBRAIC_TOL, NORMALIZATION_TOL};
use crate::{Error, Result};

/// Real 2×2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Amplitude pair `(a_x, b_x)` for the H and V polarizations at one site.
pub type Amplitude = [Complex64; 2];

pub const H: usize = 0;
pub const V: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Unbounded line; the represented window grows by one site per side each step.
    Infinite,
    /// Finite lattice `0..N` whose edges may not be crossed during dynamics.
    Open(usize),
    /// Ring of `N` sites.
    Periodic(usize),
}

impl Boundary {
    pub fn sites(&self) -> Option<usize> {
        match *self {
            Boundary::Infinite => None,
            Boundary::Open(n) | Boundary::Periodic(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    /// Coin angle in radians.
    pub theta: f64,
    /// Loss parameter; the V component is attenuated by `e^{-gamma}` each step.
    pub gamma: f64,
    pub boundary: Boundary,
    pub normalize_each_step: bool,
}

impl WalkParams {
    /// Validated constructor. `theta` must lie in `[0, π/2]`; the endpoints are
    /// allowed so sweeps can approach the degenerate coins.
    pub fn new(theta: f64, gamma: f64, boundary: Boundary, normalize_each_step: bool) -> Result<Self> {
        let params = WalkParams {
            theta,
            gamma,
            boundary,
            normalize_each_step,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn infinite(theta: f64, gamma: f64) -> Result<Self> {
        Self::new(theta, gamma, Boundary::Infinite, true)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() || self.theta < 0.0 || self.theta > FRAC_PI_2 {
            return Err(Error::validation(
                "theta",
                format!("{} rad is outside [0, pi/2]", self.theta),
            ));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::validation(
                "gamma",
                format!("{} must be finite and >= 0", self.gamma),
            ));
        }
        match self.boundary {
            Boundary::Infinite => {}
            Boundary::Open(n) => {
                if n < 2 {
                    return Err(Error::validation("boundary", format!("open lattice needs N >= 2, got {n}")));
                }
            }
            Boundary::Periodic(n) => {
                if n < 2 || n % 2 != 0 {
                    return Err(Error::validation(
                        "boundary",
                        format!("periodic lattice needs even N >= 2, got {n}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Single-site-to-site operator `L(γ) C(θ)`.
    pub fn local_operator(&self) -> Mat2 {
        mat2_mul(&loss_factors(self.gamma), &coin_matrix(self.theta))
    }
}

/// Localized initial state `|x0> ⊗ (aH |H> + bV |V>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub position: i64,
    pub a_h: Complex64,
    pub b_v: Complex64,
}

impl InitialState {
    pub fn new(position: i64, a_h: Complex64, b_v: Complex64) -> Result<Self> {
        let norm = a_h.norm_sqr() + b_v.norm_sqr();
        if (norm - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::validation(
                "initial state",
                format!("|aH|^2 + |bV|^2 = {norm}, expected 1"),
            ));
        }
        Ok(InitialState { position, a_h, b_v })
    }

    pub fn horizontal(position: i64) -> Self {
        InitialState {
            position,
            a_h: Complex64::new(1.0, 0.0),
            b_v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn vertical(position: i64) -> Self {
        InitialState {
            position,
            a_h: Complex64::new(0.0, 0.0),
            b_v: Complex64::new(1.0, 0.0),
        }
    }

    /// `(|H> + i|V>)/√2`.
    pub fn circular(position: i64) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        InitialState {
            position,
            a_h: Complex64::new(r, 0.0),
            b_v: Complex64::new(0.0, r),
        }
    }

    /// True when both coefficients are real up to a common global phase.
    pub fn has_real_amplitudes(&self) -> bool {
        let cross = self.a_h * self.b_v.conj();
        cross.im.abs() <= ALGEBRAIC_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    /// Lattice index of `amps[0]`.
    pub offset: i64,
    pub amps: Vec<Amplitude>,
    pub t: usize,
    /// Sum of `ln ||ψ||` over steps, for the norms discarded by per-step normalization.
    pub norm_log: f64,
}

impl WalkState {
    pub fn from_amplitudes(offset: i64, amps: Vec<Amplitude>) -> Self {
        WalkState {
            offset,
            amps,
            t: 0,
            norm_log: 0.0,
        }
    }

    /// Embeds `init` in the storage layout that `boundary` expects.
    pub fn initial(init: &InitialState, boundary: Boundary) -> Result<Self> {
        let zero = Complex64::new(0.0, 0.0);
        match boundary.sites() {
            None => Ok(Self::from_amplitudes(init.position, vec![[init.a_h, init.b_v]])),
            Some(n) => {
                if init.position < 0 || init.position as usize >= n {
                    return Err(Error::validation(
                        "initial position",
                        format!("{} is outside the lattice 0..{}", init.position, n),
                    ));
                }
                let mut amps = vec![[zero, zero]; n];
                amps[init.position as usize] = [init.a_h, init.b_v];
                Ok(Self::from_amplitudes(0, amps))
            }
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.amps.len()).map(move |i| self.offset + i as i64)
    }

    pub fn amplitude_at(&self, x: i64) -> Amplitude {
        let i = x - self.offset;
        if i < 0 || i as usize >= self.amps.len() {
            [Complex64::new(0.0, 0.0); 2]
        } else {
            self.amps[i as usize]
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|[a, b]| a.norm_sqr() + b.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZATION_TOL
    }

    pub fn scale(&mut self, factor: Complex64) {
        for pair in &mut self.amps {
            pair[H] *= factor;
            pair[V] *= factor;
        }
    }
}

/// `C(θ) = [[cos θ, sin θ], [sin θ, -cos θ]]`.
pub fn coin_matrix(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, s], [s, -c]]
}

/// `L(γ) = diag(1, e^{-γ})`. Negative `gamma` (gain) is rejected.
pub fn loss_matrix(gamma: f64) -> Result<Mat2> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::validation("gamma", format!("{gamma} must be finite and >= 0")));
    }
    Ok(loss_factors(gamma))
}

fn loss_factors(gamma: f64) -> Mat2 {
    [[1.0, 0.0], [0.0, (-gamma).exp()]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[inline]
fn apply_local(m: &Mat2, [a, b]: Amplitude) -> Amplitude {
    [a * m[0][0] + b * m[0][1], a * m[1][0] + b * m[1][1]]
}

/// One application of `U`, followed by optional renormalization.
pub fn step(state: &WalkState, params: &WalkParams) -> Result<WalkState> {
    let local = params.local_operator();
    let zero = Complex64::new(0.0, 0.0);
    let mut next = match params.boundary {
        Boundary::Infinite => {
            let n = state.amps.len();
            let mut amps = vec![[zero, zero]; n + 2];
            for (i, &pair) in state.amps.iter().enumerate() {
                let [h, v] = apply_local(&local, pair);
                amps[i + 2][H] = h;
                amps[i][V] = v;
            }
            WalkState {
                offset: state.offset - 1,
                amps,
                t: state.t,
                norm_log: state.norm_log,
            }
        }
        Boundary::Periodic(n) => {
            check_len(state, n)?;
            let mut amps = vec![[zero, zero]; n];
            for (i, &pair) in state.amps.iter().enumerate() {
                let [h, v] = apply_local(&local, pair);
                amps[(i + 1) % n][H] = h;
                amps[(i + n - 1) % n][V] = v;
            }
            WalkState { amps, ..state.clone() }
        }
        Boundary::Open(n) => {
            check_len(state, n)?;
            let mut amps = vec![[zero, zero]; n];
            for (i, &pair) in state.amps.iter().enumerate() {
                let [h, v] = apply_local(&local, pair);
                if i + 1 < n {
                    amps[i + 1][H] = h;
                } else if h != zero {
                    return Err(Error::OpenEdge {
                        site: state.offset + i as i64,
                        step: state.t + 1,
                    });
                }
                if i > 0 {
                    amps[i - 1][V] = v;
                } else if v != zero {
                    return Err(Error::OpenEdge {
                        site: state.offset,
                        step: state.t + 1,
                    });
                }
            }
            WalkState { amps, ..state.clone() }
        }
    };
    next.t = state.t + 1;
    if params.normalize_each_step {
        let norm = next.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain(format!("state norm {norm} cannot be normalized")));
        }
        next.scale(Complex64::new(1.0 / norm, 0.0));
        next.norm_log += norm.ln();
    }
    Ok(next)
}

fn check_len(state: &WalkState, n: usize) -> Result<()> {
    if state.amps.len() != n || state.offset != 0 {
        return Err(Error::validation(
            "state",
            format!(
                "expected {n} sites at offset 0, found {} at offset {}",
                state.amps.len(),
                state.offset
            ),
        ));
    }
    Ok(())
}

/// `U^t` applied to the embedded initial state.
pub fn evolve(init: &InitialState, params: &WalkParams, t: usize) -> Result<WalkState> {
    params.validate()?;
    let state = WalkState::initial(init, params.boundary)?;
    evolve_state(state, params, t)
}

pub fn evolve_state(mut state: WalkState, params: &WalkParams, t: usize) -> Result<WalkState> {
    for _ in 0..t {
        state = step(&state, params)?;
    }
    Ok(state)
}

/// Evolves and hands every intermediate state (including `t = 0`) to `visit`.
pub fn evolve_with<F>(init: &InitialState, params: &WalkParams, t: usize, mut visit: F) -> Result<WalkState>
where
    F: FnMut(&WalkState) -> Result<()>,
{
    params.validate()?;
    let mut state = WalkState::initial(init, params.boundary)?;
    visit(&state)?;
    for _ in 0..t {
        state = step(&state, params)?;
        visit(&state)?;
    }
    Ok(state)
}

/// Polarization-resolved distribution: position → `(P_H, P_V)`.
///
/// For σx measurements the two slots hold `(P_+, P_-)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolarizedDistribution(pub BTreeMap<i64, (f64, f64)>);

impl PolarizedDistribution {
    pub fn get(&self, x: i64) -> (f64, f64) {
        self.0.get(&x).copied().unwrap_or((0.0, 0.0))
    }

    pub fn total(&self) -> f64 {
        self.0.values().map(|(h, v)| h + v).sum()
    }

    /// `P(x) = P_H(x) + P_V(x)` in position order.
    pub fn site_probabilities(&self) -> Vec<(i64, f64)> {
        self.0.iter().map(|(&x, &(h, v))| (x, h + v)).collect()
    }

    /// Position of the largest `P_H + P_V`; the leftmost wins ties.
    pub fn argmax_total(&self) -> Option<i64> {
        let mut best: Option<(i64, f64)> = None;
        for (x, p) in self.site_probabilities() {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((x, p));
            }
        }
        best.map(|(x, _)| x)
    }
}

pub fn probability_distribution(state: &WalkState) -> PolarizedDistribution {
    PolarizedDistribution(
        state
            .positions()
            .zip(&state.amps)
            .map(|(x, [a, b])| (x, (a.norm_sqr(), b.norm_sqr())))
            .collect(),
    )
}
