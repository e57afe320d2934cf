//! Simulation toolkit for one-dimensional non-Hermitian discrete-time quantum
//! walks with a polarization-dependent loss.
//!
//! The walk operator is `U = S [I ⊗ L(γ) C(θ)]`: a real reflection coin,
//! an attenuation `e^{-γ}` of the V component, then a polarization-conditioned
//! shift (H to `x+1`, V to `x-1`).
//!
//! * [`walk`]: state vectors and time evolution.
//! * [`spectral`]: PBC/OBC quasienergy spectra and skin-effect diagnostics.
//! * [`eigen`]: dense complex eigensolver used by the OBC spectra.
//! * [`observables`]: coin entropy, IPR, growth-rate profiles, fidelity.
//! * [`virtual_lab`]: Monte-Carlo photon counting and density-matrix
//!   reconstruction.

pub mod constants;
pub mod eigen;
mod error;
pub mod observables;
pub mod spectral;
pub mod virtual_lab;
pub mod walk;

pub use error::{Error, Result};
pub use num_complex::Complex64;
