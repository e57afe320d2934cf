//! Numerical tolerances shared across the crate.

/// Tolerance for exact algebraic identities (norm preservation, operator
/// equivalences, reconstruction on noiseless input).
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Relative residual bound for iterative solvers.
pub const ITERATIVE_TOL: f64 = 1e-8;

/// Tolerance used when checking that a state or distribution is normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Amplitudes below this magnitude are treated as exactly zero in growth-rate
/// profiles and reported as `-inf`.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;

/// Minimum distance between a reference energy and the PBC curve for a
/// winding number to be reported.
pub const WINDING_MIN_DISTANCE: f64 = 1e-6;

/// Slack allowed when clamping reconstructed density matrices to PSD.
pub const PSD_CLAMP_TOL: f64 = 1e-9;
