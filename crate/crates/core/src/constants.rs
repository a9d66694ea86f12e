//! Physical constants (SI, CODATA 2018).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Electron volt, J.
pub const EV: f64 = 1.602_176_634e-19;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Mass of 87Rb, kg.
pub const M_RB87: f64 = 86.909_180_53 * AMU;
