//! Physical constants (CODATA 2018) and the scaled unit system.
//!
//! Crystal equilibria and Hessians are computed in a dimensionless system:
//! lengths in units of `l = (k_C / (m omega_xy^2))^(1/3)` with
//! `k_C = q^2 / (4 pi eps0)`, frequencies in units of `omega_xy`, energies in
//! units of `m omega_xy^2 l^2`. In these units the trap energy per ion is
//! `(x^2 + y^2)/2 + a^2 z^2 / 2` with `a = omega_z/omega_xy`, and each Coulomb
//! pair contributes `1/r`. The two-ion equilibrium separation is exactly
//! `2^(1/3)` scaled lengths.
//!
//! Everything crossing a public API boundary is SI: meters, seconds, kilograms,
//! joules, newtons, kelvin, and angular frequencies in rad/s. Configuration
//! files use ordinary frequencies (`*_hz` keys) which are multiplied by 2 pi at
//! the boundary.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant, J/K.
pub const KB: f64 = 1.380_649e-23;
/// Elementary charge, C.
pub const QE: f64 = 1.602_176_634e-19;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of 9Be+ in amu, the default ion species.
pub const BE9_AMU: f64 = 9.012_183_1;
/// 2 pi, for Hz -> rad/s conversions.
pub const TWO_PI: f64 = std::f64::consts::TAU;
