//! Physical constants (CODATA exact or recommended values, SI units).

use std::f64::consts::PI;

/// Magnetic flux quantum h/2e (Wb).
pub const PHI0: f64 = 2.067_833_848e-15;
/// Reduced flux quantum Φ₀/2π (Wb).
pub const PHI0_REDUCED: f64 = PHI0 / (2.0 * PI);
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
