//! Unit conversions at the API boundary.
//!
//! Public interfaces quote ordinary frequencies in MHz (the ν in ν = ω/2π)
//! and times in μs. All internal dynamics use angular frequencies in
//! rad/μs, so ω[rad/μs] = 2π · ν[MHz] and phases are ω·t in radians.

use std::f64::consts::TAU;

/// Ordinary frequency in MHz to angular frequency in rad/μs.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz
}

/// Angular frequency in rad/μs to ordinary frequency in MHz.
pub fn angular_to_mhz(ang: f64) -> f64 {
    ang / TAU
}

/// Reduce a phase to [0, 2π). Idempotent in floating point, which the
/// waveform file round-trip relies on.
pub fn wrap_phase(xi: f64) -> f64 {
    let w = xi.rem_euclid(TAU);
    // rem_euclid can return TAU itself when xi is a tiny negative number.
    if w == TAU {
        0.0
    } else {
        w
    }
}
