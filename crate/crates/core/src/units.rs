//! Unit system and physical constants.
//!
//! All public quantities in this crate use a single convention:
//!
//! | quantity        | unit                                   |
//! |-----------------|----------------------------------------|
//! | energy          | wavenumber, cm⁻¹ (E / hc)              |
//! | frequency       | cm⁻¹ (angular frequency / 2πc)         |
//! | temperature     | Kelvin                                 |
//! | magnetic field  | Tesla                                  |
//! | time            | seconds (trajectories report ps)       |
//! | mass            | amu                                    |
//! | length          | Ångström                               |
//!
//! Derived constants are computed from the 2018 CODATA SI values below, so
//! every ratio is consistent to full f64 precision.

use std::f64::consts::PI;

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK_J_S: f64 = 6.62607015e-34;

/// Speed of light, cm/s (exact).
pub const SPEED_OF_LIGHT_CM_S: f64 = 2.99792458e10;

/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN_J_K: f64 = 1.380649e-23;

/// Bohr magneton, J/T (CODATA 2018: 9.274 010 0783(28) × 10⁻²⁴).
pub const BOHR_MAGNETON_J_T: f64 = 9.2740100783e-24;

/// Atomic mass unit, kg (CODATA 2018: 1.660 539 066 60(50) × 10⁻²⁷).
pub const AMU_KG: f64 = 1.66053906660e-27;

/// Reduced Planck constant, J·s.
pub const HBAR_J_S: f64 = PLANCK_J_S / (2.0 * PI);

/// μ_B/(hc): Zeeman energy per Tesla in cm⁻¹ (≈ 0.46686447783 cm⁻¹/T).
pub const BOHR_MAGNETON_CM1_PER_T: f64 =
    BOHR_MAGNETON_J_T / (PLANCK_J_S * SPEED_OF_LIGHT_CM_S);

/// k_B/(hc): thermal energy per Kelvin in cm⁻¹ (≈ 0.69503480049 cm⁻¹/K).
pub const BOLTZMANN_CM1_PER_K: f64 =
    BOLTZMANN_J_K / (PLANCK_J_S * SPEED_OF_LIGHT_CM_S);

/// Angular frequency per wavenumber: 2πc, rad·s⁻¹ per cm⁻¹.
///
/// Multiplying an energy in cm⁻¹ by this constant yields the corresponding
/// angular frequency in rad/s (ħ = 1 dynamics convention).
pub const ANGULAR_FREQ_PER_CM1: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_S;

/// ħ expressed in amu·Å²/s, used for normal-coordinate scaling.
pub const HBAR_AMU_A2_PER_S: f64 = HBAR_J_S / (AMU_KG * 1.0e-20);

/// Thermal energy k_B·T in cm⁻¹.
#[inline]
pub fn thermal_energy_cm1(temperature_k: f64) -> f64 {
    BOLTZMANN_CM1_PER_K * temperature_k
}

/// Harmonic-oscillator length √(ħ/ω) for a mode of wavenumber `freq_cm1`,
/// in √(amu)·Å.
///
/// Defines the dimensionless normal coordinate q = x/√(ħ/ω) of a
/// mass-weighted coordinate x; gradients per dimensionless displacement are
/// gradients per mass-weighted displacement times this factor.
#[inline]
pub fn oscillator_length(freq_cm1: f64) -> f64 {
    (HBAR_AMU_A2_PER_S / (ANGULAR_FREQ_PER_CM1 * freq_cm1)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_match_codata_listings() {
        // CODATA 2018 tabulates these ratios directly.
        assert_relative_eq!(BOHR_MAGNETON_CM1_PER_T, 0.46686447783, max_relative = 1e-9);
        assert_relative_eq!(BOLTZMANN_CM1_PER_K, 0.6950348004, max_relative = 1e-9);
        assert_relative_eq!(ANGULAR_FREQ_PER_CM1, 1.8836515673e11, max_relative = 1e-9);
    }

    #[test]
    fn oscillator_length_magnitude() {
        // √(ħ/ω) at 100 cm⁻¹ is about 0.58 √(amu)·Å.
        assert_relative_eq!(oscillator_length(100.0), 0.5806484167, max_relative = 1e-8);
    }
}
