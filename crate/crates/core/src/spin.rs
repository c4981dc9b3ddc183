//! Spin operators and the Zeeman spin Hamiltonian.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::gtensor::GTensor;
use crate::units::BOHR_MAGNETON_CM1_PER_T;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("spin quantum number must be a nonnegative half-integer, got {0}")]
    InvalidSpin(f64),
}

/// Zeeman field vector h with components h_α in cm⁻¹, one per spin operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector(pub Vector3<f64>);

/// A single spin with its g-tensor and an applied magnetic field.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    /// Spin quantum number (1/2, 1, 3/2, ...).
    pub s: f64,
    pub g: GTensor,
    /// Applied field in Tesla.
    pub b_field: Vector3<f64>,
}

impl SpinSystem {
    pub fn new(s: f64, g: GTensor, b_field: Vector3<f64>) -> Result<Self, SpinError> {
        validate_spin(s)?;
        Ok(Self { s, g, b_field })
    }

    /// Hilbert-space dimension 2s + 1.
    pub fn dim(&self) -> usize {
        (2.0 * self.s).round() as usize + 1
    }

    pub fn field_vector(&self) -> FieldVector {
        field_vector(&self.g, self.b_field)
    }
}

fn validate_spin(s: f64) -> Result<(), SpinError> {
    let two_s = 2.0 * s;
    if s < 0.0 || two_s.fract() != 0.0 || !two_s.is_finite() {
        return Err(SpinError::InvalidSpin(s));
    }
    Ok(())
}

/// Spin operators (S_x, S_y, S_z) for spin quantum number `s`, as dense
/// complex matrices of dimension (2s+1) in the |s, m⟩ basis with m
/// descending from +s to −s.
///
/// Built from the ladder operators: S_± |s,m⟩ = √(s(s+1) − m(m±1)) |s,m±1⟩.
pub fn spin_operators(s: f64) -> Result<[DMatrix<Complex64>; 3], SpinError> {
    validate_spin(s)?;
    let dim = (2.0 * s).round() as usize + 1;
    let m_of = |i: usize| s - i as f64; // row i holds m = s − i

    let mut s_plus = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 1..dim {
        let m = m_of(i);
        let amp = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
        s_plus[(i - 1, i)] = Complex64::new(amp, 0.0);
    }
    let s_minus = s_plus.adjoint();

    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    let sx = (&s_plus + &s_minus) * half;
    let sy = (&s_minus - &s_plus) * half_i;
    let mut sz = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        sz[(i, i)] = Complex64::new(m_of(i), 0.0);
    }
    Ok([sx, sy, sz])
}

/// Zeeman field vector h_α = (μ_B/hc) Σ_j g_αj B_j, in cm⁻¹.
pub fn field_vector(g: &GTensor, b_field: Vector3<f64>) -> FieldVector {
    FieldVector(g.matrix() * b_field * BOHR_MAGNETON_CM1_PER_T)
}

/// Spin Hamiltonian H_s = Σ_α h_α S_α in cm⁻¹.
pub fn spin_hamiltonian(sys: &SpinSystem) -> Result<DMatrix<Complex64>, SpinError> {
    let h = sys.field_vector().0;
    let ops = spin_operators(sys.s)?;
    let dim = sys.dim();
    let mut hs = DMatrix::<Complex64>::zeros(dim, dim);
    for (alpha, op) in ops.iter().enumerate() {
        hs += op * Complex64::new(h[alpha], 0.0);
    }
    Ok(hs)
}
