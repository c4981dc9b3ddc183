//! Thermal occupations and bath spectral densities.
//!
//! The spectral density of a harmonic bath coupled through dimensionless
//! mode displacements is
//!
//! S_αβ(ω) = π Σ_k g_αk g_βk [ w⁺_k 𝒩(ω − ω_k) + w⁻_k 𝒩(ω + ω_k) ]
//!
//! with 𝒩 a normalized Gaussian of standard deviation Δω replacing the
//! delta functions, and thermal weights (w⁺, w⁻) = (n+1, n) for the quantum
//! flavor or (n_cl, n_cl) with n_cl = k_BT/ħω for the classical flavor.
//! S is the full Fourier transform of the bath correlation function, so
//! relaxation rates are |matrix element|² · S(ω_transition) · 2πc.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, Embedding};
use crate::ingest::{CouplingMatrix, ModeSet};
use crate::units::thermal_energy_cm1;

#[derive(Debug, Error)]
pub enum BathError {
    #[error("broadening must be positive, got {0} cm^-1")]
    InvalidBroadening(f64),
    #[error("Bose occupation requires omega > 0, got {0} cm^-1")]
    InvalidFrequency(f64),
    #[error("temperature must be nonnegative, got {0} K")]
    InvalidTemperature(f64),
    #[error("frequency {omega_cm1} cm^-1 outside sampled grid [{min_cm1}, {max_cm1}]")]
    OutOfRange {
        omega_cm1: f64,
        min_cm1: f64,
        max_cm1: f64,
    },
    #[error("coupling matrix has {found} mode columns, mode set has {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("cross-channel density requested but not computed")]
    MissingCross,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Quantum (Bose-Einstein) or classical (equipartition) thermal weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Quantum,
    Classical,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Flavor::Quantum => write!(f, "quantum"),
            Flavor::Classical => write!(f, "classical"),
        }
    }
}

/// Construction method for the embedded-model spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectiveMethod {
    /// Re-diagonalize the assembled Hessian and transform the couplings:
    /// exactly reproduces the full-bath density.
    Exact,
    /// Lorentzian peaks at the primary frequencies with golden-rule widths
    /// against the residual bath.
    Lorentzian,
}

/// Bose-Einstein occupation n(ω) = 1/(e^{ħω/k_BT} − 1).
pub fn bose_occupation(omega_cm1: f64, temperature_k: f64) -> Result<f64, BathError> {
    if omega_cm1 <= 0.0 || omega_cm1.is_nan() {
        return Err(BathError::InvalidFrequency(omega_cm1));
    }
    if temperature_k < 0.0 {
        return Err(BathError::InvalidTemperature(temperature_k));
    }
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    let x = omega_cm1 / thermal_energy_cm1(temperature_k);
    Ok(1.0 / x.exp_m1())
}

/// Classical (equipartition) occupation k_BT/ħω.
pub fn classical_occupation(omega_cm1: f64, temperature_k: f64) -> Result<f64, BathError> {
    if omega_cm1 <= 0.0 || omega_cm1.is_nan() {
        return Err(BathError::InvalidFrequency(omega_cm1));
    }
    if temperature_k < 0.0 {
        return Err(BathError::InvalidTemperature(temperature_k));
    }
    Ok(thermal_energy_cm1(temperature_k) / omega_cm1)
}

/// Uniform symmetric frequency grid specification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-span of the grid in cm⁻¹; `None` sizes it to 1.25 × the largest
    /// mode frequency.
    pub omega_max_cm1: Option<f64>,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            omega_max_cm1: None,
            n_points: 8192,
        }
    }
}

impl GridSpec {
    fn resolve(&self, max_mode_freq: f64) -> (f64, f64) {
        let half_span = self.omega_max_cm1.unwrap_or(1.25 * max_mode_freq);
        let step = 2.0 * half_span / (self.n_points - 1) as f64;
        (half_span, step)
    }
}

/// Sampled bath spectral density on a uniform symmetric grid.
///
/// Grid points are ω_i = step · (i − (n−1)/2), exactly mirror-symmetric
/// about zero. Diagonal channels S_αα are always present; cross channels
/// S_αβ (α < β) are optional.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    step_cm1: f64,
    n_points: usize,
    n_channels: usize,
    /// n_channels × n_points.
    diagonal: DMatrix<f64>,
    /// Cross channels, row per pair (0,1), (0,2), ..., (1,2), ...
    cross: Option<DMatrix<f64>>,
    pub flavor: Flavor,
    pub broadening_cm1: f64,
    pub temperature_k: f64,
}

impl SpectralDensity {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn has_cross(&self) -> bool {
        self.cross.is_some()
    }

    #[inline]
    pub fn omega_at(&self, i: usize) -> f64 {
        self.step_cm1 * (i as f64 - (self.n_points as f64 - 1.0) / 2.0)
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_at(0)
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_at(self.n_points - 1)
    }

    pub fn grid(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_points, (0..self.n_points).map(|i| self.omega_at(i)))
    }

    /// Sampled value of the diagonal channel α at grid index i.
    pub fn sample(&self, alpha: usize, i: usize) -> f64 {
        self.diagonal[(alpha, i)]
    }

    fn pair_row(&self, a: usize, b: usize) -> usize {
        // Row index of pair (a,b), a < b, in lexicographic order.
        let n = self.n_channels;
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    /// Linear interpolation of S_ab at `omega_cm1`; a == b is the diagonal
    /// channel, a ≠ b requires cross channels.
    pub fn value(&self, a: usize, b: usize, omega_cm1: f64) -> Result<f64, BathError> {
        let lo = self.omega_min();
        let hi = self.omega_max();
        if !(omega_cm1 >= lo && omega_cm1 <= hi) {
            return Err(BathError::OutOfRange {
                omega_cm1,
                min_cm1: lo,
                max_cm1: hi,
            });
        }
        let pos = (omega_cm1 - lo) / self.step_cm1;
        let idx = (pos.floor() as usize).min(self.n_points - 2);
        let frac = pos - idx as f64;
        let row: Box<dyn Fn(usize) -> f64> = if a == b {
            Box::new(|i| self.diagonal[(a, i)])
        } else {
            let cross = self.cross.as_ref().ok_or(BathError::MissingCross)?;
            let r = self.pair_row(a.min(b), a.max(b));
            Box::new(move |i| cross[(r, i)])
        };
        Ok(row(idx) * (1.0 - frac) + row(idx + 1) * frac)
    }

    /// Trapezoid integral of diagonal channel α over the whole grid.
    pub fn integrated_weight(&self, alpha: usize) -> f64 {
        self.integrated_weight_range(alpha, self.omega_min(), self.omega_max())
    }

    /// Trapezoid integral of diagonal channel α over grid points inside
    /// [lo, hi].
    pub fn integrated_weight_range(&self, alpha: usize, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_points - 1 {
            let (w0, w1) = (self.omega_at(i), self.omega_at(i + 1));
            if w0 >= lo && w1 <= hi {
                acc += 0.5 * (self.diagonal[(alpha, i)] + self.diagonal[(alpha, i + 1)])
                    * (w1 - w0);
            }
        }
        acc
    }

    /// Max |S_αα| over the grid.
    pub fn max_abs(&self, alpha: usize) -> f64 {
        self.diagonal
            .row(alpha)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

fn thermal_weights(
    freq_cm1: f64,
    temperature_k: f64,
    flavor: Flavor,
) -> Result<(f64, f64), BathError> {
    match flavor {
        Flavor::Quantum => {
            let n = bose_occupation(freq_cm1, temperature_k)?;
            Ok((n + 1.0, n))
        }
        Flavor::Classical => {
            let n_cl = classical_occupation(freq_cm1, temperature_k)?;
            Ok((n_cl, n_cl))
        }
    }
}

/// Normalized Gaussian density with standard deviation `sigma`.
#[inline]
fn gaussian(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// Normalized Lorentzian density with half-width `gamma`.
#[inline]
fn lorentzian(x: f64, gamma: f64) -> f64 {
    gamma / (std::f64::consts::PI * (x * x + gamma * gamma))
}

struct Accumulator {
    density: SpectralDensity,
}

impl Accumulator {
    fn new(
        n_channels: usize,
        max_freq: f64,
        temperature_k: f64,
        broadening_cm1: f64,
        flavor: Flavor,
        grid: &GridSpec,
        with_cross: bool,
    ) -> Result<Self, BathError> {
        if broadening_cm1 <= 0.0 || broadening_cm1.is_nan() {
            return Err(BathError::InvalidBroadening(broadening_cm1));
        }
        if temperature_k < 0.0 {
            return Err(BathError::InvalidTemperature(temperature_k));
        }
        let (_, step) = grid.resolve(max_freq);
        let n_pairs = n_channels * (n_channels - 1) / 2;
        Ok(Self {
            density: SpectralDensity {
                step_cm1: step,
                n_points: grid.n_points,
                n_channels,
                diagonal: DMatrix::zeros(n_channels, grid.n_points),
                cross: with_cross.then(|| DMatrix::zeros(n_pairs, grid.n_points)),
                flavor,
                broadening_cm1,
                temperature_k,
            },
        })
    }

    /// Add one mode's contribution with peak profiles `profile(ω ∓ ω_k)`.
    fn add_mode(
        &mut self,
        couplings: &[f64],
        freq_cm1: f64,
        profile: impl Fn(f64) -> f64,
    ) -> Result<(), BathError> {
        let (w_plus, w_minus) =
            thermal_weights(freq_cm1, self.density.temperature_k, self.density.flavor)?;
        let n = self.density.n_points;
        let n_ch = self.density.n_channels;
        let mut shape = vec![0.0; n];
        for (i, s) in shape.iter_mut().enumerate() {
            let omega = self.density.omega_at(i);
            *s = w_plus * profile(omega - freq_cm1) + w_minus * profile(omega + freq_cm1);
        }
        for (a, &coupling) in couplings.iter().enumerate() {
            let ca = std::f64::consts::PI * coupling * coupling;
            if ca == 0.0 {
                continue;
            }
            for (i, &s) in shape.iter().enumerate() {
                self.density.diagonal[(a, i)] += ca * s;
            }
        }
        if let Some(cross) = self.density.cross.as_mut() {
            let mut row = 0;
            for a in 0..n_ch {
                for b in a + 1..n_ch {
                    let c = std::f64::consts::PI * couplings[a] * couplings[b];
                    if c != 0.0 {
                        for i in 0..n {
                            cross[(row, i)] += c * shape[i];
                        }
                    }
                    row += 1;
                }
            }
        }
        Ok(())
    }
}

/// Options for spectral density construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct DensityOptions {
    pub grid: GridSpec,
    /// Also accumulate cross channels S_αβ.
    pub with_cross: bool,
}

/// Full-bath spectral density from the coupling matrix and mode set.
pub fn spectral_density_full(
    gc: &CouplingMatrix,
    modes: &ModeSet,
    temperature_k: f64,
    broadening_cm1: f64,
    flavor: Flavor,
    options: &DensityOptions,
) -> Result<SpectralDensity, BathError> {
    if gc.0.ncols() != modes.len() {
        return Err(BathError::DimensionMismatch {
            found: gc.0.ncols(),
            expected: modes.len(),
        });
    }
    density_from_star(
        &gc.0,
        &modes.freqs_cm1,
        temperature_k,
        broadening_cm1,
        flavor,
        options,
        modes.max_freq(),
    )
}

fn density_from_star(
    couplings: &DMatrix<f64>,
    freqs: &DVector<f64>,
    temperature_k: f64,
    broadening_cm1: f64,
    flavor: Flavor,
    options: &DensityOptions,
    grid_max_freq: f64,
) -> Result<SpectralDensity, BathError> {
    let n_channels = couplings.nrows();
    let mut acc = Accumulator::new(
        n_channels,
        grid_max_freq,
        temperature_k,
        broadening_cm1,
        flavor,
        &options.grid,
        options.with_cross,
    )?;
    let col: Vec<f64> = vec![0.0; n_channels];
    let mut col = col;
    for k in 0..freqs.len() {
        for a in 0..n_channels {
            col[a] = couplings[(a, k)];
        }
        let sigma = broadening_cm1;
        acc.add_mode(&col, freqs[k], |x| gaussian(x, sigma))?;
    }
    Ok(acc.density)
}

/// Spectral density of the embedded model.
///
/// `Exact` re-diagonalizes the assembled Hessian, which reproduces the
/// full-bath density to numerical precision. `Lorentzian` places a peak at
/// each primary frequency with half-width
/// Γ_r = π Σ_j γ²_rj/(2 ω_r ω_j) 𝒩(ω_r − ω_j; Δω), the golden-rule decay
/// width of primary mode r against the residual bath; with γ = 0 the peak
/// falls back to the Δω Gaussian.
pub fn spectral_density_effective(
    emb: &Embedding,
    temperature_k: f64,
    broadening_cm1: f64,
    flavor: Flavor,
    method: EffectiveMethod,
    options: &DensityOptions,
) -> Result<SpectralDensity, BathError> {
    // Grid sized from the original spectrum for grid-compatibility with the
    // full-bath density.
    let grid_max_freq = emb
        .primary_freqs_cm1
        .iter()
        .chain(emb.residual_freqs_cm1.iter())
        .cloned()
        .fold(0.0, f64::max);

    match method {
        EffectiveMethod::Exact => {
            let (freqs, couplings) = emb.effective_modes()?;
            density_from_star(
                &couplings,
                &freqs,
                temperature_k,
                broadening_cm1,
                flavor,
                options,
                grid_max_freq,
            )
        }
        EffectiveMethod::Lorentzian => {
            let n_channels = emb.primary_couplings.nrows();
            let mut acc = Accumulator::new(
                n_channels,
                grid_max_freq,
                temperature_k,
                broadening_cm1,
                flavor,
                &options.grid,
                options.with_cross,
            )?;
            let mut col = vec![0.0; n_channels];
            for r in 0..emb.rank() {
                let omega_r = emb.primary_freqs_cm1[r];
                let mut width = 0.0;
                for j in 0..emb.residual_freqs_cm1.len() {
                    let omega_j = emb.residual_freqs_cm1[j];
                    let g2 = emb.bridge_couplings[(r, j)].powi(2);
                    width += std::f64::consts::PI * g2 / (2.0 * omega_r * omega_j)
                        * gaussian(omega_r - omega_j, broadening_cm1);
                }
                for (a, slot) in col.iter_mut().enumerate() {
                    *slot = emb.primary_couplings[(a, r)];
                }
                if width > f64::EPSILON {
                    acc.add_mode(&col, omega_r, |x| lorentzian(x, width))?;
                } else {
                    let sigma = broadening_cm1;
                    acc.add_mode(&col, omega_r, |x| gaussian(x, sigma))?;
                }
            }
            Ok(acc.density)
        }
    }
}
