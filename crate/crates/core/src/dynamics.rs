//! Bloch-Redfield dynamics: tensor construction in the spin eigenbasis,
//! density-matrix propagation, T1/T2 extraction, temperature/field scans,
//! and a numerically exact unitary oracle for validation.
//!
//! Rate convention: the bath spectrum S(ω) entering the tensor is the full
//! Fourier transform of the bath correlation function in cm⁻¹ units, so a
//! population transfer rate is |⟨b|A|a⟩|² · S(ω_ab) · 2πc in 1/s, with
//! ω_ab = E_a − E_b in cm⁻¹. Downward transitions sample S at positive
//! frequency (stimulated + spontaneous emission); upward at negative.
//! Lamb-shift imaginary parts are omitted.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{
    spectral_density_effective, spectral_density_full, BathError, DensityOptions,
    EffectiveMethod, Flavor, GridSpec, SpectralDensity,
};
use crate::embed::{embed_dataset, Embedding, EmbedError};
use crate::ingest::{CouplingMatrix, Dataset, ModeSet};
use crate::linalg::sorted_hermitian_eigen;
use crate::ode::{integrate_linear, OdeError, OdeOptions};
use crate::spin::{spin_operators, SpinError, SpinSystem};
use crate::units::{thermal_energy_cm1, ANGULAR_FREQ_PER_CM1};

const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Largest modulus over the entries of a complex matrix.
fn max_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("spin spectrum is degenerate (smallest gap {gap_cm1:.3e} cm^-1); the one-phonon process needs a finite splitting")]
    DegenerateSpectrum { gap_cm1: f64 },
    #[error("{0}")]
    InvalidState(String),
    #[error("{what} invariant violated: {value:.3e}")]
    InvariantViolation { what: String, value: f64 },
    #[error("oscillator truncation insufficient at this temperature; at least {suggested:?} levels needed")]
    Truncation { suggested: Vec<usize> },
    #[error("{ops} coupling operators but spectrum provides {channels} channels")]
    ChannelMismatch { ops: usize, channels: usize },
}

/// Frequency-resolved bath spectrum S_αβ(ω) in cm⁻¹, queried at transition
/// frequencies by the Redfield builder.
pub trait BathSpectrum {
    fn n_channels(&self) -> usize;
    /// S_ab(ω); a == b are the diagonal channels.
    fn value(&self, a: usize, b: usize, omega_cm1: f64) -> Result<f64, BathError>;
}

impl BathSpectrum for SpectralDensity {
    fn n_channels(&self) -> usize {
        self.n_channels()
    }

    fn value(&self, a: usize, b: usize, omega_cm1: f64) -> Result<f64, BathError> {
        SpectralDensity::value(self, a, b, omega_cm1)
    }
}

/// Analytic bath spectrum from a closure; handy for model baths with known
/// closed forms.
pub struct ClosureSpectrum<F: Fn(usize, usize, f64) -> f64> {
    n_channels: usize,
    f: F,
}

impl<F: Fn(usize, usize, f64) -> f64> ClosureSpectrum<F> {
    pub fn new(n_channels: usize, f: F) -> Self {
        Self { n_channels, f }
    }
}

impl<F: Fn(usize, usize, f64) -> f64> BathSpectrum for ClosureSpectrum<F> {
    fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn value(&self, a: usize, b: usize, omega_cm1: f64) -> Result<f64, BathError> {
        Ok((self.f)(a, b, omega_cm1))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RedfieldOptions {
    /// Drop tensor elements whose coherence frequencies mismatch.
    pub secular: bool,
    /// Mismatch cutoff in rad/s; `None` uses 10 × the largest population
    /// relaxation rate.
    pub secular_cutoff_rad_s: Option<f64>,
    /// Include cross-channel densities S_αβ (α ≠ β).
    pub cross_correlations: bool,
}

impl Default for RedfieldOptions {
    fn default() -> Self {
        Self {
            secular: true,
            secular_cutoff_rad_s: None,
            cross_correlations: false,
        }
    }
}

/// A spin system weakly coupled to harmonic baths through Hermitian
/// coupling operators with associated spectral densities.
pub struct RedfieldModel<B> {
    /// System Hamiltonian, cm⁻¹.
    pub hamiltonian_cm1: DMatrix<Complex64>,
    /// Hermitian coupling operators, one per bath channel.
    pub couplings: Vec<DMatrix<Complex64>>,
    pub spectrum: B,
    pub options: RedfieldOptions,
}

impl<B: BathSpectrum> RedfieldModel<B> {
    pub fn new(
        hamiltonian_cm1: DMatrix<Complex64>,
        couplings: Vec<DMatrix<Complex64>>,
        spectrum: B,
        options: RedfieldOptions,
    ) -> Result<Self, DynamicsError> {
        if couplings.len() > spectrum.n_channels() {
            return Err(DynamicsError::ChannelMismatch {
                ops: couplings.len(),
                channels: spectrum.n_channels(),
            });
        }
        for (i, op) in couplings.iter().enumerate() {
            let defect = max_norm(&(op - op.adjoint()));
            if defect > 1e-12 * max_norm(op).max(f64::MIN_POSITIVE) {
                return Err(DynamicsError::InvalidState(format!(
                    "coupling operator {i} is not Hermitian (defect {defect:.3e})"
                )));
            }
        }
        Ok(Self {
            hamiltonian_cm1,
            couplings,
            spectrum,
            options,
        })
    }

    /// Standard model for a spin system: H from the Zeeman interaction and
    /// one bath channel per spin operator S_x, S_y, S_z.
    pub fn for_spin_system(
        sys: &SpinSystem,
        spectrum: B,
        options: RedfieldOptions,
    ) -> Result<Self, DynamicsError> {
        let h = crate::spin::spin_hamiltonian(sys)?;
        let ops = spin_operators(sys.s)?;
        Self::new(h, ops.to_vec(), spectrum, options)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian_cm1.nrows()
    }
}

/// Redfield generator in the eigenbasis of the system Hamiltonian.
#[derive(Debug)]
pub struct RedfieldTensor {
    pub dim: usize,
    /// Eigenvalues ascending, cm⁻¹.
    pub energies_cm1: DVector<f64>,
    /// Eigenvector columns (original basis → eigenbasis transform U).
    pub eigenvectors: DMatrix<Complex64>,
    /// Full generator L = −i[H, ·] + R in the eigenbasis, 1/s, acting on
    /// row-major vectorized ρ (index a·dim + b).
    pub generator: DMatrix<Complex64>,
    /// Dissipative part R only (interaction-picture envelope generator).
    pub dissipator: DMatrix<Complex64>,
    /// Population rate block W[a][b] = Re R_{aa,bb} (1/s): off-diagonal
    /// entries are b → a transfer rates, columns sum to zero.
    pub population_rates: DMatrix<f64>,
    /// Cutoff actually applied, rad/s.
    pub secular_cutoff_rad_s: f64,
}

impl RedfieldTensor {
    #[inline]
    fn idx(&self, a: usize, b: usize) -> usize {
        a * self.dim + b
    }

    /// Transform a density matrix from the original basis to the eigenbasis.
    pub fn to_eigenbasis(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.eigenvectors.adjoint() * rho * &self.eigenvectors
    }

    /// Transform a density matrix from the eigenbasis to the original basis.
    pub fn from_eigenbasis(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.eigenvectors * rho * self.eigenvectors.adjoint()
    }

    /// Stationary populations (null vector of the population block),
    /// normalized to unit sum.
    pub fn stationary_populations(&self) -> DVector<f64> {
        // Smallest-Rayleigh-quotient eigenvector of WᵀW; W is tiny
        // (dim ≤ ~10). Quotients are computed per column rather than
        // trusting the backend's eigenvalue pairing.
        let w = &self.population_rates;
        let gram = w.transpose() * w;
        let eig = gram.clone().symmetric_eigen();
        let quotient = |i: usize| {
            let v = eig.eigenvectors.column(i);
            (v.transpose() * &gram * v)[(0, 0)]
        };
        let mut best = 0;
        let mut best_q = quotient(0);
        for i in 1..eig.eigenvalues.len() {
            let q = quotient(i);
            if q < best_q {
                best = i;
                best_q = q;
            }
        }
        let mut v = eig.eigenvectors.column(best).clone_owned();
        if v.sum() < 0.0 {
            v = -v;
        }
        &v / v.sum()
    }
}

/// Build the Bloch-Redfield generator for `model`.
pub fn redfield_tensor<B: BathSpectrum>(
    model: &RedfieldModel<B>,
) -> Result<RedfieldTensor, DynamicsError> {
    let d = model.dim();
    let (energies, u) = sorted_hermitian_eigen(&model.hamiltonian_cm1);

    // Coupling operators in the eigenbasis.
    let ops: Vec<DMatrix<Complex64>> = model
        .couplings
        .iter()
        .map(|s| u.adjoint() * s * &u)
        .collect();
    let n_ops = ops.len();

    // Channel pairs to include.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for alpha in 0..n_ops {
        for beta in 0..n_ops {
            if alpha == beta || model.options.cross_correlations {
                pairs.push((alpha, beta));
            }
        }
    }

    // γ_αβ(ω_xy) · 2πc for every level pair (x, y), per channel pair.
    let mut gamma: Vec<DMatrix<f64>> = Vec::with_capacity(pairs.len());
    for &(alpha, beta) in &pairs {
        let mut g = DMatrix::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                let omega = energies[x] - energies[y];
                g[(x, y)] =
                    model.spectrum.value(alpha, beta, omega)? * ANGULAR_FREQ_PER_CM1;
            }
        }
        gamma.push(g);
    }

    // Dissipative tensor R_{ab,cd}.
    let n2 = d * d;
    let mut diss = DMatrix::<Complex64>::zeros(n2, n2);
    for (pair_idx, &(alpha, beta)) in pairs.iter().enumerate() {
        let a_op = &ops[alpha];
        let b_op = &ops[beta];
        let g = &gamma[pair_idx];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mut term = Complex64::new(0.0, 0.0);
                        term += b_op[(a, c)] * a_op[(dd, b)] * g[(c, a)];
                        term += a_op[(a, c)] * b_op[(dd, b)] * g[(dd, b)];
                        if b == dd {
                            let mut s = Complex64::new(0.0, 0.0);
                            for n in 0..d {
                                s += a_op[(a, n)] * b_op[(n, c)] * g[(c, n)];
                            }
                            term -= s;
                        }
                        if a == c {
                            let mut s = Complex64::new(0.0, 0.0);
                            for n in 0..d {
                                s += b_op[(dd, n)] * a_op[(n, b)] * g[(dd, n)];
                            }
                            term -= s;
                        }
                        diss[(a * d + b, c * d + dd)] += term * 0.5;
                    }
                }
            }
        }
    }

    // Population rate block before any filtering (its elements are always
    // frequency-matched and define the auto cutoff).
    let mut population_rates = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            population_rates[(a, b)] = diss[(a * d + a, b * d + b)].re;
        }
    }
    let max_rate = (0..d)
        .flat_map(|a| (0..d).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b)
        .map(|(a, b)| population_rates[(a, b)].abs())
        .fold(0.0, f64::max);
    let cutoff = model
        .options
        .secular_cutoff_rad_s
        .unwrap_or(10.0 * max_rate);

    if model.options.secular {
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mismatch = ((energies[a] - energies[b])
                            - (energies[c] - energies[dd]))
                            .abs()
                            * ANGULAR_FREQ_PER_CM1;
                        if mismatch > cutoff {
                            diss[(a * d + b, c * d + dd)] = Complex64::new(0.0, 0.0);
                        }
                    }
                }
            }
        }
    }

    // Full generator: unitary part plus dissipator.
    let mut generator = diss.clone();
    for a in 0..d {
        for b in 0..d {
            let omega = (energies[a] - energies[b]) * ANGULAR_FREQ_PER_CM1;
            generator[(a * d + b, a * d + b)] += Complex64::new(0.0, -omega);
        }
    }

    Ok(RedfieldTensor {
        dim: d,
        energies_cm1: energies,
        eigenvectors: u,
        generator,
        dissipator: diss,
        population_rates,
        secular_cutoff_rad_s: cutoff,
    })
}

/// Propagated density-matrix trajectory in the original basis.
pub struct Trajectory {
    pub times_ps: Vec<f64>,
    pub states: Vec<DMatrix<Complex64>>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

impl Trajectory {
    /// Re ⟨op⟩(t).
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Vec<f64> {
        self.states
            .iter()
            .map(|rho| (op * rho).trace().re)
            .collect()
    }
}

fn check_state(rho: &DMatrix<Complex64>) -> Result<(), DynamicsError> {
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
        return Err(DynamicsError::InvalidState(format!(
            "initial state trace {trace} != 1"
        )));
    }
    let herm = max_norm(&(rho - rho.adjoint()));
    if herm > 1e-10 {
        return Err(DynamicsError::InvalidState(format!(
            "initial state not Hermitian (defect {herm:.3e})"
        )));
    }
    let min_eig = rho.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-9 {
        return Err(DynamicsError::InvalidState(format!(
            "initial state not positive semidefinite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

fn propagate_with(
    tensor: &RedfieldTensor,
    generator: &DMatrix<Complex64>,
    rho0: &DMatrix<Complex64>,
    t_grid_ps: &[f64],
) -> Result<Trajectory, DynamicsError> {
    let d = tensor.dim;
    check_state(rho0)?;
    let rho_eig = tensor.to_eigenbasis(rho0);
    let mut y0 = DVector::zeros(d * d);
    for a in 0..d {
        for b in 0..d {
            y0[tensor.idx(a, b)] = rho_eig[(a, b)];
        }
    }
    let t_grid_s: Vec<f64> = t_grid_ps.iter().map(|t| t * 1e-12).collect();
    let states_vec = integrate_linear(generator, y0, &t_grid_s, &OdeOptions::default())?;

    let mut states = Vec::with_capacity(states_vec.len());
    let mut max_trace_error = 0.0f64;
    let mut max_herm_error = 0.0f64;
    for y in &states_vec {
        let mut rho = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                rho[(a, b)] = y[tensor.idx(a, b)];
            }
        }
        let rho = tensor.from_eigenbasis(&rho);
        let trace_err = (rho.trace() - C1).norm();
        let herm_err = max_norm(&(&rho - rho.adjoint()));
        max_trace_error = max_trace_error.max(trace_err);
        max_herm_error = max_herm_error.max(herm_err);
        if trace_err > 1e-9 {
            return Err(DynamicsError::InvariantViolation {
                what: "trace(ρ) = 1".into(),
                value: trace_err,
            });
        }
        if herm_err > 1e-10 {
            return Err(DynamicsError::InvariantViolation {
                what: "ρ = ρ†".into(),
                value: herm_err,
            });
        }
        states.push(rho);
    }
    Ok(Trajectory {
        times_ps: t_grid_ps.to_vec(),
        states,
        max_trace_error,
        max_hermiticity_error: max_herm_error,
    })
}

/// Propagate ρ under the full generator (unitary + dissipative), with
/// adaptive integration at relative tolerance 1e-10. Trace and Hermiticity
/// are checked at every output, never renormalized.
pub fn propagate<B: BathSpectrum>(
    model: &RedfieldModel<B>,
    rho0: &DMatrix<Complex64>,
    t_grid_ps: &[f64],
) -> Result<Trajectory, DynamicsError> {
    let tensor = redfield_tensor(model)?;
    propagate_with(&tensor, &tensor.generator, rho0, t_grid_ps)
}

/// Propagate the interaction-picture envelope (dissipative part only).
/// With the secular approximation this gives the exact populations and
/// coherence magnitudes without resolving Larmor oscillations, so long
/// relaxation windows stay integrable.
pub fn propagate_envelope(
    tensor: &RedfieldTensor,
    rho0: &DMatrix<Complex64>,
    t_grid_ps: &[f64],
) -> Result<Trajectory, DynamicsError> {
    propagate_with(tensor, &tensor.dissipator, rho0, t_grid_ps)
}

/// Relaxation rates extracted from the generator blocks.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub t1_s: f64,
    pub t2_s: f64,
    /// Slowest nonzero population-block eigenvalue (1/s, ≤ 0).
    pub lambda_pop_per_s: f64,
    /// Re of the (0,1) coherence eigenvalue (1/s, ≤ 0).
    pub lambda_coh_per_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateWarning {
    /// Population decay is visibly multi-exponential; both candidate rates
    /// in 1/s.
    MultiExponential { fast_per_s: f64, slow_per_s: f64 },
}

#[derive(Debug, Clone)]
pub struct RateExtraction {
    pub rates: Rates,
    pub warnings: Vec<RateWarning>,
}

/// Extract T1/T2 from the generator eigenvalues: T1 from the slowest
/// nonzero eigenvalue of the population block, T2 from the (0,1) coherence
/// element. A population block with several well-separated decay rates
/// yields a multi-exponential warning carrying the extreme rates.
pub fn extract_rates_from(tensor: &RedfieldTensor) -> Result<RateExtraction, DynamicsError> {
    let d = tensor.dim;
    let w = &tensor.population_rates;
    // Rate scale for the zero-eigenvalue threshold.
    let scale = w.abs().max().max(f64::MIN_POSITIVE);
    let eigs = w.clone().complex_eigenvalues();
    let mut decaying: Vec<f64> = eigs
        .iter()
        .map(|z| z.re)
        .filter(|&re| re < -1e-12 * scale)
        .collect();
    decaying.sort_by(f64::total_cmp);

    let mut warnings = Vec::new();
    let lambda_pop = match decaying.last() {
        Some(&slowest) => {
            if let Some(&fastest) = decaying.first() {
                if decaying.len() > 1 && fastest / slowest > 1.01 {
                    warnings.push(RateWarning::MultiExponential {
                        fast_per_s: -fastest,
                        slow_per_s: -slowest,
                    });
                }
            }
            slowest
        }
        None => 0.0,
    };
    let t1_s = if lambda_pop < 0.0 {
        -1.0 / lambda_pop
    } else {
        f64::INFINITY
    };

    let lambda_coh = if d >= 2 {
        tensor.generator[(tensor.idx(0, 1), tensor.idx(0, 1))].re
    } else {
        0.0
    };
    let t2_s = if lambda_coh < 0.0 {
        -1.0 / lambda_coh
    } else {
        f64::INFINITY
    };

    Ok(RateExtraction {
        rates: Rates {
            t1_s,
            t2_s,
            lambda_pop_per_s: lambda_pop,
            lambda_coh_per_s: lambda_coh,
        },
        warnings,
    })
}

/// Build the tensor for `model` and extract rates.
pub fn extract_rates<B: BathSpectrum>(
    model: &RedfieldModel<B>,
) -> Result<RateExtraction, DynamicsError> {
    let tensor = redfield_tensor(model)?;
    extract_rates_from(&tensor)
}

/// Least-squares single-exponential fit of y(t) → y_eq; returns
/// (rate 1/s, relative RMS residual).
pub fn fit_exponential_decay(
    times_s: &[f64],
    values: &[f64],
    equilibrium: f64,
) -> Option<(f64, f64)> {
    let dev: Vec<f64> = values.iter().map(|v| v - equilibrium).collect();
    let scale = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale <= 0.0 {
        return None;
    }
    let pts: Vec<(f64, f64)> = times_s
        .iter()
        .zip(&dev)
        .filter(|(_, &z)| z.abs() > 1e-8 * scale)
        .map(|(&t, &z)| (t, z.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y));
    let (stt, sty): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t * t, b + t * y));
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    // Residual in linear space, relative to the initial deviation.
    let mut rss = 0.0;
    for (&t, &z) in times_s.iter().zip(&dev) {
        let fit = (intercept + slope * t).exp() * z.signum();
        rss += (z - fit).powi(2);
    }
    let residual = (rss / times_s.len() as f64).sqrt() / scale;
    Some((-slope, residual))
}

/// Trajectory-fit cross-check of the eigenvalue rates.
#[derive(Debug, Clone)]
pub struct FitRates {
    pub t1_s: f64,
    pub t2_s: f64,
    pub t1_residual: f64,
    pub t2_residual: f64,
    pub warnings: Vec<RateWarning>,
}

/// Fit T1 from the excited-population decay and T2 from the (0,1) coherence
/// envelope, using the interaction-picture envelope propagation.
pub fn fit_rates<B: BathSpectrum>(model: &RedfieldModel<B>) -> Result<FitRates, DynamicsError> {
    let tensor = redfield_tensor(model)?;
    let eigen = extract_rates_from(&tensor)?.rates;
    if !eigen.t1_s.is_finite() && !eigen.t2_s.is_finite() {
        return Err(DynamicsError::InvalidState(
            "no finite relaxation rate to fit".into(),
        ));
    }
    let d = tensor.dim;
    let window_s = [eigen.t1_s, eigen.t2_s]
        .into_iter()
        .filter(|t| t.is_finite())
        .fold(f64::INFINITY, f64::min)
        * 3.0;
    let t_grid_ps: Vec<f64> = (0..80).map(|i| window_s * 1e12 * i as f64 / 79.0).collect();

    // T1: start in the highest eigenstate.
    let mut rho_exc = DMatrix::zeros(d, d);
    rho_exc[(d - 1, d - 1)] = C1;
    let rho0 = tensor.from_eigenbasis(&rho_exc);
    let traj = propagate_envelope(&tensor, &rho0, &t_grid_ps)?;
    let pops: Vec<f64> = traj
        .states
        .iter()
        .map(|rho| tensor.to_eigenbasis(rho)[(d - 1, d - 1)].re)
        .collect();
    let p_eq = tensor.stationary_populations()[d - 1];
    let times_s: Vec<f64> = t_grid_ps.iter().map(|t| t * 1e-12).collect();
    let (rate_t1, res_t1) =
        fit_exponential_decay(&times_s, &pops, p_eq).ok_or_else(|| {
            DynamicsError::InvalidState("population trajectory too flat to fit".into())
        })?;

    let mut warnings = Vec::new();
    if res_t1 > 0.01 {
        // Two-window fit for the candidate rates.
        let half = times_s.len() / 2;
        let early = fit_exponential_decay(&times_s[..half], &pops[..half], p_eq);
        let late = fit_exponential_decay(&times_s[half..], &pops[half..], p_eq);
        if let (Some((fast, _)), Some((slow, _))) = (early, late) {
            warnings.push(RateWarning::MultiExponential {
                fast_per_s: fast.max(slow),
                slow_per_s: fast.min(slow),
            });
        }
    }

    // T2: coherent superposition of the two lowest eigenstates; the
    // coherence magnitude is the ⟨S_x⟩ precession envelope.
    let mut rho_coh = DMatrix::zeros(d, d);
    let half = Complex64::new(0.5, 0.0);
    rho_coh[(0, 0)] = half;
    rho_coh[(0, 1)] = half;
    rho_coh[(1, 0)] = half;
    rho_coh[(1, 1)] = half;
    let rho0 = tensor.from_eigenbasis(&rho_coh);
    let traj = propagate_envelope(&tensor, &rho0, &t_grid_ps)?;
    let cohs: Vec<f64> = traj
        .states
        .iter()
        .map(|rho| tensor.to_eigenbasis(rho)[(0, 1)].norm())
        .collect();
    let (rate_t2, res_t2) = fit_exponential_decay(&times_s, &cohs, 0.0).ok_or_else(|| {
        DynamicsError::InvalidState("coherence trajectory too flat to fit".into())
    })?;

    Ok(FitRates {
        t1_s: 1.0 / rate_t1,
        t2_s: 1.0 / rate_t2,
        t1_residual: res_t1,
        t2_residual: res_t2,
        warnings,
    })
}

/// Which spectral density enters a relaxation calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSource {
    /// All phonon modes (Eq.-level full bath).
    Full,
    /// Embedded model, exact effective density.
    Projected,
    /// Keep only modes with coupling above a fraction of the maximum.
    NaiveCutoff,
}

impl std::fmt::Display for ModeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeSource::Full => write!(f, "full"),
            ModeSource::Projected => write!(f, "projected"),
            ModeSource::NaiveCutoff => write!(f, "naive-cutoff"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub spin: f64,
    pub flavor: Flavor,
    pub source: ModeSource,
    /// Naive-cutoff retention fraction of the maximum coupling strength.
    pub cutoff_frac: f64,
    pub broadening_cm1: f64,
    pub sv_threshold: f64,
    pub grid: GridSpec,
    pub redfield: RedfieldOptions,
    /// Smallest acceptable Zeeman gap, cm⁻¹.
    pub min_splitting_cm1: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            spin: 0.5,
            flavor: Flavor::Quantum,
            source: ModeSource::Full,
            cutoff_frac: 0.35,
            broadening_cm1: 16.0,
            sv_threshold: crate::embed::DEFAULT_SV_THRESHOLD,
            grid: GridSpec::default(),
            redfield: RedfieldOptions::default(),
            min_splitting_cm1: 1e-6,
        }
    }
}

/// One relaxation scan row.
#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub temperature_k: f64,
    pub field_t: f64,
    pub t1_s: f64,
    pub t2_s: f64,
    pub source: ModeSource,
    pub flavor: Flavor,
    pub warnings: Vec<RateWarning>,
}

/// Restrict a star bath to modes with coupling strength ≥ frac · max.
fn naive_cutoff_bath(
    gc: &CouplingMatrix,
    modes: &ModeSet,
    frac: f64,
) -> (CouplingMatrix, ModeSet) {
    let threshold = frac * gc.max_mode_strength();
    let keep: Vec<usize> = (0..gc.n_modes())
        .filter(|&k| gc.mode_strength(k) >= threshold)
        .collect();
    let mut m = DMatrix::zeros(gc.0.nrows(), keep.len());
    let mut freqs = Vec::with_capacity(keep.len());
    for (col, &k) in keep.iter().enumerate() {
        m.set_column(col, &gc.0.column(k));
        freqs.push(modes.freqs_cm1[k]);
    }
    (CouplingMatrix(m), ModeSet::from_frequencies(freqs))
}

/// Build the spectral density for one scan point.
pub fn scan_density(
    dataset: &Dataset,
    b_field_tesla: Vector3<f64>,
    temperature_k: f64,
    options: &ScanOptions,
) -> Result<SpectralDensity, DynamicsError> {
    let gc = dataset.coupling_matrix_at(b_field_tesla);
    // Pin the grid half-span from the original modes so full and projected
    // densities share the identical grid.
    let grid = GridSpec {
        omega_max_cm1: Some(
            options
                .grid
                .omega_max_cm1
                .unwrap_or(1.25 * dataset.modes.max_freq()),
        ),
        n_points: options.grid.n_points,
    };
    let density_options = DensityOptions {
        grid,
        with_cross: options.redfield.cross_correlations,
    };
    let density = match options.source {
        ModeSource::Full => spectral_density_full(
            &gc,
            &dataset.modes,
            temperature_k,
            options.broadening_cm1,
            options.flavor,
            &density_options,
        )?,
        ModeSource::Projected => {
            let emb = embed_dataset(&gc, &dataset.modes, options.sv_threshold)?;
            spectral_density_effective(
                &emb,
                temperature_k,
                options.broadening_cm1,
                options.flavor,
                EffectiveMethod::Exact,
                &density_options,
            )?
        }
        ModeSource::NaiveCutoff => {
            let (sub_gc, sub_modes) = naive_cutoff_bath(&gc, &dataset.modes, options.cutoff_frac);
            spectral_density_full(
                &sub_gc,
                &sub_modes,
                temperature_k,
                options.broadening_cm1,
                options.flavor,
                &density_options,
            )?
        }
    };
    Ok(density)
}

/// Relaxation rates at one (temperature, field) point.
pub fn relax_point(
    dataset: &Dataset,
    temperature_k: f64,
    field_t: f64,
    options: &ScanOptions,
) -> Result<RelaxationResult, DynamicsError> {
    let dir = field_direction(dataset);
    let b_vec = dir * field_t;
    let sys = SpinSystem::new(options.spin, dataset.g_tensor.clone(), b_vec)?;

    // Reject degenerate spectra: the direct process needs a finite gap.
    let h = crate::spin::spin_hamiltonian(&sys)?;
    let (energies, _) = sorted_hermitian_eigen(&h);
    let mut min_gap = f64::INFINITY;
    for i in 1..energies.len() {
        min_gap = min_gap.min(energies[i] - energies[i - 1]);
    }
    if min_gap < options.min_splitting_cm1 {
        return Err(DynamicsError::DegenerateSpectrum { gap_cm1: min_gap });
    }

    let density = scan_density(dataset, b_vec, temperature_k, options)?;
    let model = RedfieldModel::for_spin_system(&sys, density, options.redfield)?;
    let extraction = extract_rates(&model)?;
    Ok(RelaxationResult {
        temperature_k,
        field_t,
        t1_s: extraction.rates.t1_s,
        t2_s: extraction.rates.t2_s,
        source: options.source,
        flavor: options.flavor,
        warnings: extraction.warnings,
    })
}

/// Unit vector along the dataset's stored field, or +z when unset.
pub fn field_direction(dataset: &Dataset) -> Vector3<f64> {
    let b = dataset.b_field_tesla;
    let norm = b.norm();
    if norm > 0.0 {
        b / norm
    } else {
        Vector3::new(0.0, 0.0, 1.0)
    }
}

/// Scan T1/T2 over temperatures and field magnitudes (applied along the
/// dataset's field direction). Points run in parallel; rows are ordered by
/// (T, B) regardless of worker count.
pub fn relax_scan(
    dataset: &Dataset,
    temps_k: &[f64],
    fields_t: &[f64],
    options: &ScanOptions,
) -> Result<Vec<RelaxationResult>, DynamicsError> {
    let mut temps = temps_k.to_vec();
    temps.sort_by(f64::total_cmp);
    let mut fields = fields_t.to_vec();
    fields.sort_by(f64::total_cmp);
    let points: Vec<(f64, f64)> = temps
        .iter()
        .flat_map(|&t| fields.iter().map(move |&b| (t, b)))
        .collect();
    points
        .into_par_iter()
        .map(|(t, b)| relax_point(dataset, t, b, options))
        .collect()
}

// --- exact unitary oracle -----------------------------------------------------

/// Spin plus a few primary harmonic modes, truncated for exact propagation.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    /// Zeeman field components h_α, cm⁻¹.
    pub field_cm1: Vector3<f64>,
    pub spin: f64,
    /// Primary mode frequencies, cm⁻¹.
    pub primary_freqs_cm1: Vec<f64>,
    /// g̃_αr, cm⁻¹ (3 × r).
    pub primary_couplings: DMatrix<f64>,
    /// Oscillator levels kept per mode (≥ 2).
    pub truncation: Vec<usize>,
}

impl ReducedHamiltonian {
    pub fn new(
        field_cm1: Vector3<f64>,
        spin: f64,
        primary_freqs_cm1: Vec<f64>,
        primary_couplings: DMatrix<f64>,
        truncation: Vec<usize>,
    ) -> Result<Self, DynamicsError> {
        if truncation.len() != primary_freqs_cm1.len()
            || primary_couplings.ncols() != primary_freqs_cm1.len()
        {
            return Err(DynamicsError::InvalidState(
                "inconsistent primary-mode dimensions".into(),
            ));
        }
        if truncation.iter().any(|&l| l < 2) {
            return Err(DynamicsError::InvalidState(
                "oscillator truncation must keep at least 2 levels".into(),
            ));
        }
        Ok(Self {
            field_cm1,
            spin,
            primary_freqs_cm1,
            primary_couplings,
            truncation,
        })
    }

    /// Reduced model of an embedding under a given Zeeman field.
    pub fn from_embedding(
        emb: &Embedding,
        field_cm1: Vector3<f64>,
        spin: f64,
        levels: usize,
    ) -> Result<Self, DynamicsError> {
        Self::new(
            field_cm1,
            spin,
            emb.primary_freqs_cm1.iter().cloned().collect(),
            emb.primary_couplings.clone(),
            vec![levels; emb.rank()],
        )
    }
}

/// Spin expectation values from exact unitary evolution.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    pub times_ps: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Oscillator levels needed so the highest kept level is occupied below
/// 1e-6 at `temperature_k`.
pub fn suggested_levels(freq_cm1: f64, temperature_k: f64) -> usize {
    if temperature_k <= 0.0 {
        return 2;
    }
    let x = freq_cm1 / thermal_energy_cm1(temperature_k);
    let needed = (((1.0 - (-x).exp()) / 1e-6).ln() / x).ceil() as usize + 1;
    needed.max(2)
}

/// Exact unitary evolution of spin ⊗ truncated primary oscillators from a
/// factorized initial state ρ_spin ⊗ ρ_thermal, where the oscillator state
/// enumerates number states with Boltzmann weights.
///
/// Validates Redfield rates at weak coupling; limited to r ≤ 3 modes.
pub fn exact_oracle(
    red: &ReducedHamiltonian,
    temperature_k: f64,
    t_grid_ps: &[f64],
    rho_spin: &DMatrix<Complex64>,
) -> Result<OracleTrajectory, DynamicsError> {
    let r = red.primary_freqs_cm1.len();
    if r > 3 {
        return Err(DynamicsError::InvalidState(format!(
            "exact oracle supports at most 3 primary modes, got {r}"
        )));
    }

    // Truncation adequacy: highest kept level must be negligibly occupied.
    let mut suggested = Vec::with_capacity(r);
    let mut insufficient = false;
    for (idx, &freq) in red.primary_freqs_cm1.iter().enumerate() {
        let levels = red.truncation[idx];
        if temperature_k == 0.0 {
            suggested.push(levels);
            continue;
        }
        let x = freq / thermal_energy_cm1(temperature_k);
        let top = (-((levels - 1) as f64) * x).exp() * (1.0 - (-x).exp());
        suggested.push(suggested_levels(freq, temperature_k));
        if top >= 1e-6 {
            insufficient = true;
        }
    }
    if insufficient {
        return Err(DynamicsError::Truncation { suggested });
    }

    let spin_ops = spin_operators(red.spin)?;
    let spin_dim = spin_ops[0].nrows();
    let osc_dim: usize = red.truncation.iter().product();
    let dim = spin_dim * osc_dim;
    if dim > 4096 {
        return Err(DynamicsError::InvalidState(format!(
            "oracle Hilbert space of dimension {dim} is too large; reduce the \
             temperature, the truncation, or the number of primary modes"
        )));
    }

    // Per-mode ladder operators and thermal states.
    let mut mode_position = Vec::with_capacity(r);
    let mut mode_number = Vec::with_capacity(r);
    let mut mode_thermal = Vec::with_capacity(r);
    for (idx, &levels) in red.truncation.iter().enumerate() {
        let mut a = DMatrix::<Complex64>::zeros(levels, levels);
        for n in 1..levels {
            a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        let q = (&a + a.adjoint()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut nhat = DMatrix::<Complex64>::zeros(levels, levels);
        for n in 0..levels {
            nhat[(n, n)] = Complex64::new(n as f64, 0.0);
        }
        let mut th = DMatrix::<Complex64>::zeros(levels, levels);
        if temperature_k == 0.0 {
            th[(0, 0)] = C1;
        } else {
            let x = red.primary_freqs_cm1[idx] / thermal_energy_cm1(temperature_k);
            let mut z = 0.0;
            for n in 0..levels {
                let p = (-(n as f64) * x).exp();
                th[(n, n)] = Complex64::new(p, 0.0);
                z += p;
            }
            th /= Complex64::new(z, 0.0);
        }
        mode_position.push(q);
        mode_number.push(nhat);
        mode_thermal.push(th);
    }

    // Embed an operator acting on one factor into the full product space.
    let embed_osc = |mode: usize, op: &DMatrix<Complex64>| -> DMatrix<Complex64> {
        let mut out = DMatrix::<Complex64>::identity(1, 1);
        for m in 0..r {
            let factor = if m == mode {
                op.clone()
            } else {
                DMatrix::identity(red.truncation[m], red.truncation[m])
            };
            out = kron(&out, &factor);
        }
        out
    };

    let id_spin = DMatrix::<Complex64>::identity(spin_dim, spin_dim);
    let id_osc = DMatrix::<Complex64>::identity(osc_dim, osc_dim);

    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (alpha, s_op) in spin_ops.iter().enumerate() {
        h += kron(s_op, &id_osc) * Complex64::new(red.field_cm1[alpha], 0.0);
    }
    for (m, number) in mode_number.iter().enumerate() {
        let number_full = embed_osc(m, number);
        let half = DMatrix::identity(osc_dim, osc_dim) * Complex64::new(0.5, 0.0);
        h += kron(&id_spin, &(number_full + half))
            * Complex64::new(red.primary_freqs_cm1[m], 0.0);
    }
    for (m, position) in mode_position.iter().enumerate() {
        let q_full = embed_osc(m, position);
        for (alpha, s_op) in spin_ops.iter().enumerate() {
            let g = red.primary_couplings[(alpha, m)];
            if g != 0.0 {
                h += kron(s_op, &q_full) * Complex64::new(g, 0.0);
            }
        }
    }

    // Initial state ρ_spin ⊗ ρ_th.
    let mut rho_osc = DMatrix::<Complex64>::identity(1, 1);
    for th in &mode_thermal {
        rho_osc = kron(&rho_osc, th);
    }
    let rho0 = kron(rho_spin, &rho_osc);

    // Exact evolution in the eigenbasis of H.
    let (vals, vecs) = sorted_hermitian_eigen(&h);
    let rho_eig = vecs.adjoint() * rho0 * &vecs;
    let obs: Vec<DMatrix<Complex64>> = spin_ops
        .iter()
        .map(|s| vecs.adjoint() * kron(s, &id_osc) * &vecs)
        .collect();

    // ⟨O⟩(t) = Σ_mn Õ_nm ρ̃0_mn e^{−i ω_mn t}; keep only significant terms.
    struct Term {
        omega_rad_s: f64,
        amp: Complex64,
    }
    let mut terms: Vec<Vec<Term>> = Vec::with_capacity(3);
    for o in &obs {
        let mut list = Vec::new();
        let mut scale = 0.0f64;
        for m in 0..dim {
            for n in 0..dim {
                scale = scale.max((o[(n, m)] * rho_eig[(m, n)]).norm());
            }
        }
        for m in 0..dim {
            for n in 0..dim {
                let amp = o[(n, m)] * rho_eig[(m, n)];
                if amp.norm() > 1e-16 * scale {
                    list.push(Term {
                        omega_rad_s: (vals[m] - vals[n]) * ANGULAR_FREQ_PER_CM1,
                        amp,
                    });
                }
            }
        }
        terms.push(list);
    }

    let eval = |list: &[Term], t_s: f64| -> f64 {
        list.iter()
            .map(|term| (term.amp * Complex64::new(0.0, -term.omega_rad_s * t_s).exp()).re)
            .sum()
    };

    let mut sx = Vec::with_capacity(t_grid_ps.len());
    let mut sy = Vec::with_capacity(t_grid_ps.len());
    let mut sz = Vec::with_capacity(t_grid_ps.len());
    for &t_ps in t_grid_ps {
        let t_s = t_ps * 1e-12;
        sx.push(eval(&terms[0], t_s));
        sy.push(eval(&terms[1], t_s));
        sz.push(eval(&terms[2], t_s));
    }
    Ok(OracleTrajectory {
        times_ps: t_grid_ps.to_vec(),
        sx,
        sy,
        sz,
    })
}
