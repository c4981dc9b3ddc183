//! Dataset ingestion: file parsing, finite-difference g-tensor gradients,
//! Cartesian-to-normal-mode projection, coupling-matrix assembly, and
//! per-mode participation norms.
//!
//! The on-disk interchange format is a versioned JSON document. Schema
//! `spd-1` carries per-mode gradients directly; `spd-cart-1` carries raw
//! displaced g-tensors per Cartesian coordinate together with the normal-mode
//! vectors and atomic masses, from which the per-mode gradients are derived
//! on load. Either way the in-memory [`Dataset`] is fully normalized.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gtensor::GTensor;
use crate::units::{oscillator_length, BOHR_MAGNETON_CM1_PER_T};

/// Row-orthonormality defect above which mode vectors are rejected.
pub const MODE_ORTHO_FAIL: f64 = 1e-3;
/// Row-orthonormality defect above which a warning is logged.
pub const MODE_ORTHO_WARN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error in {path}: {source}")]
    Schema {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown dataset schema {found:?} (expected {expected})")]
    UnknownSchema { found: String, expected: String },
    #[error("mode {index} has frequency {freq_cm1} cm^-1 below the floor {floor_cm1} cm^-1")]
    FrequencyBelowFloor {
        index: usize,
        freq_cm1: f64,
        floor_cm1: f64,
    },
    #[error("{count_grads} gradient tensors for {count_modes} modes")]
    GradientCountMismatch {
        count_grads: usize,
        count_modes: usize,
    },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("{what} length {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        found: usize,
        expected: usize,
    },
    #[error("mode vectors are not row-orthonormal: defect {defect:.3e} exceeds {limit:.1e}")]
    ModeVectorsNotOrthonormal { defect: f64, limit: f64 },
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("operation requires {0}")]
    MissingData(&'static str),
}

/// Phonon modes: frequencies and, optionally, mass-weighted Cartesian
/// displacement vectors plus atomic masses.
#[derive(Debug, Clone)]
pub struct ModeSet {
    /// ω_k in cm⁻¹, length n_q.
    pub freqs_cm1: DVector<f64>,
    /// n_q × 3N mass-weighted displacement vectors (rows orthonormal).
    pub mode_vectors: Option<DMatrix<f64>>,
    /// Atomic masses in amu, length N.
    pub masses_amu: Option<Vec<f64>>,
}

impl ModeSet {
    pub fn from_frequencies(freqs_cm1: Vec<f64>) -> Self {
        Self {
            freqs_cm1: DVector::from_vec(freqs_cm1),
            mode_vectors: None,
            masses_amu: None,
        }
    }

    pub fn len(&self) -> usize {
        self.freqs_cm1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_cm1.is_empty()
    }

    /// Largest mode frequency, cm⁻¹.
    pub fn max_freq(&self) -> f64 {
        self.freqs_cm1.iter().cloned().fold(0.0, f64::max)
    }

    /// diag(ω_k²) in cm⁻².
    pub fn hessian_diagonal(&self) -> DVector<f64> {
        self.freqs_cm1.map(|w| w * w)
    }

    pub fn validate(&self, freq_floor_cm1: f64) -> Result<(), IngestError> {
        for (index, &freq_cm1) in self.freqs_cm1.iter().enumerate() {
            if !freq_cm1.is_finite() {
                return Err(IngestError::NonFinite {
                    what: format!("frequency of mode {index}"),
                });
            }
            if freq_cm1 < freq_floor_cm1 {
                return Err(IngestError::FrequencyBelowFloor {
                    index,
                    freq_cm1,
                    floor_cm1: freq_floor_cm1,
                });
            }
        }
        if let Some(vectors) = &self.mode_vectors {
            if vectors.nrows() != self.len() {
                return Err(IngestError::DimensionMismatch {
                    what: "mode_vectors rows".into(),
                    found: vectors.nrows(),
                    expected: self.len(),
                });
            }
            let gram = vectors * vectors.transpose();
            let defect = (gram - DMatrix::identity(self.len(), self.len()))
                .abs()
                .max();
            if defect > MODE_ORTHO_FAIL {
                return Err(IngestError::ModeVectorsNotOrthonormal {
                    defect,
                    limit: MODE_ORTHO_FAIL,
                });
            }
            if defect > MODE_ORTHO_WARN {
                log::warn!("mode vectors orthonormality defect {defect:.3e}");
            }
        }
        Ok(())
    }
}

/// Per-mode g-tensor gradients ∂g/∂q_k (dimensionless per unit dimensionless
/// normal-mode displacement).
#[derive(Debug, Clone)]
pub struct GGradientSet {
    pub tensors: Vec<Matrix3<f64>>,
}

impl GGradientSet {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn validate(&self, n_modes: usize) -> Result<(), IngestError> {
        if self.tensors.len() != n_modes {
            return Err(IngestError::GradientCountMismatch {
                count_grads: self.tensors.len(),
                count_modes: n_modes,
            });
        }
        for (k, t) in self.tensors.iter().enumerate() {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(IngestError::NonFinite {
                    what: format!("gradient tensor of mode {k}"),
                });
            }
        }
        Ok(())
    }
}

/// Spin-phonon coupling matrix g_αk, shape n_s × n_q, in cm⁻¹ per unit
/// dimensionless displacement. One row per spin operator (S_x, S_y, S_z).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(pub DMatrix<f64>);

impl CouplingMatrix {
    pub fn n_spin_ops(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.0.ncols()
    }

    /// l2 norm of column k: coupling strength of mode k across spin operators.
    pub fn mode_strength(&self, k: usize) -> f64 {
        self.0.column(k).norm()
    }

    pub fn max_mode_strength(&self) -> f64 {
        (0..self.n_modes())
            .map(|k| self.mode_strength(k))
            .fold(0.0, f64::max)
    }
}

/// Free-form provenance carried through parse → serialize round trips.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement_angstrom: Option<f64>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// A validated, unit-normalized spin-phonon dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub g_tensor: GTensor,
    pub b_field_tesla: Vector3<f64>,
    pub modes: ModeSet,
    pub gradients: GGradientSet,
    pub meta: Metadata,
}

impl Dataset {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Coupling matrix at the dataset's stored field.
    pub fn coupling_matrix(&self) -> CouplingMatrix {
        coupling_matrix(&self.gradients, self.b_field_tesla)
    }

    /// Coupling matrix at an overridden field.
    pub fn coupling_matrix_at(&self, b_field_tesla: Vector3<f64>) -> CouplingMatrix {
        coupling_matrix(&self.gradients, b_field_tesla)
    }

    pub fn validate(&self, options: &ParseOptions) -> Result<(), IngestError> {
        self.modes.validate(options.freq_floor_cm1)?;
        self.gradients.validate(self.modes.len())?;
        if self.g_tensor.matrix().iter().any(|x| !x.is_finite()) {
            return Err(IngestError::NonFinite {
                what: "g_tensor".into(),
            });
        }
        Ok(())
    }
}

/// Dataset schema selector for [`parse_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemaKind {
    /// Dispatch on the file's own `schema` field.
    #[default]
    Auto,
    /// Per-mode gradient schema `spd-1`.
    Spd1,
    /// Cartesian displaced-tensor schema `spd-cart-1`.
    SpdCart1,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Modes below this frequency are rejected (spectral densities divide
    /// by ω_k).
    pub freq_floor_cm1: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { freq_floor_cm1: 1.0 }
    }
}

pub const SCHEMA_SPD1: &str = "spd-1";
pub const SCHEMA_SPD_CART1: &str = "spd-cart-1";

// --- on-disk representations -------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModeRecord {
    freq_cm1: f64,
    dg_dq: [[f64; 3]; 3],
}

#[derive(Serialize, Deserialize)]
struct Spd1File {
    schema: String,
    g_tensor: [[f64; 3]; 3],
    b_field_tesla: [f64; 3],
    modes: Vec<ModeRecord>,
    #[serde(default)]
    meta: Metadata,
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    element: String,
    mass_amu: f64,
}

#[derive(Serialize, Deserialize)]
struct DisplacedPair {
    plus: [[f64; 3]; 3],
    minus: [[f64; 3]; 3],
}

#[derive(Serialize, Deserialize)]
struct SpdCart1File {
    schema: String,
    g_tensor: [[f64; 3]; 3],
    b_field_tesla: [f64; 3],
    freqs_cm1: Vec<f64>,
    atoms: Vec<AtomRecord>,
    /// n_q rows of 3N mass-weighted displacement components.
    mode_vectors: Vec<Vec<f64>>,
    delta_angstrom: f64,
    /// One displaced-tensor pair per Cartesian coordinate (3N entries,
    /// ordered atom-major: x,y,z of atom 0, then atom 1, ...).
    displaced_g: Vec<DisplacedPair>,
    #[serde(default)]
    meta: Metadata,
}

fn matrix3_from(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn matrix3_to(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

// --- operations ---------------------------------------------------------------

/// Parse a dataset file, validating physical and structural invariants.
pub fn parse_dataset(
    path: impl AsRef<Path>,
    format: SchemaKind,
    options: &ParseOptions,
) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset_str(&text, format, options).map_err(|e| match e {
        IngestError::Schema { source, .. } => IngestError::Schema {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Parse a dataset from its JSON text; see [`parse_dataset`].
pub fn parse_dataset_str(
    text: &str,
    format: SchemaKind,
    options: &ParseOptions,
) -> Result<Dataset, IngestError> {
    #[derive(Deserialize)]
    struct SchemaProbe {
        schema: String,
    }
    let probe: SchemaProbe =
        serde_json::from_str(text).map_err(|source| IngestError::Schema {
            path: "<input>".into(),
            source,
        })?;
    let detected = match (format, probe.schema.as_str()) {
        (SchemaKind::Auto, SCHEMA_SPD1) | (SchemaKind::Spd1, SCHEMA_SPD1) => SchemaKind::Spd1,
        (SchemaKind::Auto, SCHEMA_SPD_CART1) | (SchemaKind::SpdCart1, SCHEMA_SPD_CART1) => {
            SchemaKind::SpdCart1
        }
        (expected, found) => {
            return Err(IngestError::UnknownSchema {
                found: found.to_string(),
                expected: match expected {
                    SchemaKind::Auto => format!("{SCHEMA_SPD1} or {SCHEMA_SPD_CART1}"),
                    SchemaKind::Spd1 => SCHEMA_SPD1.to_string(),
                    SchemaKind::SpdCart1 => SCHEMA_SPD_CART1.to_string(),
                },
            })
        }
    };

    let dataset = match detected {
        SchemaKind::Spd1 => {
            let file: Spd1File =
                serde_json::from_str(text).map_err(|source| IngestError::Schema {
                    path: "<input>".into(),
                    source,
                })?;
            let freqs: Vec<f64> = file.modes.iter().map(|m| m.freq_cm1).collect();
            let tensors: Vec<Matrix3<f64>> =
                file.modes.iter().map(|m| matrix3_from(&m.dg_dq)).collect();
            Dataset {
                g_tensor: GTensor::new(matrix3_from(&file.g_tensor)),
                b_field_tesla: Vector3::from_row_slice(&file.b_field_tesla),
                modes: ModeSet::from_frequencies(freqs),
                gradients: GGradientSet { tensors },
                meta: file.meta,
            }
        }
        SchemaKind::SpdCart1 => {
            let file: SpdCart1File =
                serde_json::from_str(text).map_err(|source| IngestError::Schema {
                    path: "<input>".into(),
                    source,
                })?;
            dataset_from_cartesian(file)?
        }
        SchemaKind::Auto => unreachable!(),
    };
    dataset.validate(options)?;
    Ok(dataset)
}

fn dataset_from_cartesian(file: SpdCart1File) -> Result<Dataset, IngestError> {
    let n_q = file.freqs_cm1.len();
    let n_cart = 3 * file.atoms.len();
    if file.mode_vectors.len() != n_q {
        return Err(IngestError::DimensionMismatch {
            what: "mode_vectors".into(),
            found: file.mode_vectors.len(),
            expected: n_q,
        });
    }
    for row in &file.mode_vectors {
        if row.len() != n_cart {
            return Err(IngestError::DimensionMismatch {
                what: "mode_vector row".into(),
                found: row.len(),
                expected: n_cart,
            });
        }
    }
    if file.displaced_g.len() != n_cart {
        return Err(IngestError::DimensionMismatch {
            what: "displaced_g".into(),
            found: file.displaced_g.len(),
            expected: n_cart,
        });
    }

    // Central differences per Cartesian coordinate.
    let mut grad_cart = Vec::with_capacity(n_cart);
    for pair in &file.displaced_g {
        grad_cart.push(fd_gradient(
            &GTensor::new(matrix3_from(&pair.plus)),
            &GTensor::new(matrix3_from(&pair.minus)),
            file.delta_angstrom,
        )?);
    }

    let mode_vectors = DMatrix::from_fn(n_q, n_cart, |k, ix| file.mode_vectors[k][ix]);
    let masses: Vec<f64> = file.atoms.iter().map(|a| a.mass_amu).collect();
    let modes = ModeSet {
        freqs_cm1: DVector::from_vec(file.freqs_cm1),
        mode_vectors: Some(mode_vectors),
        masses_amu: Some(masses),
    };
    let gradients = cartesian_to_mode(&grad_cart, &modes)?;
    let mut meta = file.meta;
    meta.displacement_angstrom = Some(file.delta_angstrom);
    Ok(Dataset {
        g_tensor: GTensor::new(matrix3_from(&file.g_tensor)),
        b_field_tesla: Vector3::from_row_slice(&file.b_field_tesla),
        modes,
        gradients,
        meta,
    })
}

/// Serialize a dataset to the normalized `spd-1` JSON form.
pub fn dataset_to_json(dataset: &Dataset) -> String {
    let file = Spd1File {
        schema: SCHEMA_SPD1.to_string(),
        g_tensor: matrix3_to(dataset.g_tensor.matrix()),
        b_field_tesla: [
            dataset.b_field_tesla[0],
            dataset.b_field_tesla[1],
            dataset.b_field_tesla[2],
        ],
        modes: dataset
            .modes
            .freqs_cm1
            .iter()
            .zip(&dataset.gradients.tensors)
            .map(|(&freq_cm1, t)| ModeRecord {
                freq_cm1,
                dg_dq: matrix3_to(t),
            })
            .collect(),
        meta: dataset.meta.clone(),
    };
    serde_json::to_string_pretty(&file).expect("dataset serialization cannot fail")
}

/// Write a dataset in `spd-1` form.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, dataset_to_json(dataset)).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Central-difference gradient (g₊ − g₋)/(2Δ).
///
/// O(Δ²)-accurate for smooth g; exact for g linear in the displacement.
/// Units of the result are those of g per unit of `delta`.
pub fn fd_gradient(
    g_plus: &GTensor,
    g_minus: &GTensor,
    delta: f64,
) -> Result<Matrix3<f64>, IngestError> {
    if delta <= 0.0 || delta.is_nan() {
        return Err(IngestError::NonPositiveStep(delta));
    }
    Ok((g_plus.matrix() - g_minus.matrix()) / (2.0 * delta))
}

/// Chain rule from Cartesian gradients ∂g/∂X_ix (per Å) to gradients per
/// dimensionless normal-mode displacement:
///
/// ∂g/∂q_k = √(ħ/ω_k) Σ_ix L_k,ix / √(m_i) · ∂g/∂X_ix
///
/// with L the mass-weighted mode vectors and q_k = x_k/√(ħ/ω_k) the
/// dimensionless coordinate of mode k.
pub fn cartesian_to_mode(
    grad_cart: &[Matrix3<f64>],
    modes: &ModeSet,
) -> Result<GGradientSet, IngestError> {
    let vectors = modes
        .mode_vectors
        .as_ref()
        .ok_or(IngestError::MissingData("mode displacement vectors"))?;
    let masses = modes
        .masses_amu
        .as_ref()
        .ok_or(IngestError::MissingData("atomic masses"))?;
    let n_cart = vectors.ncols();
    if grad_cart.len() != n_cart {
        return Err(IngestError::DimensionMismatch {
            what: "Cartesian gradient tensors".into(),
            found: grad_cart.len(),
            expected: n_cart,
        });
    }
    if 3 * masses.len() != n_cart {
        return Err(IngestError::DimensionMismatch {
            what: "atomic masses".into(),
            found: masses.len(),
            expected: n_cart / 3,
        });
    }

    let mut tensors = Vec::with_capacity(modes.len());
    for k in 0..modes.len() {
        let scale = oscillator_length(modes.freqs_cm1[k]);
        let mut t = Matrix3::zeros();
        for ix in 0..n_cart {
            let mass = masses[ix / 3];
            t += grad_cart[ix] * (vectors[(k, ix)] / mass.sqrt());
        }
        tensors.push(t * scale);
    }
    Ok(GGradientSet { tensors })
}

/// Spin-phonon coupling matrix g_αk = (μ_B/hc) Σ_j (∂g_αj/∂q_k) B_j,
/// in cm⁻¹ per unit dimensionless displacement. Linear in the applied field.
pub fn coupling_matrix(grads: &GGradientSet, b_field_tesla: Vector3<f64>) -> CouplingMatrix {
    let n_q = grads.len();
    let mut m = DMatrix::zeros(3, n_q);
    for (k, t) in grads.tensors.iter().enumerate() {
        let col = t * b_field_tesla * BOHR_MAGNETON_CM1_PER_T;
        for alpha in 0..3 {
            m[(alpha, k)] = col[alpha];
        }
    }
    CouplingMatrix(m)
}

/// Choice of per-mode participation norm for gradient tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientNorm {
    /// Σ_ij |∂g_ij/∂q_k| — entrywise absolute sum. The default participation
    /// measure for reported histograms.
    #[default]
    AbsSum,
    /// √(Σ_ij (∂g_ij/∂q_k)²).
    Frobenius,
}

/// Per-mode participation norms of the gradient tensors.
pub fn participation_norms(grads: &GGradientSet, norm: GradientNorm) -> DVector<f64> {
    DVector::from_iterator(
        grads.len(),
        grads.tensors.iter().map(|t| match norm {
            GradientNorm::AbsSum => t.iter().map(|x| x.abs()).sum(),
            GradientNorm::Frobenius => t.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }),
    )
}
