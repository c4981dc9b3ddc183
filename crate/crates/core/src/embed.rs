//! SVD-based mode projection: splits the phonon space into a small set of
//! primary modes carrying all direct spin coupling and a residual bath
//! coupled only to the primary modes, via an orthogonal (canonical)
//! transformation of the normal coordinates.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ingest::{CouplingMatrix, ModeSet};
use crate::linalg::sorted_symmetric_eigen;

/// Default retention threshold: keep right singular vectors with
/// σ_i > threshold · σ_max.
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("coupling matrix is identically zero; no primary modes exist")]
    EmptyProjection,
    #[error("{block} Hessian block has nonpositive eigenvalue {eigenvalue}")]
    Instability { block: &'static str, eigenvalue: f64 },
    #[error("coupling matrix has {found} mode columns, mode set has {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("mode entropy of a zero vector is undefined")]
    ZeroVector,
    #[error("non-finite value in coupling matrix")]
    NonFinite,
}

/// Rank-r projector P onto the span of the retained right singular vectors
/// and its complement Q = I − P.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub rank: usize,
    /// Orthonormal basis of ran(P): the retained right singular vectors,
    /// as columns (n_q × rank).
    pub basis_p: DMatrix<f64>,
}

/// Output of [`svd_project`].
#[derive(Debug, Clone)]
pub struct SvdProjection {
    pub projectors: Projectors,
    /// All singular values, descending.
    pub singular_values: DVector<f64>,
    /// Left singular vectors as columns (n_s × n_s).
    pub left_vectors: DMatrix<f64>,
}

/// SVD of the coupling matrix and projector construction.
///
/// Directions with σ_i > `sv_threshold` · σ_max are retained; P is the sum
/// of their outer products and Q = I − P.
pub fn svd_project(
    gc: &CouplingMatrix,
    sv_threshold: f64,
) -> Result<SvdProjection, EmbedError> {
    let m = &gc.0;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    let n_q = m.ncols();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");

    // Defensive descending sort; pairs (σ_i, row i of Vᵀ).
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = svd.singular_values[order[0]];
    if sigma_max <= 0.0 {
        return Err(EmbedError::EmptyProjection);
    }

    let retained: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > sv_threshold * sigma_max)
        .collect();
    let rank = retained.len();

    let mut basis_p = DMatrix::zeros(n_q, rank);
    for (col, &i) in retained.iter().enumerate() {
        basis_p.set_column(col, &v_t.row(i).transpose());
    }
    let p = &basis_p * basis_p.transpose();
    let q = DMatrix::identity(n_q, n_q) - &p;

    let singular_values =
        DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));

    Ok(SvdProjection {
        projectors: Projectors { p, q, rank, basis_p },
        singular_values,
        left_vectors: u,
    })
}

/// The embedded model: primary and residual mode frequencies, projected
/// spin couplings, primary-residual bilinear couplings, and the orthogonal
/// transform from the original normal modes.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// ω_r in cm⁻¹, ascending (length r).
    pub primary_freqs_cm1: DVector<f64>,
    /// ω_j in cm⁻¹, ascending (length n_q − r).
    pub residual_freqs_cm1: DVector<f64>,
    /// g̃_αr in cm⁻¹ (n_s × r).
    pub primary_couplings: DMatrix<f64>,
    /// γ_rj in cm⁻² (r × (n_q − r)): Hessian block between primary and
    /// residual modes.
    pub bridge_couplings: DMatrix<f64>,
    /// Orthogonal transform T (n_q × n_q); columns are primary mode vectors
    /// followed by residual mode vectors, expressed in the original basis.
    pub transform: DMatrix<f64>,
    /// Singular values of the coupling matrix, descending.
    pub singular_values: DVector<f64>,
}

impl Embedding {
    pub fn rank(&self) -> usize {
        self.primary_freqs_cm1.len()
    }

    pub fn n_modes(&self) -> usize {
        self.primary_freqs_cm1.len() + self.residual_freqs_cm1.len()
    }

    /// Reassembled Hessian Ω̃² = [[diag(ω_r²), γ], [γᵀ, diag(ω_j²)]] in cm⁻².
    pub fn assembled_hessian(&self) -> DMatrix<f64> {
        let r = self.rank();
        let n = self.n_modes();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..r {
            h[(i, i)] = self.primary_freqs_cm1[i].powi(2);
        }
        for j in 0..n - r {
            h[(r + j, r + j)] = self.residual_freqs_cm1[j].powi(2);
        }
        for i in 0..r {
            for j in 0..n - r {
                h[(i, r + j)] = self.bridge_couplings[(i, j)];
                h[(r + j, i)] = self.bridge_couplings[(i, j)];
            }
        }
        h
    }

    /// Re-diagonalize the assembled Hessian and carry the spin couplings into
    /// its eigenbasis, recovering an equivalent star model: frequencies in
    /// cm⁻¹ and per-mode couplings ĝ (n_s × n_q).
    pub fn effective_modes(&self) -> Result<(DVector<f64>, DMatrix<f64>), EmbedError> {
        let (vals, vecs) = sorted_symmetric_eigen(&self.assembled_hessian());
        for &v in vals.iter() {
            if v <= 0.0 {
                return Err(EmbedError::Instability {
                    block: "assembled",
                    eigenvalue: v,
                });
            }
        }
        let freqs = vals.map(f64::sqrt);
        // Couplings in the (primary ⊕ residual) basis are [g̃ | 0].
        let n_s = self.primary_couplings.nrows();
        let mut padded = DMatrix::zeros(n_s, self.n_modes());
        padded.view_mut((0, 0), (n_s, self.rank())).copy_from(&self.primary_couplings);
        let couplings = padded * vecs;
        Ok((freqs, couplings))
    }

    /// Von Neumann entropy of each primary mode vector in the original
    /// normal-mode basis.
    pub fn primary_mode_entropies(&self) -> Vec<f64> {
        (0..self.rank())
            .map(|r| {
                mode_entropy(&self.transform.column(r).clone_owned())
                    .expect("primary mode vectors are unit vectors")
            })
            .collect()
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (which must have orthonormal columns), via Householder QR.
fn orthonormal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let r = basis.ncols();
    let mut a = basis.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(r);
    for j in 0..r {
        let mut v = DVector::zeros(n - j);
        for i in j..n {
            v[i - j] = a[(i, j)];
        }
        let alpha = -v[0].signum() * v.norm();
        v[0] -= alpha;
        let norm = v.norm();
        if norm > f64::EPSILON {
            v /= norm;
        } else {
            v.fill(0.0);
        }
        // Apply H = I − 2vvᵀ to the remaining columns.
        for col in j..r {
            let mut dot = 0.0;
            for i in 0..n - j {
                dot += v[i] * a[(j + i, col)];
            }
            for i in 0..n - j {
                a[(j + i, col)] -= 2.0 * dot * v[i];
            }
        }
        reflectors.push(v);
    }
    // Columns r..n of Q = H_0 H_1 ... H_{r−1} span the complement.
    let mut comp = DMatrix::zeros(n, n - r);
    let mut x = DVector::zeros(n);
    for (c, k) in (r..n).enumerate() {
        x.fill(0.0);
        x[k] = 1.0;
        for j in (0..r).rev() {
            let v = &reflectors[j];
            let mut dot = 0.0;
            for i in 0..n - j {
                dot += v[i] * x[j + i];
            }
            for i in 0..n - j {
                x[j + i] -= 2.0 * dot * v[i];
            }
        }
        comp.set_column(c, &x);
    }
    comp
}

/// Block-diagonalize the Hessian in the projected subspaces and assemble the
/// embedded model.
///
/// The two restricted eigenproblems are solved in the r- and (n_q − r)-
/// dimensional orthonormal bases of ran(P) and ran(Q) rather than on the
/// rank-deficient n_q × n_q blocks, so no spurious zero eigenvalues appear.
pub fn build_embedding(
    proj: &Projectors,
    modes: &ModeSet,
    gc: &CouplingMatrix,
) -> Result<Embedding, EmbedError> {
    let n_q = modes.len();
    if gc.0.ncols() != n_q || proj.basis_p.nrows() != n_q {
        return Err(EmbedError::DimensionMismatch {
            found: gc.0.ncols(),
            expected: n_q,
        });
    }
    let r = proj.rank;
    let omega_sq = modes.hessian_diagonal();

    // Restricted block V^T Ω² V for an orthonormal basis V.
    let restricted = |v: &DMatrix<f64>| -> DMatrix<f64> {
        let mut scaled = v.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= omega_sq[i];
        }
        v.transpose() * scaled
    };

    let basis_q = orthonormal_complement(&proj.basis_p);

    let (vals_p, vecs_p) = sorted_symmetric_eigen(&restricted(&proj.basis_p));
    for &v in vals_p.iter() {
        if v <= 0.0 {
            return Err(EmbedError::Instability {
                block: "primary",
                eigenvalue: v,
            });
        }
    }
    let (vals_q, vecs_q) = sorted_symmetric_eigen(&restricted(&basis_q));
    for &v in vals_q.iter() {
        if v <= 0.0 {
            return Err(EmbedError::Instability {
                block: "residual",
                eigenvalue: v,
            });
        }
    }

    // Mode vectors in the original normal-mode basis.
    let primary_vecs = &proj.basis_p * &vecs_p; // n_q × r
    let residual_vecs = &basis_q * &vecs_q; // n_q × (n_q − r)

    // γ_rj = ṽ_rᵀ Ω² w̃_j.
    let mut scaled_res = residual_vecs.clone();
    for (i, mut row) in scaled_res.row_iter_mut().enumerate() {
        row *= omega_sq[i];
    }
    let bridge = primary_vecs.transpose() * scaled_res;

    let primary_couplings = &gc.0 * &primary_vecs;

    let mut transform = DMatrix::zeros(n_q, n_q);
    transform.view_mut((0, 0), (n_q, r)).copy_from(&primary_vecs);
    transform
        .view_mut((0, r), (n_q, n_q - r))
        .copy_from(&residual_vecs);

    let mut sv: Vec<f64> = gc.0.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));

    Ok(Embedding {
        primary_freqs_cm1: vals_p.map(f64::sqrt),
        residual_freqs_cm1: vals_q.map(f64::sqrt),
        primary_couplings,
        bridge_couplings: bridge,
        transform,
        singular_values: DVector::from_vec(sv),
    })
}

/// Convenience: SVD projection followed by embedding assembly.
pub fn embed_dataset(
    gc: &CouplingMatrix,
    modes: &ModeSet,
    sv_threshold: f64,
) -> Result<Embedding, EmbedError> {
    let projection = svd_project(gc, sv_threshold)?;
    build_embedding(&projection.projectors, modes, gc)
}

/// Von Neumann entropy S = −Σ_n r_n² ln r_n² of a mode vector, with
/// r_n = v_n/‖v‖. Lies in [0, ln n]; zero components contribute nothing.
pub fn mode_entropy(vec: &DVector<f64>) -> Result<f64, EmbedError> {
    let norm = vec.norm();
    if norm <= 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let mut s = 0.0;
    for &v in vec.iter() {
        let p = (v / norm).powi(2);
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// Round-trip diagnostics of an embedding against the original mode set.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RoundtripReport {
    /// max_k |ω̃_k² − ω_k²| / ω_k² over the sorted spectra.
    pub max_rel_freq_error: f64,
    /// max |TᵀT − I|.
    pub orthogonality_defect: f64,
}

/// Diagonalize the reassembled Hessian and compare its spectrum with the
/// original mode frequencies.
pub fn roundtrip_check(emb: &Embedding, modes: &ModeSet) -> RoundtripReport {
    let (vals, _) = sorted_symmetric_eigen(&emb.assembled_hessian());
    let mut original: Vec<f64> = modes.hessian_diagonal().iter().cloned().collect();
    original.sort_by(f64::total_cmp);
    let max_rel_freq_error = vals
        .iter()
        .zip(&original)
        .map(|(&got, &want)| (got - want).abs() / want)
        .fold(0.0, f64::max);
    let n = emb.n_modes();
    let orthogonality_defect = (emb.transform.transpose() * &emb.transform
        - DMatrix::identity(n, n))
    .abs()
    .max();
    RoundtripReport {
        max_rel_freq_error,
        orthogonality_defect,
    }
}
