//! The gyromagnetic tensor and its principal-frame decomposition.

use nalgebra::{Matrix3, Vector3};

/// 3×3 real gyromagnetic tensor (dimensionless).
///
/// Computed tensors are generally not exactly symmetric; operations that
/// need a symmetric form use `symmetrized()` first.
#[derive(Debug, Clone, PartialEq)]
pub struct GTensor(Matrix3<f64>);

impl GTensor {
    pub fn new(g: Matrix3<f64>) -> Self {
        Self(g)
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    /// Isotropic tensor g·I.
    pub fn isotropic(g: f64) -> Self {
        Self(Matrix3::identity() * g)
    }

    /// A DFT-computed vanadyl-complex g-tensor used as a reference input in tests.
    pub fn vanadyl_reference() -> Self {
        Self::from_rows([
            [2.073, -1.64e-2, -9.25e-3],
            [-1.64e-2, 2.037, 3.50e-3],
            [-9.22e-3, 3.58e-3, 2.032],
        ])
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// (g + gᵀ)/2.
    pub fn symmetrized(&self) -> Matrix3<f64> {
        (self.0 + self.0.transpose()) * 0.5
    }

    /// Principal values sorted descending and the orthogonal rotation R with
    /// R g_sym Rᵀ diagonal.
    ///
    /// The tensor is symmetrized before eigendecomposition. Nonpositive
    /// principal values are unphysical for a g-tensor; they are reported
    /// with a warning rather than an error.
    pub fn principal_frame(&self) -> (Vector3<f64>, Matrix3<f64>) {
        let sym = nalgebra::DMatrix::from_fn(3, 3, |i, j| self.symmetrized()[(i, j)]);
        let (vals, vecs) = crate::linalg::sorted_symmetric_eigen(&sym);
        // sorted_symmetric_eigen is ascending; principal values descending.
        let values = Vector3::new(vals[2], vals[1], vals[0]);
        if values[2] <= 0.0 {
            log::warn!(
                "g-tensor has nonpositive principal value {}; physical tensors are positive",
                values[2]
            );
        }
        // Rows of R are the sorted eigenvectors, so R g_sym Rᵀ = diag(values).
        let mut rot = Matrix3::zeros();
        for row in 0..3 {
            let v = vecs.column(2 - row);
            for col in 0..3 {
                rot[(row, col)] = v[col];
            }
        }
        (values, rot)
    }
}

/// Principal-frame decomposition of `g`; see [`GTensor::principal_frame`].
pub fn principal_frame(g: &GTensor) -> (Vector3<f64>, Matrix3<f64>) {
    g.principal_frame()
}
