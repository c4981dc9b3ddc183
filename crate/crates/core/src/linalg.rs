//! Internal eigendecomposition helpers.
//!
//! nalgebra's symmetric QR solver occasionally mispairs its eigenvalue list
//! against the eigenvector columns and can leave off-diagonal residue well
//! above roundoff. Both helpers therefore refine the backend's result with
//! cyclic Jacobi rotations on VᵀAV, which restores the pairing by
//! construction and drives the off-diagonal mass to roundoff; for the
//! positive-definite matrices this crate diagonalizes, Jacobi also delivers
//! high relative accuracy per eigenvalue.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const MAX_SWEEPS: usize = 30;

/// Cyclic Jacobi sweeps on symmetric `a`, accumulating rotations into `v`.
fn jacobi_refine(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = a.nrows();
    let eps_floor = f64::EPSILON
        * a.diagonal()
            .iter()
            .map(|x| x.abs())
            .fold(f64::MIN_POSITIVE, f64::max);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                let threshold = (1e-15 * (app.abs() * aqq.abs()).sqrt()).max(0.01 * eps_floor);
                if apq.abs() <= threshold {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..v.nrows() {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            return;
        }
    }
}

/// Hermitian analogue of [`jacobi_refine`].
fn jacobi_refine_hermitian(a: &mut DMatrix<Complex64>, v: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    let scale = (0..n)
        .map(|i| a[(i, i)].norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-15 * scale {
                    continue;
                }
                rotated = true;
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let mag = apq.norm();
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary columns: u_p = (c, −s·e^{iφ}), u_q = (s, c·e^{iφ})
                // with e^{iφ} the phase of a_pq, reducing to the real case.
                let s_p = phase * s;
                let c_q = phase * c;
                // A ← A·U
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * c - akq * s_p;
                    a[(k, q)] = akp * s + akq * c_q;
                }
                // A ← U†·A
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = apk * c - aqk * s_p.conj();
                    a[(q, k)] = apk * s + aqk * c_q.conj();
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                for k in 0..v.nrows() {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c - vkq * s_p;
                    v[(k, q)] = vkp * s + vkq * c_q;
                }
            }
        }
        if !rotated {
            return;
        }
    }
}

/// Symmetric eigendecomposition sorted ascending, with deterministic
/// eigenvector signs (largest-magnitude component positive) and degenerate
/// ties broken by lexicographic eigenvector order.
pub(crate) fn sorted_symmetric_eigen(mat: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    match mat.nrows() {
        0 => return (DVector::zeros(0), DMatrix::zeros(0, 0)),
        1 => {
            return (
                DVector::from_element(1, mat[(0, 0)]),
                DMatrix::from_element(1, 1, 1.0),
            )
        }
        _ => {}
    }
    let eig = mat.clone().symmetric_eigen();
    let mut vectors = eig.eigenvectors;
    let mut diagonalized = vectors.transpose() * mat * &vectors;
    jacobi_refine(&mut diagonalized, &mut vectors);
    let n = mat.nrows();
    let values = diagonalized.diagonal();

    let mut vecs: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut v = vectors.column(i).clone_owned();
            let lead = v
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                v = -v;
            }
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a].total_cmp(&values[b]).then_with(|| {
            for (x, y) in vecs[a].iter().zip(vecs[b].iter()) {
                let c = x.total_cmp(y);
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted_vecs = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        sorted_vecs.set_column(col, &std::mem::take(&mut vecs[i]));
    }
    (vals, sorted_vecs)
}

/// Hermitian eigendecomposition sorted ascending with deterministic
/// eigenvector phases (largest-magnitude component real positive).
pub(crate) fn sorted_hermitian_eigen(
    h: &DMatrix<Complex64>,
) -> (DVector<f64>, DMatrix<Complex64>) {
    match h.nrows() {
        0 => return (DVector::zeros(0), DMatrix::zeros(0, 0)),
        1 => {
            return (
                DVector::from_element(1, h[(0, 0)].re),
                DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            )
        }
        _ => {}
    }
    let eig = h.clone().symmetric_eigen();
    let mut vectors = eig.eigenvectors;
    let mut diagonalized = vectors.adjoint() * h * &vectors;
    jacobi_refine_hermitian(&mut diagonalized, &mut vectors);
    let n = h.nrows();
    let values: Vec<f64> = (0..n).map(|i| diagonalized[(i, i)].re).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut sorted = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = vectors.column(i).clone_owned();
        let mut lead = Complex64::new(0.0, 0.0);
        for &x in v.iter() {
            if x.norm() > lead.norm() {
                lead = x;
            }
        }
        if lead.norm() > 0.0 {
            let phase = lead / lead.norm();
            v *= phase.conj();
        }
        sorted.set_column(col, &v);
    }
    (vals, sorted)
}
