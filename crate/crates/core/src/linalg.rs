//! Dense helpers on top of nalgebra: sorted symmetric eigendecompositions,
//! orthonormal frames and complements.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen_sorted(m: DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

/// Index of the entry with largest magnitude; lowest index on ties.
pub fn argmax_abs(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Flip `v` so its largest-magnitude entry is positive.
pub fn fix_sign_largest_positive(v: &mut DVector<f64>) {
    let k = argmax_abs(v);
    if v[k] < 0.0 {
        v.neg_mut();
    }
}

/// Unit eigenvector of the smallest eigenvalue. Near-ties (relative 1e-12)
/// are resolved towards the eigenvector whose dominant entry has the lowest
/// index.
pub fn smallest_eigenvector(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = sym_eigen_sorted(m);
    let n = eig.values.len();
    let lo = eig.values[0];
    let scale = eig.values[n - 1].abs().max(1.0);
    let mut best = 0;
    let mut best_key = argmax_abs(&eig.vectors.column(0).into_owned());
    for j in 1..n {
        if eig.values[j] - lo > 1e-12 * scale {
            break;
        }
        let key = argmax_abs(&eig.vectors.column(j).into_owned());
        if key < best_key {
            best = j;
            best_key = key;
        }
    }
    let mut v = eig.vectors.column(best).into_owned();
    let norm = v.norm();
    v /= norm;
    (eig.values[best], v)
}

/// Orthonormal basis of the orthogonal complement of `q` (unit): columns
/// 2..n of the Householder reflector mapping e1 to q.
pub fn tangent_basis(q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let mut w = q.clone();
    let sign = if q[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let wn2 = w.norm_squared();
    let mut basis = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        // H e_j = e_j - 2 w (w_j / |w|^2)
        let coef = 2.0 * w[j] / wn2;
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            basis[(i, j - 1)] = e - coef * w[i];
        }
    }
    basis
}

/// Orthonormal basis (n x (n-k)) of the complement of the span of the
/// columns of `frame` (n x k, orthonormal columns).
pub fn complement_basis(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let n = frame.nrows();
    let k = frame.ncols();
    let projector = DMatrix::<f64>::identity(n, n) - frame * frame.transpose();
    let eig = sym_eigen_sorted(projector);
    let mut basis = DMatrix::zeros(n, n - k);
    for j in 0..n - k {
        let mut col = eig.vectors.column(k + j).into_owned();
        fix_sign_largest_positive(&mut col);
        basis.set_column(j, &col);
    }
    basis
}

/// Q factor of a square matrix with sign convention diag(R) >= 0, which makes
/// the result Haar-distributed when the input is Gaussian.
pub fn orthogonal_factor(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// Largest absolute deviation of `m^T m` from the identity.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.tr_mul(m);
    let k = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Sines of the principal angles between the column spans of two orthonormal
/// frames of equal width, largest first.
pub fn principal_angle_sines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let c = a.tr_mul(b);
    let svd = c.svd(false, false);
    let mut sines: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| (1.0 - s.min(1.0) * s.min(1.0)).max(0.0).sqrt())
        .collect();
    sines.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    sines
}

/// Largest principal angle (radians) between the spans, computed from the
/// residual of projecting `b` onto span(`a`) so small angles stay accurate.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = b - a * a.tr_mul(b);
    let svd = residual.svd(false, false);
    let s = svd.singular_values.iter().fold(0.0f64, |acc, &x| acc.max(x));
    s.min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};

    #[test]
    fn tangent_basis_is_orthonormal_and_orthogonal_to_q() {
        let mut rng = seeded(3);
        for _ in 0..10 {
            let mut q = gaussian_vector(6, &mut rng);
            q /= q.norm();
            let v = tangent_basis(&q);
            assert!(orthonormality_defect(&v) < 1e-14);
            assert!(v.tr_mul(&q).amax() < 1e-14);
        }
    }

    #[test]
    fn complement_of_frame() {
        let mut rng = seeded(4);
        let q = orthogonal_factor(gaussian_matrix(5, 5, &mut rng));
        let frame = q.columns(0, 2).into_owned();
        let c = complement_basis(&frame);
        assert_eq!(c.ncols(), 3);
        assert!(orthonormality_defect(&c) < 1e-12);
        assert!(frame.tr_mul(&c).amax() < 1e-12);
    }

    #[test]
    fn smallest_eigenvector_tie_prefers_lowest_index() {
        let (val, v) = smallest_eigenvector(DMatrix::identity(3, 3));
        assert_eq!(val, 1.0);
        assert_eq!(argmax_abs(&v), 0);
    }
}
