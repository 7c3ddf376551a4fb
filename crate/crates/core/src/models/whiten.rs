use nalgebra::{DMatrix, DVector};
// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use super::{ProblemInstance, TargetSet};
use crate::error::{Error, Result};
use crate::linalg::{orthogonal_factor, sym_eigen_sorted};
use crate::sphere::UnitVector;

/// Eigenvalues below `WHITEN_FLOOR * max eigenvalue` are raised to it.
pub const WHITEN_FLOOR: f64 = 1e-12;

/// `((1/p) Y Y^T)^{-1/2}` from a symmetric eigendecomposition.
pub fn whitening_transform(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    let p = data.ncols();
    if n == 0 || p == 0 {
        return Err(Error::invalid("cannot whiten an empty matrix"));
    }
    let cov = (data * data.transpose()) / p as f64;
    let eig = sym_eigen_sorted(cov);
    let top = eig.values[n - 1];
    if !(top > 0.0) {
        return Err(Error::RankDeficient { floored: n });
    }
    let floor = WHITEN_FLOOR * top;
    let floored = eig.values.iter().filter(|&&v| v <= floor).count();
    if floored > n - 1 {
        return Err(Error::RankDeficient { floored });
    }
    let inv_sqrt = DVector::from_fn(n, |i, _| 1.0 / eig.values[i].max(floor).sqrt());
    let v = &eig.vectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= inv_sqrt[j];
    }
    Ok(scaled * v.transpose())
}

/// Preconditioned data `((1/p) Y Y^T)^{-1/2} Y`.
pub fn whiten(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(whitening_transform(data)? * data)
}

/// The instance with preconditioned data. Targets are mapped through the
/// inverse transform: `phi((P Y)^T q) = phi(Y^T (P q))`, so `q` is a target
/// of the whitened problem iff `P q` is one of the original.
pub fn whiten_instance(inst: &ProblemInstance) -> Result<ProblemInstance> {
    let p = inst.data.ncols();
    let transform = whitening_transform(&inst.data)?;
    let cov = (&inst.data * inst.data.transpose()) / p as f64;
    // cov^{1/2} = cov * cov^{-1/2}
    let inverse = &cov * &transform;
    let map_columns = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let mut out = &inverse * m;
        for mut col in out.column_iter_mut() {
            let norm = col.norm();
            if !(norm > 0.0) {
                return Err(Error::NonFinite);
            }
            col /= norm;
        }
        Ok(out)
    };
    let targets = match &inst.targets {
        None => None,
        Some(TargetSet::SubspaceComplement { basis }) => Some(TargetSet::SubspaceComplement {
            basis: orthogonal_factor(&inverse * basis),
        }),
        Some(TargetSet::SignedColumns { dictionary }) => Some(TargetSet::SignedShifts {
            columns: map_columns(dictionary)?,
        }),
        Some(TargetSet::SignedShifts { columns }) => Some(TargetSet::SignedShifts {
            columns: map_columns(columns)?,
        }),
        Some(TargetSet::PlantedVector { target }) => Some(TargetSet::PlantedVector {
            target: UnitVector::normalize(&inverse * target.as_vector())?,
        }),
    };
    let mut out = inst.clone();
    out.data = transform * &inst.data;
    out.targets = targets;
    Ok(out)
}
