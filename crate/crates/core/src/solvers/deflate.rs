use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::config::SolverConfig;
use super::trace::Monitor;
use super::{init_spectral, solve_with, SolverKind};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{complement_basis, orthonormality_defect};
use crate::objective::Objective;
use crate::sphere::UnitVector;

/// The problem restricted to the orthogonal complement of already-found
/// solutions: data `B^T Y` and the lift `q = B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deflation {
    pub objective: Objective,
    /// Orthonormal n x (n - k) basis of the complement.
    pub basis: DMatrix<f64>,
}

impl Deflation {
    /// Reduced dimension n - k.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn lift(&self, u: &UnitVector) -> Result<UnitVector> {
        check_dim(self.dim(), u.dim())?;
        let lifted = &self.basis * u.as_vector();
        // B has orthonormal columns, so only round-off needs renormalizing.
        UnitVector::normalize(lifted)
    }

    /// Coordinates `B^T q` of an ambient vector.
    pub fn reduce(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.basis.nrows(), q.len())?;
        Ok(self.basis.tr_mul(q))
    }
}

pub fn deflate(obj: &Objective, found: &[UnitVector]) -> Result<Deflation> {
    let n = obj.dim();
    let k = found.len();
    for q in found {
        check_dim(n, q.dim())?;
    }
    if n < k + 2 {
        return Err(Error::ComplementTooSmall(n.saturating_sub(k)));
    }
    let basis = if k == 0 {
        DMatrix::identity(n, n)
    } else {
        let mut frame = DMatrix::zeros(n, k);
        for (j, q) in found.iter().enumerate() {
            frame.set_column(j, q.as_vector());
        }
        if orthonormality_defect(&frame) > 1e-8 {
            return Err(Error::invalid("found vectors must be mutually orthonormal"));
        }
        complement_basis(&frame)
    };
    let data = basis.tr_mul(obj.data());
    Ok(Deflation {
        objective: Objective::new(data, *obj.loss())?,
        basis,
    })
}

/// `count` rounds of spectral init, solve and deflate; the returned vectors
/// are mutually orthogonal by construction.
pub fn solve_deflated(obj: &Objective, count: usize, kind: SolverKind, config: &SolverConfig) -> Result<Vec<UnitVector>> {
    let mut found: Vec<UnitVector> = Vec::with_capacity(count);
    for _ in 0..count {
        let reduced = deflate(obj, &found)?;
        let u0 = init_spectral(reduced.objective.data())?;
        let res = solve_with(kind, &reduced.objective, &u0, config, &Monitor::default())?;
        found.push(reduced.lift(&res.q_final)?);
    }
    Ok(found)
}
