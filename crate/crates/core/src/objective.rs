//! The composite objective `f(q) = phi(Y^T q)` and its derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::all_finite;
use crate::loss::{LossSpec, Smoothness};
use crate::sphere::{self, UnitVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    data: DMatrix<f64>,
    loss: LossSpec,
}

impl Objective {
    /// `data` is the n x p matrix Y; requires n >= 2, p >= 1, finite entries.
    pub fn new(data: DMatrix<f64>, loss: LossSpec) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::invalid("data must have at least 2 rows"));
        }
        if data.ncols() < 1 {
            return Err(Error::invalid("data must have at least 1 column"));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite);
        }
        Ok(Objective { data, loss })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples p.
    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn with_loss(&self, loss: LossSpec) -> Self {
        Objective {
            data: self.data.clone(),
            loss,
        }
    }

    /// `f(q)` and the Euclidean (sub)gradient `Y phi'(Y^T q)`.
    pub fn eval(&self, q: &UnitVector) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), q.dim())?;
        Ok(self.eval_raw(q.as_vector()))
    }

    /// Euclidean Hessian-vector product `Y diag(phi''(Y^T q)) Y^T v`.
    pub fn hess_vec(&self, q: &UnitVector, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_twice_differentiable()?;
        check_dim(self.dim(), q.dim())?;
        check_dim(self.dim(), v.len())?;
        let weights = self.hess_weights(q.as_vector());
        Ok(self.hess_vec_weighted(&weights, v))
    }

    pub fn require_twice_differentiable(&self) -> Result<()> {
        if self.loss.smoothness() == Smoothness::Nonsmooth {
            Err(Error::NotTwiceDifferentiable(self.loss.kind()))
        } else {
            Ok(())
        }
    }

    pub(crate) fn value_raw(&self, q: &DVector<f64>) -> f64 {
        let z = self.data.tr_mul(q);
        z.iter().map(|&x| self.loss.scalar_value(x)).sum()
    }

    pub(crate) fn eval_raw(&self, q: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut z = self.data.tr_mul(q);
        let mut f = 0.0;
        for x in z.iter_mut() {
            f += self.loss.scalar_value(*x);
            *x = self.loss.scalar_deriv(*x);
        }
        (f, &self.data * z)
    }

    /// Riemannian (sub)gradient on raw vectors.
    pub(crate) fn riem_grad_raw(&self, q: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        let (f, g) = self.eval_raw(q);
        let rg = sphere::project(q, &g);
        (f, g, rg)
    }

    pub(crate) fn hess_weights(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut z = self.data.tr_mul(q);
        for x in z.iter_mut() {
            *x = self.loss.scalar_second(*x);
        }
        z
    }

    pub(crate) fn hess_vec_weighted(&self, weights: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let w = self.data.tr_mul(v).component_mul(weights);
        &self.data * w
    }

    /// Dense Euclidean Hessian `Y diag(w) Y^T`.
    pub(crate) fn hess_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let weights = self.hess_weights(q);
        weighted_gram(&self.data, &weights)
    }

    /// Dense Riemannian Hessian `P (H - <q, g> I) P` at `q`.
    pub(crate) fn riem_hess_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let (_, g) = self.eval_raw(q);
        let mut h = self.hess_matrix(q);
        let c = q.dot(&g);
        for i in 0..n {
            h[(i, i)] -= c;
        }
        let p = DMatrix::<f64>::identity(n, n) - q * q.transpose();
        &p * h * &p
    }
}

/// `Y diag(w) Y^T` for nonnegative or signed weights.
pub(crate) fn weighted_gram(data: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = data.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    scaled * data.transpose()
}
