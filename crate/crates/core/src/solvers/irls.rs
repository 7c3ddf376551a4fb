use nalgebra::DVector;

use super::config::SolverConfig;
use super::trace::{Monitor, SolveResult, Status};
use super::{degenerate_result, prepare};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_sorted;
use crate::objective::{weighted_gram, Objective};
use crate::sphere::UnitVector;

/// IRLS weights `1 / max(delta, |y_i^T q|)`.
pub fn irls_weights(obj: &Objective, q: &UnitVector, delta: f64) -> Result<DVector<f64>> {
    crate::error::check_dim(obj.dim(), q.dim())?;
    Ok(weights_raw(obj, q.as_vector(), delta))
}

fn weights_raw(obj: &Objective, q: &DVector<f64>, delta: f64) -> DVector<f64> {
    obj.data().tr_mul(q).map(|z| 1.0 / z.abs().max(delta))
}

/// Iteratively reweighted least squares: each iterate is the smallest
/// eigenvector of `sum_i w_i y_i y_i^T`, sign-aligned with its predecessor.
pub fn solve_irls(obj: &Objective, q0: &UnitVector, delta: f64, config: &SolverConfig) -> Result<SolveResult> {
    irls(obj, q0, delta, config, &Monitor::default())
}

pub(crate) fn irls(
    obj: &Objective,
    q0: &UnitVector,
    delta: f64,
    config: &SolverConfig,
    monitor: &Monitor<'_>,
) -> Result<SolveResult> {
    if !obj.loss().is_l1() {
        return Err(Error::RequiresL1(obj.loss().kind()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("IRLS floor delta must be positive"));
    }
    let mut q = prepare(obj, q0, config)?;
    let mut rec = monitor.start();
    if let Some(done) = degenerate_result(obj, &q, &mut rec) {
        return Ok(done);
    }
    let (f, _, g) = obj.riem_grad_raw(&q);
    if rec.record(0, &q, f, g.norm()) {
        return Ok(rec.finish(q, Status::Converged));
    }
    for k in 0..config.max_iters {
        let w = weights_raw(obj, &q, delta);
        let eig = sym_eigen_sorted(weighted_gram(obj.data(), &w));
        let mut next = eig.vectors.column(0).into_owned();
        next /= next.norm();
        if next.dot(&q) < 0.0 {
            next.neg_mut();
        }
        let step = (&next - &q).norm();
        q = next;
        let (f, _, g) = obj.riem_grad_raw(&q);
        let hit = rec.record(k + 1, &q, f, g.norm());
        if hit || step <= config.step_tol {
            return Ok(rec.finish(q, Status::Converged));
        }
    }
    Ok(rec.finish(q, Status::MaxIters))
}
