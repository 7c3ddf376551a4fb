use nalgebra::{DMatrix, DVector};
// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use super::config::SolverConfig;
use super::trace::{Monitor, SolveResult, Status};
use super::{degenerate_result, prepare};
use crate::error::{Error, Result};
use crate::linalg::{argmax_abs, sym_eigen_sorted, tangent_basis};
use crate::loss::LossKind;
use crate::objective::Objective;
use crate::sphere::{hess_apply_raw, project_in_place, retract_raw, UnitVector};

/// Curvature below `-NEG_CURVATURE * |H|` at a critical point triggers an
/// eigen-step instead of termination.
const NEG_CURVATURE: f64 = 1e-10;
const MIN_RADIUS: f64 = 1e-15;

/// Riemannian trust-region method with a truncated-CG (Steihaug) inner
/// solver.
pub fn solve_rtr(obj: &Objective, q0: &UnitVector, config: &SolverConfig) -> Result<SolveResult> {
    rtr(obj, q0, config, &Monitor::default())
}

pub(crate) fn rtr(obj: &Objective, q0: &UnitVector, config: &SolverConfig, monitor: &Monitor<'_>) -> Result<SolveResult> {
    obj.require_twice_differentiable()?;
    if obj.loss().kind() == LossKind::Huber && !config.allow_huber_second_order {
        return Err(Error::NotTwiceDifferentiable(LossKind::Huber));
    }
    let mut q = prepare(obj, q0, config)?;
    let mut rec = monitor.start();
    if let Some(done) = degenerate_result(obj, &q, &mut rec) {
        return Ok(done);
    }
    let tr = config.tr;
    let mut delta = tr.delta0;
    let (mut f, mut eg, mut g) = obj.riem_grad_raw(&q);
    let mut w = obj.hess_weights(&q);
    let mut gn = g.norm();
    if rec.record(0, &q, f, gn) {
        return Ok(rec.finish(q, Status::Converged));
    }

    for k in 0..config.max_iters {
        let (eta, h_eta, boundary) = if gn <= config.grad_tol {
            match negative_curvature_step(obj, &q, delta) {
                Some(step) => step,
                None => return Ok(rec.finish(q, Status::Converged)),
            }
        } else {
            let hess = |v: &DVector<f64>| {
                let hv = obj.hess_vec_weighted(&w, v);
                hess_apply_raw(&q, &eg, &hv, v)
            };
            truncated_cg(&q, &g, hess, delta, tr.cg_reduction)
        };
        let model_decrease = -(g.dot(&eta) + 0.5 * eta.dot(&h_eta));
        let q_new = retract_raw(&q, &eta)?;
        let f_new = obj.value_raw(&q_new);
        let reg = 1e3 * f64::EPSILON * f.abs().max(1.0);
        let ratio = (f - f_new + reg) / (model_decrease + reg);

        if ratio < tr.rho1 || !ratio.is_finite() {
            delta *= 0.25;
        } else if ratio > tr.rho2 && boundary {
            delta = (2.0 * delta).min(tr.delta_max);
        }
        if ratio >= tr.rho1 && ratio.is_finite() && f_new <= f + reg {
            q = q_new;
            let (f1, eg1, g1) = obj.riem_grad_raw(&q);
            f = f1;
            eg = eg1;
            g = g1;
            gn = g.norm();
            w = obj.hess_weights(&q);
        }
        if rec.record(k + 1, &q, f, gn) {
            return Ok(rec.finish(q, Status::Converged));
        }
        if delta < MIN_RADIUS {
            let status = if gn <= config.grad_tol { Status::Converged } else { Status::MaxIters };
            return Ok(rec.finish(q, status));
        }
    }
    let status = if gn <= config.grad_tol && negative_curvature_step(obj, &q, delta).is_none() {
        Status::Converged
    } else {
        Status::MaxIters
    };
    Ok(rec.finish(q, status))
}

/// Steihaug-Toint truncated CG on the tangent-space model
/// `<g, d> + <d, H d>/2`, `|d| <= delta`. Returns (d, H d, hit boundary).
pub(crate) fn truncated_cg<H>(
    q: &DVector<f64>,
    g: &DVector<f64>,
    hess: H,
    delta: f64,
    reduction: f64,
) -> (DVector<f64>, DVector<f64>, bool)
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = q.len();
    let mut eta = DVector::zeros(n);
    let mut h_eta = DVector::zeros(n);
    let mut r = g.clone();
    let r0 = r.norm();
    let mut d = -&r;
    let mut rr = r.norm_squared();
    for _ in 0..n.max(1) {
        let hd = hess(&d);
        let dhd = d.dot(&hd);
        let alpha = rr / dhd;
        let next = &eta + &d * alpha;
        if dhd <= 0.0 || !alpha.is_finite() || next.norm() >= delta {
            let tau = boundary_root(&eta, &d, delta);
            eta.axpy(tau, &d, 1.0);
            h_eta.axpy(tau, &hd, 1.0);
            return (eta, h_eta, true);
        }
        eta = next;
        h_eta.axpy(alpha, &hd, 1.0);
        r.axpy(alpha, &hd, 1.0);
        project_in_place(q, &mut r);
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= reduction * r0 {
            break;
        }
        let beta = rr_new / rr;
        d = &d * beta - &r;
        project_in_place(q, &mut d);
        rr = rr_new;
    }
    (eta, h_eta, false)
}

/// Positive tau with `|eta + tau d| = delta`.
fn boundary_root(eta: &DVector<f64>, d: &DVector<f64>, delta: f64) -> f64 {
    let dd = d.norm_squared();
    if dd == 0.0 {
        return 0.0;
    }
    let ed = eta.dot(d);
    let ee = eta.norm_squared();
    let disc = (ed * ed + dd * (delta * delta - ee)).max(0.0);
    (-ed + disc.sqrt()) / dd
}

/// At a critical point with a negative tangent Hessian eigenvalue, the step
/// `delta * v` along the corresponding unit eigenvector, signed by the
/// largest entry of `q` so that negating `q` negates the step.
fn negative_curvature_step(obj: &Objective, q: &DVector<f64>, delta: f64) -> Option<(DVector<f64>, DVector<f64>, bool)> {
    let (values, vectors) = dense_tangent_eigen(obj, q);
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let lam = values[0];
    if !(lam < -NEG_CURVATURE * scale) {
        return None;
    }
    let sgn = if q[argmax_abs(q)] < 0.0 { -1.0 } else { 1.0 };
    let v = vectors.column(0) * (sgn * delta);
    let hv = &v * lam;
    Some((v, hv, true))
}

/// Ascending eigenpairs of the Riemannian Hessian restricted to the tangent
/// space, with eigenvectors expressed in ambient coordinates.
fn dense_tangent_eigen(obj: &Objective, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let basis = tangent_basis(q);
    let h = obj.riem_hess_matrix(q);
    let small = basis.tr_mul(&(h * &basis));
    let eig = sym_eigen_sorted(small);
    (eig.values, basis * eig.vectors)
}
