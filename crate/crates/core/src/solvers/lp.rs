//! Solvers built on the constrained l1 subproblem: ALP, ManPPA, LP rounding
//! and the l1/l-infinity relaxation baseline.

use alloc::vec::Vec;

use nalgebra::DVector;

use super::config::{InnerSettings, SolverConfig};
use super::inner::{InnerEngine, LinearConstraint, Proximal};
use super::trace::{Monitor, SolveResult, Status};
use super::{degenerate_result, prepare};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::sphere::UnitVector;

fn require_l1(obj: &Objective) -> Result<()> {
    if obj.loss().is_l1() {
        Ok(())
    } else {
        Err(Error::RequiresL1(obj.loss().kind()))
    }
}

fn normalized(v: DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !(norm > 1e-300) || !norm.is_finite() {
        return Err(Error::ZeroRetraction { norm });
    }
    Ok(v / norm)
}

/// Alternating linear programs: `q_{k+1} = normalize(argmin |Y^T q|_1 s.t.
/// q_k^T q = 1)`.
pub fn solve_alp(obj: &Objective, q0: &UnitVector, config: &SolverConfig) -> Result<SolveResult> {
    alp(obj, q0, config, &Monitor::default())
}

pub(crate) fn alp(obj: &Objective, q0: &UnitVector, config: &SolverConfig, monitor: &Monitor<'_>) -> Result<SolveResult> {
    require_l1(obj)?;
    proximal_point(obj, q0, None, config, monitor)
}

/// Manifold proximal point: the step `d` minimizes
/// `|Y^T (q_k + d)|_1 + |d|^2 / (2t)` over `d` tangent at `q_k`, then
/// `q_{k+1} = normalize(q_k + alpha d)`.
pub fn solve_manppa(
    obj: &Objective,
    q0: &UnitVector,
    t: f64,
    alpha: f64,
    config: &SolverConfig,
) -> Result<SolveResult> {
    manppa(obj, q0, t, alpha, config, &Monitor::default())
}

pub(crate) fn manppa(
    obj: &Objective,
    q0: &UnitVector,
    t: f64,
    alpha: f64,
    config: &SolverConfig,
    monitor: &Monitor<'_>,
) -> Result<SolveResult> {
    require_l1(obj)?;
    if !(t > 0.0) || !(alpha > 0.0) || t.is_nan() || !alpha.is_finite() {
        return Err(Error::invalid("ManPPA needs t > 0 and alpha > 0"));
    }
    proximal_point(obj, q0, Some((1.0 / t, alpha)), config, monitor)
}

fn proximal_point(
    obj: &Objective,
    q0: &UnitVector,
    prox: Option<(f64, f64)>,
    config: &SolverConfig,
    monitor: &Monitor<'_>,
) -> Result<SolveResult> {
    let mut q = prepare(obj, q0, config)?;
    let mut rec = monitor.start();
    if let Some(done) = degenerate_result(obj, &q, &mut rec) {
        return Ok(done);
    }
    let (f, _, g) = obj.riem_grad_raw(&q);
    if rec.record(0, &q, f, g.norm()) {
        return Ok(rec.finish(q, Status::Converged));
    }
    let mut engine = InnerEngine::new(obj.data(), &config.inner)?;
    for k in 0..config.max_iters {
        let constraint = LinearConstraint { c: q.clone(), b: 1.0 };
        let (s, alpha) = prox.unwrap_or((0.0, 1.0));
        let spec = Proximal {
            s,
            anchor: if s > 0.0 { Some(&q) } else { None },
        };
        let sol = match engine.solve(&constraint, spec) {
            Ok(sol) => sol,
            Err(Error::SubproblemFail { .. }) => return Ok(rec.finish(q, Status::SubproblemFail)),
            Err(e) => return Err(e),
        };
        let next = if alpha == 1.0 {
            normalized(sol.q)?
        } else {
            let d = sol.q - &q;
            normalized(&q + d * alpha)?
        };
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

/// One constrained l1 solve around `q_bar` (`q^T q_bar = 1`), normalized.
pub fn round_lp(obj: &Objective, q_bar: &UnitVector, settings: &InnerSettings) -> Result<UnitVector> {
    crate::error::check_dim(obj.dim(), q_bar.dim())?;
    if obj.data().iter().all(|&x| x == 0.0) {
        return Ok(q_bar.clone());
    }
    let constraint = LinearConstraint {
        c: q_bar.as_vector().clone(),
        b: 1.0,
    };
    let mut engine = InnerEngine::new(obj.data(), settings)?;
    let sol = engine.solve(&constraint, Proximal::NONE)?;
    Ok(UnitVector::from_normalized(normalized(sol.q)?))
}

/// One chart of the l1/l-infinity relaxation.
#[derive(Debug, Clone)]
pub struct LinfCandidate {
    pub index: usize,
    /// Normalized minimizer and its l1 objective, or the subproblem error.
    pub outcome: core::result::Result<(UnitVector, f64), Error>,
}

/// Solves `min |Y^T q|_1 s.t. q_i = 1` for every i and keeps the normalized
/// candidate with the smallest objective. The trace records the running
/// best objective, one record per chart.
pub fn solve_linf_relaxation(obj: &Objective, config: &SolverConfig) -> Result<(SolveResult, Vec<LinfCandidate>)> {
    linf(obj, config, &Monitor::default())
}

pub(crate) fn linf(
    obj: &Objective,
    config: &SolverConfig,
    monitor: &Monitor<'_>,
) -> Result<(SolveResult, Vec<LinfCandidate>)> {
    require_l1(obj)?;
    config.validate()?;
    let n = obj.dim();
    let l1 = obj.with_loss(crate::loss::LossSpec::l1());
    let mut engine = InnerEngine::new(obj.data(), &config.inner)?;
    let mut rec = monitor.start();
    let mut candidates = Vec::with_capacity(n);
    let mut best: Option<(DVector<f64>, f64)> = None;
    for i in 0..n {
        let mut c = DVector::zeros(n);
        c[i] = 1.0;
        engine.reset();
        let outcome = engine
            .solve(&LinearConstraint { c, b: 1.0 }, Proximal::NONE)
            .and_then(|sol| normalized(sol.q))
            .map(|q| {
                let f = l1.value_raw(&q);
                (UnitVector::from_normalized(q), f)
            });
        if let Ok((q, f)) = &outcome {
            if best.as_ref().map_or(true, |(_, fb)| *f < *fb) {
                best = Some((q.as_vector().clone(), *f));
            }
        }
        if let Some((q, f)) = &best {
            let (_, _, g) = obj.riem_grad_raw(q);
            rec.record(i, q, *f, g.norm());
        }
        candidates.push(LinfCandidate { index: i, outcome });
    }
    match best {
        Some((q, _)) => Ok((rec.finish(q, Status::Converged), candidates)),
        None => {
            let residual = candidates
                .iter()
                .filter_map(|c| match &c.outcome {
                    Err(Error::SubproblemFail { residual, .. }) => Some(*residual),
                    _ => None,
                })
                .fold(f64::INFINITY, f64::min);
            Err(Error::SubproblemFail {
                iterations: config.inner.max_iters,
                residual,
            })
        }
    }
}
