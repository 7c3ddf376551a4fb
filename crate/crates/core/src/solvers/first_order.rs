use super::config::{SolverConfig, StepSchedule};
use super::trace::{Monitor, SolveResult, Status};
use super::{degenerate_result, prepare};
use crate::error::{Error, Result};
use crate::loss::Smoothness;
use crate::objective::Objective;
use crate::sphere::{retract_raw, UnitVector};

/// Riemannian gradient descent on a smooth surrogate.
pub fn solve_rgd(obj: &Objective, q0: &UnitVector, config: &SolverConfig) -> Result<SolveResult> {
    rgd(obj, q0, config, &Monitor::default())
}

/// Riemannian subgradient method on the l1 objective.
pub fn solve_rsg(obj: &Objective, q0: &UnitVector, config: &SolverConfig) -> Result<SolveResult> {
    rsg(obj, q0, config, &Monitor::default())
}

pub(crate) fn rgd(obj: &Objective, q0: &UnitVector, config: &SolverConfig, monitor: &Monitor<'_>) -> Result<SolveResult> {
    if obj.loss().smoothness() == Smoothness::Nonsmooth {
        return Err(Error::NonSmoothLoss(obj.loss().kind()));
    }
    descend(obj, q0, config, monitor)
}

pub(crate) fn rsg(obj: &Objective, q0: &UnitVector, config: &SolverConfig, monitor: &Monitor<'_>) -> Result<SolveResult> {
    if !obj.loss().is_l1() {
        return Err(Error::RequiresL1(obj.loss().kind()));
    }
    descend(obj, q0, config, monitor)
}

/// `q <- normalize(q - eta_k grad_R f(q))` shared by RGD and RSG.
fn descend(obj: &Objective, q0: &UnitVector, config: &SolverConfig, monitor: &Monitor<'_>) -> Result<SolveResult> {
    let mut q = prepare(obj, q0, config)?;
    let mut rec = monitor.start();
    if let Some(done) = degenerate_result(obj, &q, &mut rec) {
        return Ok(done);
    }
    let (mut f, _, mut g) = obj.riem_grad_raw(&q);
    let mut gn = g.norm();
    if rec.record(0, &q, f, gn) {
        return Ok(rec.finish(q, Status::Converged));
    }
    let mut last_eta: Option<f64> = None;

    for k in 0..config.max_iters {
        if gn <= config.grad_tol {
            return Ok(rec.finish(q, Status::Converged));
        }
        let q_new = match config.schedule {
            StepSchedule::Backtracking { eta0, shrink, armijo } => {
                let mut eta = last_eta.map_or(eta0, |e| (e / shrink).min(eta0));
                let noise = 1e3 * f64::EPSILON * f.abs().max(1.0);
                let found = loop {
                    let cand = retract_raw(&q, &(&g * -eta))?;
                    let f_cand = obj.value_raw(&cand);
                    let wanted = armijo * eta * gn * gn;
                    if f_cand <= f - wanted {
                        break Some(cand);
                    }
                    // Once the required decrease is below the resolution of
                    // f, accept steps that stop short of the line minimum,
                    // judged by the slope at the candidate.
                    if wanted <= noise && f_cand <= f + noise {
                        let (_, _, g_cand) = obj.riem_grad_raw(&cand);
                        if g_cand.dot(&g) >= 0.0 {
                            break Some(cand);
                        }
                    }
                    eta *= shrink;
                    if eta < 1e-300 || eta * gn < 1e-300 {
                        break None;
                    }
                };
                match found {
                    Some(cand) => {
                        last_eta = Some(eta);
                        cand
                    }
                    // No representable step decreases f any further.
                    None => return Ok(rec.finish(q, Status::MaxIters)),
                }
            }
            schedule => retract_raw(&q, &(&g * -schedule.step(k)))?,
        };
        let step = (&q_new - &q).norm();
        q = q_new;
        let (f_new, _, g_new) = obj.riem_grad_raw(&q);
        f = f_new;
        g = g_new;
        gn = g.norm();
        let hit = rec.record(k + 1, &q, f, gn);
        if hit || step <= config.step_tol {
            return Ok(rec.finish(q, Status::Converged));
        }
    }
    let status = if gn <= config.grad_tol { Status::Converged } else { Status::MaxIters };
    Ok(rec.finish(q, status))
}
