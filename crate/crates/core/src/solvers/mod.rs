//! Riemannian solvers on the sphere, the LP-based methods and the
//! surrounding pipeline (initialization, rounding, deflation, dictionary
//! recovery).

mod config;
mod deflate;
mod dictionary;
mod first_order;
mod inner;
mod irls;
mod lp;
mod rtr;
mod trace;

use core::fmt;

use nalgebra::{DMatrix, DVector};

pub use config::{InnerSettings, SolverConfig, StepSchedule, TrustRegionSettings};
pub use deflate::{deflate, solve_deflated, Deflation};
pub use dictionary::{
    dedup_atoms, match_dictionary, recover_dictionary, AtomMatch, DictionaryRecovery, MatchReport, DEDUP_COSINE,
};
pub use first_order::{solve_rgd, solve_rsg};
pub use inner::{inner_convex, kkt_residual, InnerSolution, LinearConstraint, Proximal};
pub use irls::{irls_weights, solve_irls};
pub use lp::{round_lp, solve_alp, solve_linf_relaxation, solve_manppa, LinfCandidate};
pub use rtr::solve_rtr;
pub use trace::{Clock, Monitor, SolveResult, Status, Trace, TraceRecord};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{fix_sign_largest_positive, smallest_eigenvector};
use crate::objective::Objective;
use crate::sphere::UnitVector;

/// Smallest eigenvector of `Y Y^T`, largest-magnitude entry positive.
pub fn init_spectral(data: &DMatrix<f64>) -> Result<UnitVector> {
    if data.nrows() < 2 {
        return Err(Error::invalid("spectral initialization needs n >= 2"));
    }
    let (_, mut v) = smallest_eigenvector(data * data.transpose());
    fix_sign_largest_positive(&mut v);
    UnitVector::normalize(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    Rgd,
    Rsg,
    Rtr,
    Alp,
    ManPpa { t: f64, alpha: f64 },
    Irls { delta: f64 },
    /// The l1/l-infinity relaxation; ignores the initial point.
    Linf,
}

impl SolverKind {
    pub const MANPPA_DEFAULT: SolverKind = SolverKind::ManPpa { t: 1.0, alpha: 1.0 };
    pub const IRLS_DEFAULT: SolverKind = SolverKind::Irls { delta: 1e-12 };

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Rgd => "rgd",
            SolverKind::Rsg => "rsg",
            SolverKind::Rtr => "rtr",
            SolverKind::Alp => "alp",
            SolverKind::ManPpa { .. } => "manppa",
            SolverKind::Irls { .. } => "irls",
            SolverKind::Linf => "linf",
        }
    }

    /// Parses a solver name with default per-call parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "rgd" => Ok(SolverKind::Rgd),
            "rsg" => Ok(SolverKind::Rsg),
            "rtr" => Ok(SolverKind::Rtr),
            "alp" => Ok(SolverKind::Alp),
            "manppa" => Ok(SolverKind::MANPPA_DEFAULT),
            "irls" => Ok(SolverKind::IRLS_DEFAULT),
            "linf" => Ok(SolverKind::Linf),
            _ => Err(Error::invalid(alloc::format!("unknown solver '{name}'"))),
        }
    }

    /// Whether the solver works on the l1 loss (otherwise a smooth one).
    pub fn uses_l1(&self) -> bool {
        !matches!(self, SolverKind::Rgd | SolverKind::Rtr)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::ManPpa { t, alpha } => write!(f, "manppa(t={t:e},alpha={alpha})"),
            SolverKind::Irls { delta } => write!(f, "irls(delta={delta:e})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Runs any solver with tracing. For [`SolverKind::Linf`] the initial point
/// is only used for its dimension.
pub fn solve_with(
    kind: SolverKind,
    obj: &Objective,
    q0: &UnitVector,
    config: &SolverConfig,
    monitor: &Monitor<'_>,
) -> Result<SolveResult> {
    match kind {
        SolverKind::Rgd => first_order::rgd(obj, q0, config, monitor),
        SolverKind::Rsg => first_order::rsg(obj, q0, config, monitor),
        SolverKind::Rtr => rtr::rtr(obj, q0, config, monitor),
        SolverKind::Alp => lp::alp(obj, q0, config, monitor),
        SolverKind::ManPpa { t, alpha } => lp::manppa(obj, q0, t, alpha, config, monitor),
        SolverKind::Irls { delta } => irls::irls(obj, q0, delta, config, monitor),
        SolverKind::Linf => {
            check_dim(obj.dim(), q0.dim())?;
            lp::linf(obj, config, monitor).map(|(best, _)| best)
        }
    }
}

fn prepare(obj: &Objective, q0: &UnitVector, config: &SolverConfig) -> Result<DVector<f64>> {
    config.validate()?;
    check_dim(obj.dim(), q0.dim())?;
    Ok(q0.as_vector().clone())
}

/// Zero data makes every point optimal: return `q0` as converged.
fn degenerate_result(obj: &Objective, q: &DVector<f64>, rec: &mut trace::Recorder<'_>) -> Option<SolveResult> {
    if obj.data().iter().any(|&x| x != 0.0) {
        return None;
    }
    rec.record(0, q, obj.value_raw(q), 0.0);
    let done = core::mem::replace(rec, Monitor::default().start());
    Some(done.finish(q.clone(), Status::Converged))
}

#[cfg(test)]
mod tests;
