use core::fmt;

// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Step-size rule for the first-order solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant { eta: f64 },
    /// `eta0 / (k + 1)^exponent`
    PolyDecay { eta0: f64, exponent: f64 },
    /// `eta0 * beta^floor(k / period)`
    Geometric { eta0: f64, beta: f64, period: usize },
    /// Armijo backtracking from `eta0` (warm-started from the previous
    /// accepted step, never above `eta0`).
    Backtracking { eta0: f64, shrink: f64, armijo: f64 },
}

impl StepSchedule {
    pub const DEFAULT_GEOMETRIC: StepSchedule = StepSchedule::Geometric {
        eta0: 0.1,
        beta: 0.97,
        period: 1,
    };

    pub const DEFAULT_BACKTRACKING: StepSchedule = StepSchedule::Backtracking {
        eta0: 1.0,
        shrink: 0.5,
        armijo: 1e-4,
    };

    /// Step for iteration `k` of a fixed schedule. Backtracking returns its
    /// initial trial step.
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::PolyDecay { eta0, exponent } => eta0 / ((k + 1) as f64).powf(exponent),
            StepSchedule::Geometric { eta0, beta, period } => {
                eta0 * beta.powi((k / period) as i32)
            }
            StepSchedule::Backtracking { eta0, .. } => eta0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(alloc::format!("{what} must be positive")))
            }
        };
        match *self {
            StepSchedule::Constant { eta } => pos(eta, "eta"),
            StepSchedule::PolyDecay { eta0, exponent } => {
                pos(eta0, "eta0")?;
                if exponent >= 0.0 && exponent.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("decay exponent must be nonnegative"))
                }
            }
            StepSchedule::Geometric { eta0, beta, period } => {
                pos(eta0, "eta0")?;
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::invalid("beta must lie in (0, 1)"));
                }
                if period < 1 {
                    return Err(Error::invalid("period must be at least 1"));
                }
                Ok(())
            }
            StepSchedule::Backtracking { eta0, shrink, armijo } => {
                pos(eta0, "eta0")?;
                if !(shrink > 0.0 && shrink < 1.0) {
                    return Err(Error::invalid("shrink must lie in (0, 1)"));
                }
                if !(armijo > 0.0 && armijo < 1.0) {
                    return Err(Error::invalid("armijo constant must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StepSchedule::Constant { eta } => write!(f, "constant(eta={eta:e})"),
            StepSchedule::PolyDecay { eta0, exponent } => {
                write!(f, "poly(eta0={eta0:e},exponent={exponent})")
            }
            StepSchedule::Geometric { eta0, beta, period } => {
                write!(f, "geometric(eta0={eta0:e},beta={beta},period={period})")
            }
            StepSchedule::Backtracking { eta0, shrink, armijo } => {
                write!(f, "backtracking(eta0={eta0:e},shrink={shrink},armijo={armijo:e})")
            }
        }
    }
}

/// Settings of the shared constrained l1 subproblem engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    /// Initial ADMM penalty.
    pub rho: f64,
    /// KKT residual target.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for InnerSettings {
    fn default() -> Self {
        InnerSettings {
            rho: 1.0,
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionSettings {
    pub delta0: f64,
    pub delta_max: f64,
    /// Steps with ratio below `rho1` are rejected and the radius shrinks.
    pub rho1: f64,
    /// Steps with ratio above `rho2` that hit the boundary expand the radius.
    pub rho2: f64,
    /// Relative residual reduction that stops truncated CG.
    pub cg_reduction: f64,
}

impl Default for TrustRegionSettings {
    fn default() -> Self {
        TrustRegionSettings {
            delta0: 0.1,
            delta_max: 1.0,
            rho1: 0.1,
            rho2: 0.75,
            cg_reduction: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub schedule: StepSchedule,
    pub inner: InnerSettings,
    pub tr: TrustRegionSettings,
    /// Lets the trust-region solver run on the Huber loss.
    pub allow_huber_second_order: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            schedule: StepSchedule::DEFAULT_GEOMETRIC,
            inner: InnerSettings::default(),
            tr: TrustRegionSettings::default(),
            allow_huber_second_order: false,
        }
    }
}

impl SolverConfig {
    pub fn with_schedule(mut self, schedule: StepSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        for (v, what) in [
            (self.grad_tol, "grad_tol"),
            (self.step_tol, "step_tol"),
            (self.inner.rho, "inner penalty rho"),
            (self.inner.tol, "inner_tol"),
            (self.tr.delta0, "trust-region delta0"),
            (self.tr.delta_max, "trust-region delta_max"),
            (self.tr.cg_reduction, "cg_reduction"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!("{what} must be positive")));
            }
        }
        if self.inner.max_iters < 1 {
            return Err(Error::invalid("inner_max_iters must be positive"));
        }
        if self.tr.delta0 > self.tr.delta_max {
            return Err(Error::invalid("delta0 must not exceed delta_max"));
        }
        if !(0.0 < self.tr.rho1 && self.tr.rho1 < self.tr.rho2 && self.tr.rho2 < 1.0) {
            return Err(Error::invalid("trust-region thresholds need 0 < rho1 < rho2 < 1"));
        }
        self.schedule.validate()
    }
}
