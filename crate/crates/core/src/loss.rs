//! Sparsity surrogates for the l0 norm and their entrywise derivatives.
//!
//! | kind         | value per entry                              | smoothness |
//! |--------------|----------------------------------------------|------------|
//! | L1           | `|z|`                                         | nonsmooth  |
//! | Huber        | `z^2/(2 mu) + mu/2` if `|z| < mu`, else `|z|` | C^1        |
//! | PseudoHuber  | `mu sqrt(1 + (z/mu)^2)`                       | C^inf      |
//! | LogCosh      | `mu log cosh(z/mu)`                           | C^inf      |

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Smoothing width used when none is given.
pub const DEFAULT_MU: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    L1,
    Huber,
    PseudoHuber,
    LogCosh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    Nonsmooth,
    C1,
    CInfinity,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::Huber => "huber",
            LossKind::PseudoHuber => "pseudo-huber",
            LossKind::LogCosh => "logcosh",
        }
    }

    pub fn smoothness(self) -> Smoothness {
        match self {
            LossKind::L1 => Smoothness::Nonsmooth,
            LossKind::Huber => Smoothness::C1,
            LossKind::PseudoHuber | LossKind::LogCosh => Smoothness::CInfinity,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "huber" => Ok(LossKind::Huber),
            "pseudo-huber" | "pseudohuber" | "pseudo_huber" => Ok(LossKind::PseudoHuber),
            "logcosh" | "log-cosh" => Ok(LossKind::LogCosh),
            _ => Err(Error::invalid(alloc::format!("unknown loss '{s}'"))),
        }
    }
}

/// A surrogate together with its smoothing width (ignored for L1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    mu: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, mu: f64) -> Result<Self> {
        if kind != LossKind::L1 && !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("smoothing width mu must be positive and finite"));
        }
        Ok(LossSpec { kind, mu })
    }

    pub fn l1() -> Self {
        LossSpec {
            kind: LossKind::L1,
            mu: DEFAULT_MU,
        }
    }

    pub fn huber(mu: f64) -> Result<Self> {
        Self::new(LossKind::Huber, mu)
    }

    pub fn pseudo_huber(mu: f64) -> Result<Self> {
        Self::new(LossKind::PseudoHuber, mu)
    }

    pub fn logcosh(mu: f64) -> Result<Self> {
        Self::new(LossKind::LogCosh, mu)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn smoothness(&self) -> Smoothness {
        self.kind.smoothness()
    }

    pub fn is_l1(&self) -> bool {
        self.kind == LossKind::L1
    }

    pub(crate) fn scalar_value(&self, z: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            LossKind::L1 => z.abs(),
            LossKind::Huber => {
                let a = z.abs();
                if a < mu {
                    z * z / (2.0 * mu) + mu / 2.0
                } else {
                    a
                }
            }
            LossKind::PseudoHuber => mu * (1.0 + (z / mu) * (z / mu)).sqrt(),
            LossKind::LogCosh => {
                let a = (z / mu).abs();
                mu * (a + (-2.0 * a).exp().ln_1p() - core::f64::consts::LN_2)
            }
        }
    }

    pub(crate) fn scalar_deriv(&self, z: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            LossKind::L1 => sign(z),
            LossKind::Huber => {
                if z.abs() < mu {
                    z / mu
                } else {
                    sign(z)
                }
            }
            LossKind::PseudoHuber => z / (z * z + mu * mu).sqrt(),
            LossKind::LogCosh => (z / mu).tanh(),
        }
    }

    /// Second derivative; zero for L1 is never returned (callers check
    /// smoothness first).
    pub(crate) fn scalar_second(&self, z: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            LossKind::L1 => 0.0,
            LossKind::Huber => {
                if z.abs() < mu {
                    1.0 / mu
                } else {
                    0.0
                }
            }
            LossKind::PseudoHuber => {
                let s = z * z + mu * mu;
                mu * mu / (s * s.sqrt())
            }
            LossKind::LogCosh => {
                // sech^2(x) = 4 e^{-2|x|} / (1 + e^{-2|x|})^2, overflow free.
                let e = (-2.0 * (z / mu).abs()).exp();
                4.0 * e / ((1.0 + e) * (1.0 + e)) / mu
            }
        }
    }

    /// Sum of the per-entry surrogate over `z`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        finite(z)?;
        Ok(z.iter().map(|&x| self.scalar_value(x)).sum())
    }

    /// Entrywise (sub)gradient; `sign(0) = 0` for L1.
    pub fn grad(&self, z: &[f64]) -> Result<Vec<f64>> {
        finite(z)?;
        Ok(z.iter().map(|&x| self.scalar_deriv(x)).collect())
    }

    /// Entrywise second derivative. Huber uses 0 at the breakpoints.
    pub fn hess_diag(&self, z: &[f64]) -> Result<Vec<f64>> {
        if self.kind == LossKind::L1 {
            return Err(Error::NotTwiceDifferentiable(self.kind));
        }
        finite(z)?;
        Ok(z.iter().map(|&x| self.scalar_second(x)).collect())
    }
}

/// `x / |x|`, with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn finite(z: &[f64]) -> Result<()> {
    if z.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}
