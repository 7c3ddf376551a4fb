use alloc::boxed::Box;
use alloc::string::String;

use crate::loss::LossKind;
use crate::solvers::DictionaryRecovery;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("vector is not tangent at its base point (|<q, v>| = {inner:e})")]
    NotTangent { inner: f64 },

    #[error("retraction of q + d would normalize a vector of norm {norm:e}")]
    ZeroRetraction { norm: f64 },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("loss {0} is not twice differentiable")]
    NotTwiceDifferentiable(LossKind),

    #[error("loss {0} is nonsmooth; use a subgradient-based solver")]
    NonSmoothLoss(LossKind),

    #[error("solver requires the l1 loss, got {0}")]
    RequiresL1(LossKind),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inner subproblem stopped after {iterations} iterations with KKT residual {residual:e}")]
    SubproblemFail { iterations: usize, residual: f64 },

    #[error("matrix is rank deficient: {floored} eigenvalues at the floor")]
    RankDeficient { floored: usize },

    #[error("point lies in the target set")]
    AtTarget,

    #[error("complement dimension {0} is smaller than 2")]
    ComplementTooSmall(usize),

    #[error("instance has no ground-truth targets")]
    MissingTargets,

    #[error("dictionary recovery found {found} of {expected} atoms")]
    IncompleteRecovery {
        found: usize,
        expected: usize,
        partial: Box<DictionaryRecovery>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
