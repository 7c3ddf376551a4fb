//! Synthetic data models whose row spaces contain a known sparse direction,
//! together with the ground-truth targets on the sphere.

mod circulant;
mod generate;
mod whiten;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

pub use circulant::{circ_conv, circulant_matrix, dft_magnitudes};
pub use generate::{
    gen_dpcp, gen_mcsbd, gen_odl, gen_psv, mcsbd_from_parts, KERNEL_INVERTIBILITY_FLOOR,
};
pub use whiten::{whiten, whiten_instance, whitening_transform, WHITEN_FLOOR};

use crate::error::{Error, Result};
use crate::sphere::UnitVector;

/// The ground-truth solution set on the sphere for one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    /// Orthonormal basis (n x r) of the orthogonal complement of the inlier
    /// subspace; every unit vector in its span is a target.
    SubspaceComplement { basis: DMatrix<f64> },
    /// Orthogonal dictionary A; the targets are the signed columns.
    SignedColumns { dictionary: DMatrix<f64> },
    /// Unit columns normalize(C_a^{-T} e_j); targets are the signed columns.
    SignedShifts { columns: DMatrix<f64> },
    /// A single planted direction, up to sign.
    PlantedVector { target: UnitVector },
}

impl TargetSet {
    pub fn dim(&self) -> usize {
        match self {
            TargetSet::SubspaceComplement { basis } => basis.nrows(),
            TargetSet::SignedColumns { dictionary } => dictionary.nrows(),
            TargetSet::SignedShifts { columns } => columns.nrows(),
            TargetSet::PlantedVector { target } => target.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Psv,
    Dpcp,
    Odl,
    Mcsbd,
    Custom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Psv => "psv",
            ModelKind::Dpcp => "dpcp",
            ModelKind::Odl => "odl",
            ModelKind::Mcsbd => "mcsbd",
            ModelKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psv" => Ok(ModelKind::Psv),
            "dpcp" => Ok(ModelKind::Dpcp),
            "odl" => Ok(ModelKind::Odl),
            "mcsbd" | "mcs-bd" => Ok(ModelKind::Mcsbd),
            "custom" => Ok(ModelKind::Custom),
            _ => Err(Error::invalid(alloc::format!("unknown model '{s}'"))),
        }
    }
}

/// Generation record. `p` counts samples for psv/dpcp/odl and channels for
/// mcsbd (whose data has `n * p` columns).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenParams {
    pub n: usize,
    pub p: usize,
    pub r: Option<usize>,
    pub p1: Option<usize>,
    pub p2: Option<usize>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub data: DMatrix<f64>,
    pub kind: ModelKind,
    pub targets: Option<TargetSet>,
    pub params: GenParams,
    /// Sparse code: X for odl and mcsbd (`[C_x1 ... C_xp]`), x0 as a 1 x p
    /// row for psv.
    pub code: Option<DMatrix<f64>>,
    /// Inlier mask per column (dpcp only).
    pub inliers: Option<Vec<bool>>,
    /// Convolution kernel a0 (mcsbd only).
    pub kernel: Option<nalgebra::DVector<f64>>,
}

impl ProblemInstance {
    /// Wraps arbitrary data without ground truth.
    pub fn custom(data: DMatrix<f64>) -> Result<Self> {
        if !crate::linalg::all_finite(&data) {
            return Err(Error::NonFinite);
        }
        let params = GenParams {
            n: data.nrows(),
            p: data.ncols(),
            ..GenParams::default()
        };
        Ok(ProblemInstance {
            data,
            kind: ModelKind::Custom,
            targets: None,
            params,
            code: None,
            inliers: None,
            kernel: None,
        })
    }

    /// Builds an orthogonal dictionary-learning instance `Y = A X` from given
    /// factors.
    pub fn odl_from_parts(dictionary: DMatrix<f64>, code: DMatrix<f64>) -> Result<Self> {
        let n = dictionary.nrows();
        if dictionary.ncols() != n || code.nrows() != n {
            return Err(Error::invalid("dictionary must be n x n and code n x p"));
        }
        if crate::linalg::orthonormality_defect(&dictionary) > 1e-10 {
            return Err(Error::invalid("dictionary is not orthogonal"));
        }
        let data = &dictionary * &code;
        let params = GenParams {
            n,
            p: code.ncols(),
            ..GenParams::default()
        };
        Ok(ProblemInstance {
            data,
            kind: ModelKind::Odl,
            targets: Some(TargetSet::SignedColumns { dictionary }),
            params,
            code: Some(code),
            inliers: None,
            kernel: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}
