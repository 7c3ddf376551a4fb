//! Distances to the ground truth, sparsity counts and landscape probes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{DMatrix, DVector};
// Inherent on f64 whenever std is linked into the build graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{argmax_abs, sym_eigen_sorted, tangent_basis};
use crate::loss::{LossKind, LossSpec, Smoothness};
use crate::models::TargetSet;
use crate::objective::Objective;
use crate::sphere::{self, UnitVector};

/// Nearest point of the target set (ties to the lowest index). For a
/// subspace complement orthogonal to `q` the first basis column is returned.
pub fn nearest_target(q: &UnitVector, targets: &TargetSet) -> Result<UnitVector> {
    check_dim(targets.dim(), q.dim())?;
    Ok(UnitVector::from_normalized(nearest_raw(q.as_vector(), targets)))
}

pub(crate) fn nearest_raw(q: &DVector<f64>, targets: &TargetSet) -> DVector<f64> {
    match targets {
        TargetSet::SubspaceComplement { basis } => {
            let coeffs = basis.tr_mul(q);
            let proj = basis * coeffs;
            let norm = proj.norm();
            if norm > 0.0 {
                proj / norm
            } else {
                basis.column(0).into_owned()
            }
        }
        TargetSet::SignedColumns { dictionary: m } | TargetSet::SignedShifts { columns: m } => best_signed_column(q, m),
        TargetSet::PlantedVector { target } => {
            let t = target.as_vector();
            if t.dot(q) < 0.0 {
                -t
            } else {
                t.clone()
            }
        }
    }
}

fn best_signed_column(q: &DVector<f64>, m: &DMatrix<f64>) -> DVector<f64> {
    let corr = m.tr_mul(q);
    let k = argmax_abs(&corr);
    let col = m.column(k).into_owned();
    if corr[k] < 0.0 {
        -col
    } else {
        col
    }
}

/// `inf_{a in Q*} |q - a|`, evaluated as an explicit difference so that
/// distances near zero keep full relative accuracy.
pub fn dist_to_targets(q: &UnitVector, targets: &TargetSet) -> Result<f64> {
    check_dim(targets.dim(), q.dim())?;
    Ok(dist_to_targets_raw(q.as_vector(), targets))
}

pub(crate) fn dist_to_targets_raw(q: &DVector<f64>, targets: &TargetSet) -> f64 {
    if let TargetSet::SubspaceComplement { basis } = targets {
        if basis.tr_mul(q).norm() == 0.0 {
            return 2.0f64.sqrt();
        }
    }
    (q - nearest_raw(q, targets)).norm()
}

/// Entries with `|z_i| > threshold`; the default threshold is
/// `1e-6 * max |z_i|`.
pub fn sparsity_count(z: &[f64], threshold: Option<f64>) -> usize {
    let t = threshold.unwrap_or_else(|| 1e-6 * z.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    z.iter().filter(|x| x.abs() > t).count()
}

/// Tangent-space eigenpairs of a Riemannian Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSpectrum {
    /// Ascending, length n - 1.
    pub values: Vec<f64>,
    /// Unit eigenvectors in ambient coordinates, one column per value.
    pub vectors: DMatrix<f64>,
}

fn check_second_order(obj: &Objective, allow_huber: bool) -> Result<()> {
    match obj.loss().smoothness() {
        Smoothness::Nonsmooth => Err(Error::NotTwiceDifferentiable(obj.loss().kind())),
        Smoothness::C1 if !allow_huber => Err(Error::NotTwiceDifferentiable(LossKind::Huber)),
        _ => Ok(()),
    }
}

/// Eigenvalues of `V^T Hess f(q) V` for the default tangent basis.
pub fn tangent_hessian_spectrum(obj: &Objective, q: &UnitVector) -> Result<Vec<f64>> {
    Ok(tangent_hessian_eigen(obj, q, None, false)?.values)
}

/// Tangent Hessian eigenpairs, optionally in a caller-supplied orthonormal
/// tangent basis (n x (n - 1)). `allow_huber` accepts the a.e. Huber
/// second derivative.
pub fn tangent_hessian_eigen(
    obj: &Objective,
    q: &UnitVector,
    basis: Option<&DMatrix<f64>>,
    allow_huber: bool,
) -> Result<TangentSpectrum> {
    check_second_order(obj, allow_huber)?;
    check_dim(obj.dim(), q.dim())?;
    let qv = q.as_vector();
    let (_, g) = obj.eval_raw(qv);
    let h = obj.hess_matrix(qv);
    spectrum_from_parts(q, &g, &h, basis)
}

/// Tangent spectrum from an explicit Euclidean gradient `g` and Hessian `h`
/// of any function on R^n.
pub fn spectrum_from_parts(
    q: &UnitVector,
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
) -> Result<TangentSpectrum> {
    let n = q.dim();
    check_dim(n, g.len())?;
    check_dim(n, h.nrows())?;
    check_dim(n, h.ncols())?;
    let qv = q.as_vector();
    let v = match basis {
        Some(b) => {
            if b.nrows() != n || b.ncols() != n - 1 {
                return Err(Error::invalid("tangent basis must be n x (n - 1)"));
            }
            if crate::linalg::orthonormality_defect(b) > 1e-10 || b.tr_mul(qv).amax() > 1e-10 {
                return Err(Error::invalid("tangent basis must be orthonormal and orthogonal to q"));
            }
            b.clone()
        }
        None => tangent_basis(qv),
    };
    let c = qv.dot(g);
    let mut hr = h.clone();
    for i in 0..n {
        hr[(i, i)] -= c;
    }
    let small = v.tr_mul(&(hr * &v));
    let eig = sym_eigen_sorted(small);
    Ok(TangentSpectrum {
        values: eig.values.iter().copied().collect(),
        vectors: v * eig.vectors,
    })
}

/// `<q - P(q), grad_R f(q)> / dist(q)` with the l1 subgradient selection.
pub fn regularity_estimate(obj: &Objective, q: &UnitVector, targets: &TargetSet) -> Result<f64> {
    if !obj.loss().is_l1() {
        return Err(Error::RequiresL1(obj.loss().kind()));
    }
    check_dim(obj.dim(), q.dim())?;
    check_dim(targets.dim(), q.dim())?;
    let qv = q.as_vector();
    let diff = qv - nearest_raw(qv, targets);
    let dist = diff.norm();
    if dist == 0.0 {
        return Err(Error::AtTarget);
    }
    let (_, g) = obj.eval_raw(qv);
    let rg = sphere::project(qv, &g);
    Ok(diff.dot(&rg) / dist)
}

/// Thresholds for the minimizer / strict-saddle dichotomy at critical points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyThresholds {
    /// Minimizer branch: every tangent eigenvalue at least this.
    pub min_eig_floor: f64,
    /// Saddle branch: smallest eigenvalue at most this.
    pub saddle_ceiling: f64,
    /// Minimizer branch: distance at most `dist_factor * mu`.
    pub dist_factor: f64,
}

impl Default for DichotomyThresholds {
    fn default() -> Self {
        DichotomyThresholds {
            min_eig_floor: -1e-4,
            saddle_ceiling: -1e-3,
            dist_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Minimizer,
    StrictSaddle,
    /// Neither branch holds.
    Unclassified,
}

pub fn classify_critical_point(eigs: &[f64], dist: f64, mu: f64, th: &DichotomyThresholds) -> CriticalKind {
    let lo = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= th.saddle_ceiling {
        CriticalKind::StrictSaddle
    } else if lo >= th.min_eig_floor && dist <= th.dist_factor * mu {
        CriticalKind::Minimizer
    } else {
        CriticalKind::Unclassified
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeReport {
    pub q: UnitVector,
    pub f: f64,
    pub riem_grad_norm: f64,
    /// Present for smooth losses only.
    pub tangent_hessian_eigs: Option<Vec<f64>>,
    pub dist: Option<f64>,
    /// l1 regularity ratio at `q` on the same data (needs targets and q off
    /// the target set).
    pub regularity_ratio: Option<f64>,
    pub thresholds: DichotomyThresholds,
    pub loss: LossSpec,
}

impl LandscapeReport {
    pub fn classify(&self) -> Option<CriticalKind> {
        let eigs = self.tangent_hessian_eigs.as_ref()?;
        let dist = self.dist?;
        Some(classify_critical_point(eigs, dist, self.loss.mu(), &self.thresholds))
    }

    /// Flat JSON object on one line.
    pub fn to_record(&self) -> String {
        fn num(x: f64) -> String {
            if x.is_finite() {
                alloc::format!("{x:e}")
            } else {
                String::from("null")
            }
        }
        let mut s = String::from("{");
        let _ = write!(s, "\"loss\":\"{}\",\"mu\":{}", self.loss.kind(), num(self.loss.mu()));
        let _ = write!(s, ",\"f\":{},\"riem_grad_norm\":{}", num(self.f), num(self.riem_grad_norm));
        let _ = write!(s, ",\"dist\":{}", self.dist.map_or(String::from("null"), num));
        let _ = write!(
            s,
            ",\"regularity_ratio\":{}",
            self.regularity_ratio.map_or(String::from("null"), num)
        );
        match &self.tangent_hessian_eigs {
            Some(e) => {
                let _ = write!(s, ",\"min_eig\":{},\"eigs\":[", num(e.first().copied().unwrap_or(f64::NAN)));
                for (i, x) in e.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    s.push_str(&num(*x));
                }
                s.push(']');
            }
            None => s.push_str(",\"min_eig\":null,\"eigs\":null"),
        }
        let kind = match self.classify() {
            Some(CriticalKind::Minimizer) => "\"minimizer\"",
            Some(CriticalKind::StrictSaddle) => "\"strict_saddle\"",
            Some(CriticalKind::Unclassified) => "\"unclassified\"",
            None => "null",
        };
        let _ = write!(
            s,
            ",\"class\":{kind},\"min_eig_floor\":{},\"saddle_ceiling\":{},\"dist_factor\":{}",
            num(self.thresholds.min_eig_floor),
            num(self.thresholds.saddle_ceiling),
            num(self.thresholds.dist_factor)
        );
        let _ = write!(s, ",\"q\":[");
        for (i, x) in q_entries(&self.q).enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&num(x));
        }
        s.push_str("]}");
        s
    }
}

fn q_entries(q: &UnitVector) -> impl Iterator<Item = f64> + '_ {
    q.as_slice().iter().copied()
}

pub fn landscape_report(obj: &Objective, q: &UnitVector, targets: Option<&TargetSet>) -> Result<LandscapeReport> {
    check_dim(obj.dim(), q.dim())?;
    let qv = q.as_vector();
    let (f, _, rg) = obj.riem_grad_raw(qv);
    let eigs = match obj.loss().smoothness() {
        Smoothness::CInfinity => Some(tangent_hessian_spectrum(obj, q)?),
        _ => None,
    };
    let dist = match targets {
        Some(t) => Some(dist_to_targets(q, t)?),
        None => None,
    };
    let regularity_ratio = match (targets, dist) {
        (Some(t), Some(d)) if d > 0.0 => {
            let l1 = obj.with_loss(LossSpec::l1());
            Some(regularity_estimate(&l1, q, t)?)
        }
        _ => None,
    };
    Ok(LandscapeReport {
        q: q.clone(),
        f,
        riem_grad_norm: rg.norm(),
        tangent_hessian_eigs: eigs,
        dist,
        regularity_ratio,
        thresholds: DichotomyThresholds::default(),
        loss: *obj.loss(),
    })
}
