//! Riemannian primitives on the unit sphere S^{n-1}.
//!
//! The tangent space at `q` is `{v : <q, v> = 0}` with projector
//! `P = I - q q^T`. Updates leave the tangent space through the metric
//! projection retraction `(q + d) / |q + d|`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::rng::gaussian_vector;

/// Allowed deviation of `|q|` from one.
pub const UNIT_TOL: f64 = 1e-12;
/// Relative tangency tolerance enforced at the public API boundary.
pub const TANGENT_TOL: f64 = 1e-10;
const MIN_RETRACT_NORM: f64 = 1e-14;

/// A point on the unit sphere, n >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Wraps `v` after checking `|v| = 1` within [`UNIT_TOL`].
    pub fn new(v: DVector<f64>) -> Result<Self> {
        check_finite(&v)?;
        if v.len() < 2 {
            return Err(Error::invalid("sphere dimension n must be at least 2"));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(UnitVector(v))
    }

    /// Normalizes `v` onto the sphere.
    pub fn normalize(v: DVector<f64>) -> Result<Self> {
        check_finite(&v)?;
        if v.len() < 2 {
            return Err(Error::invalid("sphere dimension n must be at least 2"));
        }
        let norm = v.norm();
        if norm < MIN_RETRACT_NORM {
            return Err(Error::ZeroRetraction { norm });
        }
        Ok(UnitVector(v / norm))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(entries))
    }

    /// The standard basis vector e_i.
    pub fn basis(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::invalid("basis index out of range"));
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self::new(v)
    }

    /// Internal constructor for vectors normalized by the caller.
    pub(crate) fn from_normalized(v: DVector<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() <= UNIT_TOL);
        UnitVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        UnitVector(-&self.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    direction: DVector<f64>,
}

impl TangentVector {
    /// Pairs `direction` with `base`, rejecting non-tangent input.
    pub fn new(base: UnitVector, direction: DVector<f64>) -> Result<Self> {
        check_dim(base.dim(), direction.len())?;
        check_finite(&direction)?;
        let inner = base.0.dot(&direction);
        if inner.abs() > TANGENT_TOL * direction.norm().max(f64::MIN_POSITIVE) && inner != 0.0 {
            return Err(Error::NotTangent { inner });
        }
        Ok(TangentVector { base, direction })
    }

    pub fn zero(base: &UnitVector) -> Self {
        TangentVector {
            base: base.clone(),
            direction: DVector::zeros(base.dim()),
        }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn into_direction(self) -> DVector<f64> {
        self.direction
    }

    pub fn norm(&self) -> f64 {
        self.direction.norm()
    }
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `v - <q, v> q` on raw vectors.
pub(crate) fn project(q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let c = q.dot(v);
    v - q * c
}

pub(crate) fn project_in_place(q: &DVector<f64>, v: &mut DVector<f64>) {
    let c = q.dot(v);
    v.axpy(-c, q, 1.0);
}

/// Normalizes `q + d` on raw vectors.
pub(crate) fn retract_raw(q: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let x = q + d;
    let norm = x.norm();
    if !(norm >= MIN_RETRACT_NORM) {
        return Err(Error::ZeroRetraction { norm });
    }
    Ok(x / norm)
}

/// Projects `v` onto the tangent space at `q`.
pub fn project_tangent(q: &UnitVector, v: &DVector<f64>) -> Result<TangentVector> {
    check_dim(q.dim(), v.len())?;
    check_finite(v)?;
    Ok(TangentVector {
        base: q.clone(),
        direction: project(&q.0, v),
    })
}

/// Metric-projection retraction `(q + d) / |q + d|`.
pub fn retract(q: &UnitVector, d: &TangentVector) -> Result<UnitVector> {
    check_dim(q.dim(), d.direction.len())?;
    let offset = (&q.0 - &d.base.0).amax();
    if offset > UNIT_TOL {
        return Err(Error::invalid("tangent vector is based at a different point"));
    }
    retract_raw(&q.0, &d.direction).map(UnitVector)
}

/// Riemannian gradient: the tangent component of the Euclidean gradient.
pub fn riem_grad(q: &UnitVector, euclid_grad: &DVector<f64>) -> Result<TangentVector> {
    project_tangent(q, euclid_grad)
}

/// Riemannian Hessian applied to a tangent vector:
/// `P (H v - <q, g> v)` where `H v` is supplied by the caller.
pub fn riem_hess_apply(
    q: &UnitVector,
    euclid_grad: &DVector<f64>,
    euclid_hess_vec: &DVector<f64>,
    v: &TangentVector,
) -> Result<TangentVector> {
    let n = q.dim();
    check_dim(n, euclid_grad.len())?;
    check_dim(n, euclid_hess_vec.len())?;
    check_dim(n, v.direction.len())?;
    let inner = q.0.dot(&v.direction);
    if inner.abs() > TANGENT_TOL * v.direction.norm().max(f64::MIN_POSITIVE) && inner != 0.0 {
        return Err(Error::NotTangent { inner });
    }
    Ok(TangentVector {
        base: q.clone(),
        direction: hess_apply_raw(&q.0, euclid_grad, euclid_hess_vec, &v.direction),
    })
}

pub(crate) fn hess_apply_raw(
    q: &DVector<f64>,
    euclid_grad: &DVector<f64>,
    euclid_hess_vec: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let curvature = q.dot(euclid_grad);
    let mut out = euclid_hess_vec - v * curvature;
    project_in_place(q, &mut out);
    out
}

/// Uniform sample on S^{n-1}: a normalized standard normal draw.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitVector> {
    if n < 2 {
        return Err(Error::invalid("sphere dimension n must be at least 2"));
    }
    loop {
        let v = gaussian_vector(n, rng);
        let norm = v.norm();
        if norm > MIN_RETRACT_NORM {
            return Ok(UnitVector(v / norm));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn uv(x: &[f64]) -> UnitVector {
        UnitVector::from_slice(x).unwrap()
    }

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn projection_examples() {
        let t = project_tangent(&uv(&[1.0, 0.0, 0.0]), &dv(&[2.0, 3.0, 0.0])).unwrap();
        assert_eq!(t.direction(), &dv(&[0.0, 3.0, 0.0]));
        let t = project_tangent(&uv(&[1.0, 0.0, 0.0]), &dv(&[5.0, 0.0, 0.0])).unwrap();
        assert_eq!(t.direction(), &dv(&[0.0, 0.0, 0.0]));
        let t = project_tangent(&uv(&[0.0, 1.0]), &dv(&[2.0, 5.0])).unwrap();
        assert_eq!(t.direction(), &dv(&[2.0, 0.0]));
    }

    #[test]
    fn projection_rejects_wrong_length() {
        let err = project_tangent(&uv(&[1.0, 0.0]), &dv(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn retraction_examples() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let q = uv(&[1.0, 0.0]);
        let d = TangentVector::new(q.clone(), dv(&[0.0, 1.0])).unwrap();
        let r = retract(&q, &d).unwrap();
        assert!((r.as_vector() - dv(&[h, h])).amax() < 1e-15);

        let q = uv(&[0.0, 0.0, 1.0]);
        let r = retract(&q, &TangentVector::zero(&q)).unwrap();
        assert_eq!(r, q);

        let q = uv(&[1.0, 0.0]);
        let d = TangentVector::new(q.clone(), dv(&[0.0, -1.0])).unwrap();
        let r = retract(&q, &d).unwrap();
        assert!((r.as_vector() - dv(&[h, -h])).amax() < 1e-15);
    }

    #[test]
    fn retraction_of_antipode_fails() {
        let q = uv(&[1.0, 0.0]);
        // Bypass tangency: antipodal offsets are not tangent, so go through raw.
        let err = retract_raw(q.as_vector(), &dv(&[-1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::ZeroRetraction { .. }));
    }

    #[test]
    fn retraction_needs_matching_base() {
        let q = uv(&[1.0, 0.0]);
        let other = uv(&[0.0, 1.0]);
        let d = TangentVector::zero(&other);
        assert!(retract(&q, &d).is_err());
    }

    #[test]
    fn non_tangent_vectors_are_rejected() {
        let q = uv(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            TangentVector::new(q.clone(), dv(&[0.1, 1.0, 0.0])),
            Err(Error::NotTangent { .. })
        ));
        let v = TangentVector::zero(&q);
        assert!(riem_hess_apply(&q, &dv(&[1.0, 0.0, 0.0]), &dv(&[0.0; 3]), &v).is_ok());
    }

    #[test]
    fn riemannian_gradient_examples() {
        let g = riem_grad(&uv(&[0.0, 1.0]), &dv(&[2.0, 5.0])).unwrap();
        assert_eq!(g.direction(), &dv(&[2.0, 0.0]));
        let g = riem_grad(&uv(&[1.0, 0.0, 0.0]), &dv(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn hessian_of_half_squared_norm_vanishes() {
        let mut rng = seeded(11);
        for _ in 0..5 {
            let q = sample_uniform_sphere(4, &mut rng).unwrap();
            let raw = gaussian_vector(4, &mut rng);
            let v = project_tangent(&q, &raw).unwrap();
            // f = |q|^2 / 2: grad = q, hess = I.
            let h = riem_hess_apply(&q, q.as_vector(), v.direction(), &v).unwrap();
            assert!(h.norm() < 1e-14);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_unit() {
        let a = sample_uniform_sphere(4, &mut seeded(7)).unwrap();
        let b = sample_uniform_sphere(4, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
        assert!((a.as_vector().norm() - 1.0).abs() < 1e-12);
        assert!(sample_uniform_sphere(1, &mut seeded(7)).is_err());
    }

    #[test]
    fn sample_mean_concentrates() {
        // Each coordinate of a uniform point on S^2 has variance 1/3, so the
        // empirical-mean norm over 1e4 draws is about 0.01; 0.05 is > 3 sigma.
        let mut rng = seeded(5);
        let mut mean = DVector::zeros(3);
        let m = 10_000;
        for _ in 0..m {
            mean += sample_uniform_sphere(3, &mut rng).unwrap().as_vector();
        }
        mean /= m as f64;
        assert!(mean.norm() <= 0.05, "mean norm {}", mean.norm());
    }

    proptest! {
        #[test]
        fn projection_is_orthogonal_and_idempotent(
            seed in 0u64..10_000,
            n in 2usize..12,
        ) {
            let mut rng = seeded(seed);
            let q = sample_uniform_sphere(n, &mut rng).unwrap();
            let v = gaussian_vector(n, &mut rng) * 3.0;
            let once = project_tangent(&q, &v).unwrap();
            prop_assert!(q.as_vector().dot(once.direction()).abs() <= 1e-10 * v.norm());
            let twice = project_tangent(&q, once.direction()).unwrap();
            prop_assert!((twice.direction() - once.direction()).amax() <= 1e-14 * v.norm().max(1.0));
        }

        #[test]
        fn retracting_zero_is_identity(seed in 0u64..10_000, n in 2usize..12) {
            let q = sample_uniform_sphere(n, &mut seeded(seed)).unwrap();
            let r = retract(&q, &TangentVector::zero(&q)).unwrap();
            prop_assert!((r.as_vector() - q.as_vector()).amax() <= 1e-15);
        }
    }
}
