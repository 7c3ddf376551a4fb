use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::circulant::{circ_conv, circulant_matrix, dft_magnitudes};
use super::{GenParams, ModelKind, ProblemInstance, TargetSet};
use crate::error::{Error, Result};
use crate::linalg::orthogonal_factor;
use crate::rng::{bernoulli_gaussian, gaussian_matrix, gaussian_vector, seeded};
use crate::sphere::{sample_uniform_sphere, UnitVector};

/// Kernels are redrawn until `min_k |DFT(a0)_k| >= floor * |a0|`.
pub const KERNEL_INVERTIBILITY_FLOOR: f64 = 1e-3;

fn check_theta(theta: f64, allow_zero: bool) -> Result<()> {
    let ok = theta.is_finite() && theta <= 1.0 && if allow_zero { theta >= 0.0 } else { theta > 0.0 };
    if ok {
        Ok(())
    } else if allow_zero {
        Err(Error::invalid("theta must lie in [0, 1]"))
    } else {
        Err(Error::invalid("theta must lie in (0, 1]"))
    }
}

/// Robust subspace recovery data: `p1` unit inliers spanning an
/// (n - r)-dimensional subspace, `p2` outliers uniform on the sphere, columns
/// randomly permuted. Targets are the normals of the inlier subspace.
pub fn gen_dpcp(n: usize, r: usize, p1: usize, p2: usize, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::invalid("dpcp requires n >= 2"));
    }
    if r < 1 || r >= n {
        return Err(Error::invalid(alloc::format!(
            "dpcp requires 1 <= r < n (got r = {r}, n = {n})"
        )));
    }
    if p1 + p2 < 1 {
        return Err(Error::invalid("dpcp requires p1 + p2 >= 1"));
    }
    let mut rng = seeded(seed);
    let frame = orthogonal_factor(gaussian_matrix(n, n, &mut rng));
    let inlier_dim = n - r;
    let span = frame.columns(0, inlier_dim).into_owned();
    let normals = frame.columns(inlier_dim, r).into_owned();

    let p = p1 + p2;
    let mut points: Vec<DVector<f64>> = Vec::with_capacity(p);
    for _ in 0..p1 {
        let coeffs = if inlier_dim == 1 {
            // S^0 = {+1, -1}.
            let s = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
            DVector::from_element(1, s)
        } else {
            sample_uniform_sphere(inlier_dim, &mut rng)?.into_inner()
        };
        let x = &span * coeffs;
        let norm = x.norm();
        points.push(x / norm);
    }
    for _ in 0..p2 {
        points.push(sample_uniform_sphere(n, &mut rng)?.into_inner());
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);

    let mut data = DMatrix::zeros(n, p);
    let mut inliers = Vec::with_capacity(p);
    for (j, &src) in order.iter().enumerate() {
        data.set_column(j, &points[src]);
        inliers.push(src < p1);
    }
    Ok(ProblemInstance {
        data,
        kind: ModelKind::Dpcp,
        targets: Some(TargetSet::SubspaceComplement { basis: normals }),
        params: GenParams {
            n,
            p,
            r: Some(r),
            p1: Some(p1),
            p2: Some(p2),
            theta: None,
            seed: Some(seed),
        },
        code: None,
        inliers: Some(inliers),
        kernel: None,
    })
}

/// Orthogonal dictionary learning data `Y = A X` with Haar-random orthogonal
/// A and Bernoulli(theta)-Gaussian X.
pub fn gen_odl(n: usize, p: usize, theta: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 || p < 1 {
        return Err(Error::invalid("odl requires n >= 2 and p >= 1"));
    }
    check_theta(theta, true)?;
    let mut rng = seeded(seed);
    let dictionary = orthogonal_factor(gaussian_matrix(n, n, &mut rng));
    let code = crate::rng::bernoulli_gaussian_matrix(n, p, theta, &mut rng);
    let mut inst = ProblemInstance::odl_from_parts(dictionary, code)?;
    inst.params.theta = Some(theta);
    inst.params.seed = Some(seed);
    Ok(inst)
}

/// Planted sparse vector (note the `(p, n)` argument order): a Bernoulli(theta)-Gaussian x0 in R^p hidden in an
/// n-dimensional subspace with an otherwise Gaussian basis. The rows of Y are
/// an orthonormal, randomly rotated basis of span{x0, g_1, ..., g_{n-1}}.
pub fn gen_psv(p: usize, n: usize, theta: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 || n >= p {
        return Err(Error::invalid(alloc::format!(
            "psv requires 2 <= n < p (got n = {n}, p = {p})"
        )));
    }
    check_theta(theta, false)?;
    let mut rng = seeded(seed);
    let sparse = loop {
        let x = DVector::from_fn(p, |_, _| bernoulli_gaussian(theta, &mut rng));
        if x.iter().any(|&v| v != 0.0) {
            break x;
        }
    };
    let mut rows = gaussian_matrix(n, p, &mut rng);
    rows.set_row(0, &sparse.transpose());
    orthonormalize_rows(&mut rows)?;
    let rotation = orthogonal_factor(gaussian_matrix(n, n, &mut rng));
    let data = rotation * rows;
    let target = UnitVector::normalize(&data * &sparse)?;
    Ok(ProblemInstance {
        data,
        kind: ModelKind::Psv,
        targets: Some(TargetSet::PlantedVector { target }),
        params: GenParams {
            n,
            p,
            r: None,
            p1: None,
            p2: None,
            theta: Some(theta),
            seed: Some(seed),
        },
        code: Some(DMatrix::from_row_slice(1, p, sparse.as_slice())),
        inliers: None,
        kernel: None,
    })
}

/// Modified Gram-Schmidt on the rows, in order, with one reorthogonalization
/// pass.
fn orthonormalize_rows(m: &mut DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for _pass in 0..2 {
            for k in 0..i {
                let c = m.row(i).dot(&m.row(k));
                for j in 0..m.ncols() {
                    m[(i, j)] -= c * m[(k, j)];
                }
            }
        }
        let norm = m.row(i).norm();
        if norm < 1e-12 {
            return Err(Error::invalid("rows are linearly dependent"));
        }
        let mut ri = m.row_mut(i);
        ri /= norm;
    }
    Ok(())
}

/// Multichannel sparse blind deconvolution: `y_i = a0 ⊛ x_i` for `p`
/// channels, lifted to `Y = [C_y1 ... C_yp]` (n x np).
pub fn gen_mcsbd(n: usize, p: usize, theta: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 || p < 1 {
        return Err(Error::invalid("mcsbd requires n >= 2 and p >= 1"));
    }
    check_theta(theta, false)?;
    let mut rng = seeded(seed);
    let kernel = loop {
        let a = gaussian_vector(n, &mut rng);
        let floor = KERNEL_INVERTIBILITY_FLOOR * a.norm();
        if dft_magnitudes(&a).iter().all(|&m| m >= floor) {
            break a;
        }
    };
    let signals: Vec<DVector<f64>> = (0..p)
        .map(|_| DVector::from_fn(n, |_, _| bernoulli_gaussian(theta, &mut rng)))
        .collect();
    let mut inst = mcsbd_from_parts(kernel, &signals)?;
    inst.params.theta = Some(theta);
    inst.params.seed = Some(seed);
    Ok(inst)
}

/// Lifted deconvolution instance from an explicit kernel and signals.
pub fn mcsbd_from_parts(kernel: DVector<f64>, signals: &[DVector<f64>]) -> Result<ProblemInstance> {
    let n = kernel.len();
    let p = signals.len();
    if n < 2 || p < 1 {
        return Err(Error::invalid("mcsbd requires n >= 2 and at least one channel"));
    }
    let mut data = DMatrix::zeros(n, n * p);
    let mut code = DMatrix::zeros(n, n * p);
    for (i, x) in signals.iter().enumerate() {
        let y = circ_conv(&kernel, x)?;
        data.view_mut((0, i * n), (n, n)).copy_from(&circulant_matrix(&y)?);
        code.view_mut((0, i * n), (n, n)).copy_from(&circulant_matrix(x)?);
    }
    let ck_t = circulant_matrix(&kernel)?.transpose();
    let inv_t = ck_t
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::invalid("kernel is not invertible"))?;
    let mut columns = inv_t;
    for mut col in columns.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(ProblemInstance {
        data,
        kind: ModelKind::Mcsbd,
        targets: Some(TargetSet::SignedShifts { columns }),
        params: GenParams {
            n,
            p,
            ..GenParams::default()
        },
        code: Some(code),
        inliers: None,
        kernel: Some(kernel),
    })
}
