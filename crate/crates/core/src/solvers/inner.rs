//! Constrained l1 subproblem shared by ALP, ManPPA, rounding and the
//! l1/l-infinity baseline:
//!
//! minimize |Y^T q|_1 + (s/2)|q - anchor|^2  subject to  c^T q = b.
//!
//! Solved by ADMM on the split z = Y^T q, with periodic active-set polishing
//! that lands exactly on the optimal face once the support is identified.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::config::InnerSettings;
use crate::error::{check_dim, Error, Result};
use crate::linalg::sym_eigen_sorted;
use crate::loss::sign;

const OVER_RELAXATION: f64 = 1.6;
const POLISH_EVERY: usize = 50;
const ADAPT_EVERY: usize = 10;
const RHO_MIN: f64 = 1e-8;
const RHO_MAX: f64 = 1e8;
/// Relative eigenvalue level treated as zero when extracting null spaces.
const NULL_TOL: f64 = 1e-11;

/// `c^T q = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub c: DVector<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(c: DVector<f64>, b: f64) -> Result<Self> {
        if !(c.norm() > 0.0) || !c.iter().all(|x| x.is_finite()) || !b.is_finite() {
            return Err(Error::invalid("constraint vector must be finite and nonzero"));
        }
        Ok(LinearConstraint { c, b })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub q: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Whether the returned point came from an exact active-set solve.
    pub polished: bool,
}

/// `(s/2)|q - anchor|^2` with `s >= 0`; the anchor is ignored when `s = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Proximal<'a> {
    pub s: f64,
    pub anchor: Option<&'a DVector<f64>>,
}

impl Proximal<'_> {
    pub const NONE: Proximal<'static> = Proximal { s: 0.0, anchor: None };
}

/// Solves the subproblem from a cold start.
pub fn inner_convex(
    data: &DMatrix<f64>,
    constraint: &LinearConstraint,
    prox: Proximal<'_>,
    settings: &InnerSettings,
) -> Result<InnerSolution> {
    let mut engine = InnerEngine::new(data, settings)?;
    engine.solve(constraint, prox)
}

/// KKT residual of `q` for the subproblem, using the best dual certificate
/// reachable from the sign pattern of `Y^T q`.
pub fn kkt_residual(
    data: &DMatrix<f64>,
    constraint: &LinearConstraint,
    prox: Proximal<'_>,
    q: &DVector<f64>,
) -> Result<f64> {
    check_dim(data.nrows(), q.len())?;
    check_dim(data.nrows(), constraint.c.len())?;
    let z = data.tr_mul(q);
    let tol = 1e-12 * z.amax().max(f64::MIN_POSITIVE);
    let active: Vec<bool> = z.iter().map(|x| x.abs() <= tol).collect();
    let guess = DVector::zeros(z.len());
    Ok(certify(data, constraint, prox, q, &active, &guess))
}

/// Cached factorizations for repeated solves on the same data.
pub(crate) struct InnerEngine<'a> {
    data: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    settings: InnerSettings,
    factor: Option<(f64, f64, f64, Cholesky<f64, Dyn>)>,
    warm: Option<(DVector<f64>, DVector<f64>, f64)>,
}

impl<'a> InnerEngine<'a> {
    pub(crate) fn new(data: &'a DMatrix<f64>, settings: &InnerSettings) -> Result<Self> {
        if !settings.tol.is_finite() || settings.tol <= 0.0 || settings.max_iters == 0 {
            return Err(Error::invalid("inner settings need tol > 0 and max_iters > 0"));
        }
        let gram = data * data.transpose();
        Ok(InnerEngine {
            data,
            gram,
            settings: *settings,
            factor: None,
            warm: None,
        })
    }

    /// Drops the warm start (needed when the next problem is unrelated).
    pub(crate) fn reset(&mut self) {
        self.warm = None;
    }

    fn factor(&mut self, s: f64, rho: f64) -> Result<(f64, &Cholesky<f64, Dyn>)> {
        let stale = match &self.factor {
            Some((fs, frho, _, _)) => *fs != s || *frho != rho,
            None => true,
        };
        if stale {
            let n = self.gram.nrows();
            let trace = self.gram.trace() / n as f64;
            let mut eps = 0.0;
            let chol = loop {
                let mut m = &self.gram * rho;
                for i in 0..n {
                    m[(i, i)] += s + eps;
                }
                if let Some(ch) = Cholesky::new(m) {
                    // Reject numerically singular factors too.
                    let d = ch.l_dirty().diagonal();
                    let lo = d.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs()));
                    let hi = d.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                    if lo > 1e-7 * hi {
                        break ch;
                    }
                }
                eps = if eps == 0.0 {
                    1e-10 * (rho * trace + s).max(1e-300)
                } else {
                    eps * 100.0
                };
                if eps > 1e300 {
                    return Err(Error::NonFinite);
                }
            };
            self.factor = Some((s, rho, eps, chol));
        }
        let (_, _, eps, ch) = self.factor.as_ref().unwrap();
        Ok((*eps, ch))
    }

    pub(crate) fn solve(&mut self, constraint: &LinearConstraint, prox: Proximal<'_>) -> Result<InnerSolution> {
        let n = self.data.nrows();
        let p = self.data.ncols();
        check_dim(n, constraint.c.len())?;
        if let Some(a) = prox.anchor {
            check_dim(n, a.len())?;
        }
        let s = prox.s;
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::invalid("proximal weight s must be finite and nonnegative"));
        }
        let c = &constraint.c;
        let b = constraint.b;
        let anchor_term: DVector<f64> = match prox.anchor {
            Some(a) if s > 0.0 => a * s,
            _ => DVector::zeros(n),
        };

        // Degenerate data: only the constraint and proximal term matter.
        if self.data.iter().all(|&x| x == 0.0) {
            let q = affine_prox(c, b, prox);
            let kkt = certify(self.data, constraint, prox, &q, &alloc::vec![true; p], &DVector::zeros(p));
            return Ok(InnerSolution { q, iterations: 0, kkt_residual: kkt, polished: true });
        }

        let (mut z, mut u, mut rho) = match self.warm.take() {
            Some((z, u, rho)) if z.len() == p => (z, u, rho),
            _ => {
                let q0 = match prox.anchor {
                    Some(a) if s > 0.0 => a.clone(),
                    _ => c * (b / c.norm_squared()),
                };
                let z0 = self.data.tr_mul(&q0);
                // The configured penalty is in units of the mean |z| at the start.
                let mean = z0.iter().map(|x| x.abs()).sum::<f64>() / p as f64;
                let rho = if mean > 0.0 {
                    (self.settings.rho / mean).clamp(RHO_MIN, RHO_MAX)
                } else {
                    self.settings.rho
                };
                (z0, DVector::zeros(p), rho)
            }
        };
        let mut q = DVector::zeros(n);
        let mut q_prev: DVector<f64>;
        let mut last_polish_pattern: Option<Vec<i8>> = None;
        let mut best_residual = f64::INFINITY;

        let mut mc = {
            let (_, ch) = self.factor(s, rho)?;
            ch.solve(c)
        };
        let mut cmc = c.dot(&mc);
        let zn_scale = |v: &DVector<f64>| v.norm().max(f64::MIN_POSITIVE);

        for it in 1..=self.settings.max_iters {
            q_prev = q.clone();
            // q-step: min (s/2)|q - a|^2 + (rho/2)|Y^T q - z + u|^2 s.t. c^T q = b.
            let mut rhs = &anchor_term + self.data * ((&z - &u) * rho);
            let (eps, ch) = self.factor(s, rho)?;
            if eps > 0.0 {
                rhs.axpy(eps, &q_prev, 1.0);
            }
            let t = ch.solve(&rhs);
            let lambda = (c.dot(&t) - b) / cmc;
            q = t - &mc * lambda;

            let yq = self.data.tr_mul(&q);
            let x_hat = &yq * OVER_RELAXATION + &z * (1.0 - OVER_RELAXATION);
            let z_old = z.clone();
            let inv = 1.0 / rho;
            z = (&x_hat + &u).map(|x| soft(x, inv));
            u += &x_hat - &z;

            let r_pri = (&yq - &z).norm() / zn_scale(&yq).max(z.norm()).max(1e-300);
            let adapt = it % ADAPT_EVERY == 0;
            let r_dual = if adapt || r_pri <= self.settings.tol {
                let dual_vec = self.data * (&z - &z_old);
                let y_dual = self.data * &u;
                dual_vec.norm() / y_dual.norm().max(1e-300)
            } else {
                f64::INFINITY
            };

            if it % POLISH_EVERY == 0 || it == self.settings.max_iters {
                let pattern: Vec<i8> = z.iter().map(|&x| sign(x) as i8).collect();
                if last_polish_pattern.as_ref() != Some(&pattern) {
                    let v_guess = &u * rho;
                    if let Some((qp, res)) = self.polish(constraint, prox, &pattern, &v_guess, &q) {
                        best_residual = best_residual.min(res);
                        if res <= self.settings.tol {
                            self.warm = Some((z, u, rho));
                            return Ok(InnerSolution {
                                q: qp,
                                iterations: it,
                                kkt_residual: res,
                                polished: true,
                            });
                        }
                    }
                    last_polish_pattern = Some(pattern);
                }
            }

            if r_pri <= self.settings.tol && r_dual <= self.settings.tol {
                let tol = 1e-12 * yq.amax().max(f64::MIN_POSITIVE);
                let active: Vec<bool> = z.iter().zip(yq.iter()).map(|(&zi, &y)| zi == 0.0 || y.abs() <= tol).collect();
                let res = certify(self.data, constraint, prox, &q, &active, &(&u * rho));
                self.warm = Some((z, u, rho));
                return Ok(InnerSolution { q, iterations: it, kkt_residual: res, polished: false });
            }

            if adapt {
                let mut changed = false;
                if r_pri > 10.0 * r_dual && rho < RHO_MAX {
                    rho *= 2.0;
                    u *= 0.5;
                    changed = true;
                } else if r_dual > 10.0 * r_pri && rho > RHO_MIN {
                    rho *= 0.5;
                    u *= 2.0;
                    changed = true;
                }
                if changed {
                    let (_, ch) = self.factor(s, rho)?;
                    mc = ch.solve(c);
                    cmc = c.dot(&mc);
                }
            }
        }
        self.warm = None;
        Err(Error::SubproblemFail {
            iterations: self.settings.max_iters,
            residual: best_residual,
        })
    }

    /// Exact solve on the face where `z_i = 0` for `pattern_i = 0` and the
    /// remaining signs are fixed.
    fn polish(
        &self,
        constraint: &LinearConstraint,
        prox: Proximal<'_>,
        pattern: &[i8],
        v_guess: &DVector<f64>,
        q_admm: &DVector<f64>,
    ) -> Option<(DVector<f64>, f64)> {
        let n = self.data.nrows();
        let c = &constraint.c;
        let b = constraint.b;
        let active: Vec<bool> = pattern.iter().map(|&x| x == 0).collect();
        let a_idx: Vec<usize> = (0..pattern.len()).filter(|&i| active[i]).collect();

        let w = if a_idx.is_empty() {
            DMatrix::identity(n, n)
        } else {
            let ya = self.data.select_columns(a_idx.iter());
            let g = &ya * ya.transpose();
            let eig = sym_eigen_sorted(g);
            let top = eig.values[n - 1].max(0.0);
            let k = eig.values.iter().filter(|&&x| x <= NULL_TOL * top).count();
            if k == 0 {
                return None;
            }
            eig.vectors.columns(0, k).into_owned()
        };
        let h = w.tr_mul(c);
        let hh = h.norm_squared();
        if !(hh > 1e-24 * c.norm_squared()) {
            return None;
        }
        let s = prox.s;
        let beta = if s > 0.0 {
            let mut lin = DVector::zeros(self.data.ncols());
            for (i, &sg) in pattern.iter().enumerate() {
                lin[i] = sg as f64;
            }
            let g = w.tr_mul(&(self.data * lin));
            let anchor = match prox.anchor {
                Some(a) => w.tr_mul(a),
                None => DVector::zeros(w.ncols()),
            };
            let t = anchor - g / s;
            let coef = (b - h.dot(&t)) / hh;
            t + &h * coef
        } else {
            let t = w.tr_mul(q_admm);
            let coef = (b - h.dot(&t)) / hh;
            t + &h * coef
        };
        let q = &w * beta;
        // Entries that vanish on the face without being forced are active too.
        let zq = self.data.tr_mul(&q);
        let tiny = 1e-12 * zq.amax().max(f64::MIN_POSITIVE);
        let active: Vec<bool> = active.iter().zip(zq.iter()).map(|(&a, &x)| a || x.abs() <= tiny).collect();
        let res = certify(self.data, constraint, prox, &q, &active, v_guess);
        Some((q, res))
    }
}

fn soft(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Minimizer of the proximal term on the constraint plane (or the
/// least-norm feasible point when `s = 0`).
fn affine_prox(c: &DVector<f64>, b: f64, prox: Proximal<'_>) -> DVector<f64> {
    match prox.anchor {
        Some(a) if prox.s > 0.0 => a + c * ((b - c.dot(a)) / c.norm_squared()),
        _ => c * (b / c.norm_squared()),
    }
}

/// Builds a dual certificate (v, lambda) for `q` with `v = sign(Y^T q)` off
/// the active set and a least-norm correction of `v_guess` on it, then
/// returns the combined KKT residual.
fn certify(
    data: &DMatrix<f64>,
    constraint: &LinearConstraint,
    prox: Proximal<'_>,
    q: &DVector<f64>,
    active: &[bool],
    v_guess: &DVector<f64>,
) -> f64 {
    let n = data.nrows();
    let c = &constraint.c;
    let z = data.tr_mul(q);
    let mut v = DVector::from_fn(z.len(), |i, _| {
        if active[i] {
            v_guess[i].clamp(-1.0, 1.0)
        } else {
            sign(z[i])
        }
    });
    let prox_grad = match prox.anchor {
        Some(a) if prox.s > 0.0 => (q - a) * prox.s,
        _ => DVector::zeros(n),
    };
    let r0 = &prox_grad + data * &v;

    let a_idx: Vec<usize> = (0..z.len()).filter(|&i| active[i]).collect();
    let mut kkt = c * c.transpose();
    let ya = data.select_columns(a_idx.iter());
    if !a_idx.is_empty() {
        kkt += &ya * ya.transpose();
    }
    let eig = sym_eigen_sorted(kkt);
    let top = eig.values[n - 1].max(f64::MIN_POSITIVE);
    let proj = eig.vectors.tr_mul(&r0);
    let mut x = DVector::zeros(n);
    for j in 0..n {
        if eig.values[j] > 1e-14 * top {
            x.axpy(-proj[j] / eig.values[j], &eig.vectors.column(j), 1.0);
        }
    }
    if !a_idx.is_empty() {
        let dv = ya.tr_mul(&x);
        for (k, &i) in a_idx.iter().enumerate() {
            v[i] += dv[k];
        }
    }
    let lambda = c.dot(&x);

    let stationarity = (&prox_grad + data * &v + c * lambda).amax();
    let scale = 1.0 + row_sum_max(data);
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs() - 1.0));
    let zmax = z.amax();
    let prox_res = z
        .iter()
        .zip(v.iter())
        .fold(0.0f64, |m, (&zi, &vi)| m.max((zi - soft(zi + vi, 1.0)).abs()));
    let feas = (c.dot(q) - constraint.b).abs() / constraint.b.abs().max(1.0);
    let res = feas
        .max(stationarity / scale)
        .max(bound)
        .max(prox_res / (1.0 + zmax));
    res
}

fn row_sum_max(data: &DMatrix<f64>) -> f64 {
    (0..data.nrows())
        .map(|i| data.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}
