use super::*;
use crate::diagnostics::{dist_to_targets, tangent_hessian_spectrum};
use crate::loss::LossSpec;
use crate::models::{gen_dpcp, gen_odl, TargetSet};
use crate::rng::{gaussian_matrix, seeded};
use crate::sphere::sample_uniform_sphere;
use alloc::vec::Vec;

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn uv(x: &[f64]) -> UnitVector {
    UnitVector::normalize(dv(x)).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// Exhaustive search of `f(cos t, sin t)` over a uniform grid on `[lo, hi)`.
fn grid_minimizer_on(obj: &Objective, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::INFINITY, lo);
    for i in 0..steps {
        let t = lo + i as f64 * step;
        let q = dv(&[t.cos(), t.sin()]);
        let f = obj.value_raw(&q);
        if f < best.0 {
            best = (f, t);
        }
    }
    best
}

fn grid_minimizer_2d(obj: &Objective, step: f64) -> (f64, f64) {
    grid_minimizer_on(obj, 0.0, core::f64::consts::PI, step)
}

fn angle_to(q: &UnitVector, t: f64) -> f64 {
    let c = (q.as_slice()[0] * t.cos() + q.as_slice()[1] * t.sin()).abs().min(1.0);
    c.acos()
}

#[test]
fn spectral_init_examples() {
    let mut y = DMatrix::zeros(2, 11);
    for j in 0..10 {
        y[(0, j)] = 1.0;
    }
    y[(1, 10)] = 1.0;
    assert_eq!(init_spectral(&y).unwrap().as_slice(), &[0.0, 1.0]);
    assert_eq!(init_spectral(&DMatrix::identity(4, 4)).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);

    let inst = gen_dpcp(6, 1, 50, 0, 4).unwrap();
    let q = init_spectral(&inst.data).unwrap();
    let d = dist_to_targets(&q, inst.targets.as_ref().unwrap()).unwrap();
    assert!(d <= 1e-8, "dist {d}");
    let k = crate::linalg::argmax_abs(q.as_vector());
    assert!(q.as_slice()[k] > 0.0);
}

#[test]
fn rgd_returns_at_minimizer() {
    let obj = Objective::new(DMatrix::identity(3, 3), LossSpec::logcosh(0.1).unwrap()).unwrap();
    let res = solve_rgd(&obj, &UnitVector::basis(3, 0).unwrap(), &cfg()).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert_eq!(res.iterations(), 0);
    assert!(matches!(
        solve_rgd(&obj.with_loss(LossSpec::l1()), &UnitVector::basis(3, 0).unwrap(), &cfg()),
        Err(Error::NonSmoothLoss(_))
    ));
}

#[test]
fn rgd_identity_data_picks_largest_coordinate() {
    let obj = Objective::new(DMatrix::identity(3, 3), LossSpec::logcosh(0.1).unwrap()).unwrap();
    let config = cfg().with_schedule(StepSchedule::DEFAULT_BACKTRACKING).with_max_iters(5000);
    let res = solve_rgd(&obj, &uv(&[0.6, 0.8, 0.0]), &config).unwrap();
    assert_eq!(res.status, Status::Converged);
    let q = res.q_final.as_slice();
    assert!((q[1].abs() - 1.0).abs() <= 0.1 * 0.1 && q[1] > 0.0);
    // The iterate stays on the (e1, e2) circle; compare with a grid over the
    // quarter arc around e2 (e1 and e2 tie on the full circle).
    let sub = Objective::new(DMatrix::identity(2, 2), LossSpec::logcosh(0.1).unwrap()).unwrap();
    let quarter = core::f64::consts::FRAC_PI_4;
    let (_, t) = grid_minimizer_on(&sub, quarter, 3.0 * quarter, 1e-5);
    assert_eq!(q[2], 0.0);
    let on_circle = UnitVector::from_slice(&[q[0], q[1]]).unwrap_or_else(|_| uv(&[q[0], q[1]]));
    assert!(angle_to(&on_circle, t) <= 1e-4);
}

#[test]
fn backtracking_rgd_is_monotone_with_armijo() {
    let mut rng = seeded(3);
    let y = gaussian_matrix(6, 40, &mut rng);
    let obj = Objective::new(y, LossSpec::pseudo_huber(0.1).unwrap()).unwrap();
    let q0 = sample_uniform_sphere(6, &mut rng).unwrap();
    let config = cfg().with_schedule(StepSchedule::DEFAULT_BACKTRACKING).with_max_iters(200);
    let mon = Monitor::new().recording_iterates();
    let res = solve_with(SolverKind::Rgd, &obj, &q0, &config, &mon).unwrap();
    let recs = &res.trace.records;
    for k in 1..recs.len() {
        let step = (&res.trace.iterates[k] - &res.trace.iterates[k - 1]).norm();
        // Below this band f cannot certify a decrease and the line search
        // judges steps by slope instead.
        let band = 1e3 * f64::EPSILON * recs[k - 1].f.abs().max(1.0);
        assert!(recs[k].f <= recs[k - 1].f + band);
        // Armijo with c = 1e-4 and the step length |eta g| ~ |q_{k+1} - q_k|.
        assert!(recs[k].f <= recs[k - 1].f - 1e-4 * step * recs[k - 1].grad_norm * 0.5 + band);
    }
}

#[test]
fn rsg_stops_at_exact_null_vector() {
    let mut y = DMatrix::zeros(3, 2);
    y[(0, 0)] = 1.0;
    y[(1, 1)] = 1.0;
    let obj = Objective::new(y, LossSpec::l1()).unwrap();
    let q0 = UnitVector::basis(3, 2).unwrap();
    let res = solve_rsg(&obj, &q0, &cfg()).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert_eq!(res.iterations(), 0);
    assert_eq!(res.q_final, q0);
    let smooth = obj.with_loss(LossSpec::logcosh(0.1).unwrap());
    assert!(matches!(solve_rsg(&smooth, &q0, &cfg()), Err(Error::RequiresL1(_))));
}

#[test]
fn rtr_returns_at_minimizer_and_escapes_saddle() {
    let obj = Objective::new(DMatrix::identity(3, 3), LossSpec::logcosh(0.1).unwrap()).unwrap();
    let res = solve_rtr(&obj, &UnitVector::basis(3, 1).unwrap(), &cfg()).unwrap();
    assert_eq!(res.iterations(), 0);
    assert_eq!(res.status, Status::Converged);

    let saddle = uv(&[1.0, 1.0, 1.0]);
    let eigs = tangent_hessian_spectrum(&obj, &saddle).unwrap();
    assert!(eigs[0] < 0.0);
    let res = solve_rtr(&obj, &saddle, &cfg().with_max_iters(200)).unwrap();
    assert_eq!(res.status, Status::Converged);
    let recs = &res.trace.records;
    assert!(recs[1].f < recs[0].f, "first step must decrease along negative curvature");
    let q = res.q_final.as_vector();
    let k = crate::linalg::argmax_abs(q);
    assert!(q[k].abs() >= 1.0 - 0.1, "q = {q:?}");
    assert!(matches!(
        solve_rtr(&obj.with_loss(LossSpec::huber(0.1).unwrap()), &saddle, &cfg()),
        Err(Error::NotTwiceDifferentiable(_))
    ));
    let mut allow = cfg();
    allow.allow_huber_second_order = true;
    assert!(solve_rtr(&obj.with_loss(LossSpec::huber(0.1).unwrap()), &saddle, &allow).is_ok());
}

#[test]
fn inner_convex_examples() {
    let s = InnerSettings::default();
    let y = DMatrix::identity(2, 2);
    let c1 = LinearConstraint::new(dv(&[1.0, 0.0]), 1.0).unwrap();
    let sol = inner_convex(&y, &c1, Proximal::NONE, &s).unwrap();
    assert!((sol.q - dv(&[1.0, 0.0])).amax() <= 1e-9);
    let c2 = LinearConstraint::new(dv(&[0.8, 0.6]), 1.0).unwrap();
    let sol = inner_convex(&y, &c2, Proximal::NONE, &s).unwrap();
    assert!((&sol.q - dv(&[1.25, 0.0])).amax() <= 1e-9, "{:?}", sol.q);
    assert!(sol.kkt_residual <= 1e-10);
    assert!(LinearConstraint::new(dv(&[0.0, 0.0]), 1.0).is_err());
}

#[test]
fn inner_convex_matches_brute_force_on_plane() {
    let mut rng = seeded(17);
    let y = gaussian_matrix(3, 10, &mut rng);
    let qbar = sample_uniform_sphere(3, &mut rng).unwrap();
    let c = LinearConstraint::new(qbar.as_vector().clone(), 1.0).unwrap();
    let sol = inner_convex(&y, &c, Proximal::NONE, &InnerSettings::default()).unwrap();
    let f = |q: &DVector<f64>| y.tr_mul(q).abs().sum();
    // Parameterize the plane q = qbar + a u + b v and search a fine grid,
    // then refine around the best cell.
    let basis = crate::linalg::tangent_basis(qbar.as_vector());
    let (u, v) = (basis.column(0).into_owned(), basis.column(1).into_owned());
    let mut center = (0.0, 0.0);
    let mut width = 4.0;
    let mut best = f64::INFINITY;
    for _ in 0..12 {
        let m = 40;
        let mut local = (f64::INFINITY, center);
        for i in 0..=m {
            for j in 0..=m {
                let a = center.0 - width + 2.0 * width * i as f64 / m as f64;
                let b = center.1 - width + 2.0 * width * j as f64 / m as f64;
                let q = qbar.as_vector() + &u * a + &v * b;
                let val = f(&q);
                if val < local.0 {
                    local = (val, (a, b));
                }
            }
        }
        best = best.min(local.0);
        center = local.1;
        width *= 0.25;
    }
    assert!((f(&sol.q) - best).abs() <= 1e-6, "{} vs {}", f(&sol.q), best);
    assert!((sol.q.dot(qbar.as_vector()) - 1.0).abs() <= 1e-10);
}

#[test]
fn inner_convex_kkt_holds_with_proximal_term() {
    let mut rng = seeded(5);
    let y = gaussian_matrix(5, 30, &mut rng);
    for _ in 0..5 {
        let q = sample_uniform_sphere(5, &mut rng).unwrap();
        let c = LinearConstraint::new(q.as_vector().clone(), 1.0).unwrap();
        let prox = Proximal { s: 0.7, anchor: Some(q.as_vector()) };
        let settings = InnerSettings::default();
        let sol = inner_convex(&y, &c, prox, &settings).unwrap();
        assert!(sol.kkt_residual <= settings.tol, "kkt {}", sol.kkt_residual);
        assert!(kkt_residual(&y, &c, prox, &sol.q).unwrap() <= 1e-8);
    }
}

#[test]
fn alp_fixed_point_and_manppa_limit() {
    let obj = Objective::new(DMatrix::identity(3, 3), LossSpec::l1()).unwrap();
    let res = solve_alp(&obj, &UnitVector::basis(3, 0).unwrap(), &cfg()).unwrap();
    assert_eq!(res.status, Status::Converged);
    assert!((res.q_final.as_vector() - DVector::from_column_slice(&[1.0, 0.0, 0.0])).amax() <= 1e-10);
    assert_eq!(res.iterations(), 1);

    let inst = gen_dpcp(8, 2, 60, 40, 9).unwrap();
    let obj = Objective::new(inst.data.clone(), LossSpec::l1()).unwrap();
    let q0 = init_spectral(&inst.data).unwrap();
    let config = cfg().with_max_iters(5);
    let mon = Monitor::new().recording_iterates();
    let a = solve_with(SolverKind::Alp, &obj, &q0, &config, &mon).unwrap();
    let m = solve_with(SolverKind::ManPpa { t: 1e12, alpha: 1.0 }, &obj, &q0, &config, &mon).unwrap();
    for (x, y) in a.trace.iterates.iter().zip(m.trace.iterates.iter()) {
        assert!((x - y).norm() <= 1e-6);
    }
}

#[test]
fn irls_examples() {
    let obj = Objective::new(DMatrix::identity(3, 3), LossSpec::l1()).unwrap();
    let config = cfg().with_max_iters(1);
    let res = solve_irls(&obj, &uv(&[0.6, 0.8, 0.0]), 1e-12, &config).unwrap();
    assert!((res.q_final.as_vector() - dv(&[0.0, 1.0, 0.0])).amax() <= 1e-12);

    let mut rng = seeded(21);
    let y = gaussian_matrix(5, 50, &mut rng);
    let obj = Objective::new(y.clone(), LossSpec::l1()).unwrap();
    let q = sample_uniform_sphere(5, &mut rng).unwrap();
    let w = irls_weights(&obj, &q, 1e-12).unwrap();
    let m = crate::objective::weighted_gram(&y, &w);
    let res = solve_irls(&obj, &q, 1e-12, &config).unwrap();
    let v = res.q_final.as_vector();
    // Rayleigh quotient of the returned vector equals the smallest eigenvalue.
    let lam = m.clone().symmetric_eigen().eigenvalues.min();
    assert!((v.dot(&(&m * v)) - lam).abs() <= 1e-10 * m.norm());
    assert!((&m * v - v * lam).amax() <= 1e-10 * m.norm());
}

#[test]
fn linf_identity_data() {
    let obj = Objective::new(DMatrix::identity(4, 4), LossSpec::l1()).unwrap();
    let (best, all) = solve_linf_relaxation(&obj, &cfg()).unwrap();
    assert_eq!(all.len(), 4);
    for cand in &all {
        let (q, f) = cand.outcome.as_ref().unwrap();
        assert!((q.as_vector() - UnitVector::basis(4, cand.index).unwrap().as_vector()).amax() <= 1e-10);
        assert!((f - 1.0).abs() <= 1e-10);
    }
    assert!((best.final_f() - 1.0).abs() <= 1e-10);
}

#[test]
fn round_lp_fixed_point() {
    let inst = gen_dpcp(6, 1, 60, 30, 2).unwrap();
    let obj = Objective::new(inst.data.clone(), LossSpec::l1()).unwrap();
    let Some(TargetSet::SubspaceComplement { basis }) = &inst.targets else { panic!() };
    let target = UnitVector::normalize(basis.column(0).into_owned()).unwrap();
    let out = round_lp(&obj, &target, &InnerSettings::default()).unwrap();
    assert!((out.as_vector() - target.as_vector()).norm() <= 1e-8);
}

#[test]
fn deflation_examples() {
    let mut rng = seeded(2);
    let y = gaussian_matrix(5, 20, &mut rng);
    let obj = Objective::new(y.clone(), LossSpec::l1()).unwrap();
    let id = deflate(&obj, &[]).unwrap();
    assert_eq!(id.basis, DMatrix::identity(5, 5));
    assert_eq!(id.objective.data(), &y);

    let found = [UnitVector::basis(5, 0).unwrap(), uv(&[0.0, 1.0, 1.0, 0.0, 0.0])];
    let red = deflate(&obj, &found).unwrap();
    assert_eq!(red.dim(), 3);
    for _ in 0..5 {
        let u = sample_uniform_sphere(3, &mut rng).unwrap();
        let q = red.lift(&u).unwrap();
        for f in &found {
            assert!(q.as_vector().dot(f.as_vector()).abs() <= 1e-10);
        }
    }
    let too_many: Vec<UnitVector> = (0..4).map(|i| UnitVector::basis(5, i).unwrap()).collect();
    assert!(matches!(deflate(&obj, &too_many), Err(Error::ComplementTooSmall(1))));
    assert!(deflate(&obj, &[UnitVector::basis(5, 0).unwrap(), uv(&[1.0, 1.0, 0.0, 0.0, 0.0])]).is_err());
}

#[test]
fn dictionary_matching() {
    let a = crate::linalg::orthogonal_factor(gaussian_matrix(5, 5, &mut seeded(4)));
    let perm = [3usize, 0, 4, 1, 2];
    let signs = [1.0, -1.0, -1.0, 1.0, 1.0];
    let mut shuffled = DMatrix::zeros(5, 5);
    for j in 0..5 {
        shuffled.set_column(j, &(a.column(perm[j]) * signs[j]));
    }
    let report = match_dictionary(&shuffled, &a).unwrap();
    assert_eq!(report.matches.len(), 5);
    assert!(report.max_dist() <= 1e-12);
    for m in &report.matches {
        assert_eq!(perm[m.atom], m.column);
        assert_eq!(signs[m.atom], m.sign);
    }

    let v = a.column(0).into_owned();
    let atoms = dedup_atoms(&[v.clone(), v.clone(), -v.clone()]);
    assert_eq!(atoms.ncols(), 1);
}

#[test]
fn dictionary_recovery_identity() {
    let n = 6;
    let code = crate::rng::bernoulli_gaussian_matrix(n, 400, 0.25, &mut seeded(8));
    let inst = crate::models::ProblemInstance::odl_from_parts(DMatrix::identity(n, n), code).unwrap();
    let config = cfg()
        .with_schedule(StepSchedule::Geometric { eta0: 0.05, beta: 0.95, period: 1 })
        .with_max_iters(600);
    let rec = recover_dictionary(&inst, SolverKind::Rsg, LossSpec::l1(), &config, 20 * n, 1).unwrap();
    assert!(rec.report.unmatched_columns.is_empty());
    assert!(rec.report.max_dist() <= 1e-5, "max dist {}", rec.report.max_dist());
}

#[test]
fn zero_data_returns_start() {
    let obj = Objective::new(DMatrix::zeros(3, 4), LossSpec::l1()).unwrap();
    let q0 = uv(&[1.0, 2.0, 3.0]);
    for kind in [SolverKind::Rsg, SolverKind::Alp, SolverKind::MANPPA_DEFAULT, SolverKind::IRLS_DEFAULT] {
        let res = solve_with(kind, &obj, &q0, &cfg(), &Monitor::new()).unwrap();
        assert_eq!(res.q_final, q0);
        assert_eq!(res.status, Status::Converged);
        assert_eq!(res.final_f(), 0.0);
    }
    let smooth = obj.with_loss(LossSpec::logcosh(0.1).unwrap());
    for kind in [SolverKind::Rgd, SolverKind::Rtr] {
        let res = solve_with(kind, &smooth, &q0, &cfg(), &Monitor::new()).unwrap();
        assert_eq!(res.q_final, q0);
        assert_eq!(res.final_f(), 0.0);
    }
}

#[test]
fn sign_equivariance_small() {
    let inst = gen_odl(5, 80, 0.3, 12).unwrap();
    let l1 = Objective::new(inst.data.clone(), LossSpec::l1()).unwrap();
    let smooth = l1.with_loss(LossSpec::logcosh(0.1).unwrap());
    let q0 = sample_uniform_sphere(5, &mut seeded(1)).unwrap();
    let mon = Monitor::new().recording_iterates();
    let config = cfg().with_max_iters(30);
    for (kind, obj) in [
        (SolverKind::Rgd, &smooth),
        (SolverKind::Rtr, &smooth),
        (SolverKind::Rsg, &l1),
        (SolverKind::Alp, &l1),
        (SolverKind::MANPPA_DEFAULT, &l1),
        (SolverKind::IRLS_DEFAULT, &l1),
    ] {
        let a = solve_with(kind, obj, &q0, &config, &mon).unwrap();
        let b = solve_with(kind, obj, &q0.neg(), &config, &mon).unwrap();
        assert_eq!(a.trace.iterates.len(), b.trace.iterates.len(), "{kind}");
        for (x, y) in a.trace.iterates.iter().zip(b.trace.iterates.iter()) {
            assert_eq!(x, &-y, "{kind}");
        }
    }
}

#[test]
fn oracle_2d_smoke() {
    let mut rng = seeded(30);
    let y = gaussian_matrix(2, 5, &mut rng);
    let obj = Objective::new(y, LossSpec::l1()).unwrap();
    let (_, t) = grid_minimizer_2d(&obj, 1e-5);
    let (best, _) = solve_linf_relaxation(&obj, &cfg()).unwrap();
    assert!(angle_to(&best.q_final, t) <= 1e-4);
}

#[test]
fn dist_stop_ends_at_first_hit() {
    let inst = gen_dpcp(6, 2, 60, 20, 11).unwrap();
    let targets = inst.targets.as_ref().unwrap();
    let obj = Objective::new(inst.data.clone(), LossSpec::l1()).unwrap();
    let q0 = init_spectral(&inst.data).unwrap();
    let full = solve_with(SolverKind::IRLS_DEFAULT, &obj, &q0, &cfg(), &Monitor::new().with_targets(targets)).unwrap();
    let hit = full.trace.records.iter().position(|r| r.dist.unwrap() <= 1e-3).unwrap();
    let m = Monitor::new().with_targets(targets).stopping_at_dist(1e-3);
    let cut = solve_with(SolverKind::IRLS_DEFAULT, &obj, &q0, &cfg(), &m).unwrap();
    assert_eq!(cut.status, Status::Converged);
    assert_eq!(cut.trace.len(), hit + 1);
    assert!(cut.final_dist().unwrap() <= 1e-3);
}

#[test]
fn deflated_solves_span_the_normals() {
    let inst = gen_dpcp(8, 2, 120, 40, 5).unwrap();
    let Some(TargetSet::SubspaceComplement { basis }) = &inst.targets else {
        panic!("dpcp targets");
    };
    let obj = Objective::new(inst.data.clone(), LossSpec::l1()).unwrap();
    let found = solve_deflated(&obj, 2, SolverKind::IRLS_DEFAULT, &cfg()).unwrap();
    assert_eq!(found.len(), 2);
    assert!(found[0].as_vector().dot(found[1].as_vector()).abs() <= 1e-12);
    let mut frame = DMatrix::zeros(8, 2);
    for (j, q) in found.iter().enumerate() {
        frame.set_column(j, q.as_vector());
    }
    assert!(crate::linalg::largest_principal_angle(&frame, basis) <= 1e-6);
}
