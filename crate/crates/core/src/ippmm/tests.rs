use super::newton::LinearSolverHandle;
use super::*;
use crate::linops::{to_dense, CscMatrix};
use crate::testutil::{active_set_oracle, random_qp, random_vec, rng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn unconstrained(q: Vec<f64>, c: Vec<f64>, nonneg: Vec<bool>) -> ConvexProgram {
    let n = c.len();
    let obj = QuadraticObjective::new(CscMatrix::from_diagonal(&q), c).unwrap();
    ConvexProgram::new(CscMatrix::zeros(0, n), vec![], nonneg, Box::new(obj)).unwrap()
}

fn options(kind: LinearSolverKind) -> SolverOptions {
    SolverOptions {
        linear_solver: kind,
        ..SolverOptions::default()
    }
}

#[test]
fn one_variable_qp_interior_optimum() {
    let p = unconstrained(vec![1.0], vec![-1.0], vec![true]);
    let (sol, rep) = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(rep.status, Status::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
    assert!(sol.z[0].abs() < 1e-5);
}

#[test]
fn one_variable_lp_boundary_optimum() {
    let p = unconstrained(vec![0.0], vec![1.0], vec![true]);
    let (sol, rep) = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(rep.status, Status::Optimal);
    assert!(sol.x[0].abs() < 1e-6);
    assert!((sol.z[0] - 1.0).abs() < 1e-6);
}

#[test]
fn step_length_examples() {
    let all = [true, true];
    assert_eq!(fraction_to_boundary(&[1.0], &[-2.0], &all[..1], 0.995), 0.4975);
    assert_eq!(
        fraction_to_boundary(&[1.0, 2.0], &[-4.0, -1.0], &all, 0.995),
        0.995 * 0.25
    );
    assert_eq!(fraction_to_boundary(&[1.0, 2.0], &[3.0, 0.0], &all, 0.995), 1.0);
    assert_eq!(fraction_to_boundary(&[1.0, 2.0], &[0.0, 0.0], &all, 0.995), 1.0);
    // free entries never limit the step
    assert_eq!(fraction_to_boundary(&[1.0, 1.0], &[-100.0, 0.0], &[false, true], 0.995), 1.0);
}

#[test]
fn penalty_update_follows_mu_ratio() {
    let p = unconstrained(vec![0.0], vec![1.0], vec![true]);
    let mut s = IpPmmState::from_parts(&p, vec![1.0], vec![], vec![1.0], 1e-3, 1e-3).unwrap();
    s.x[0] = 0.1;
    let res = s.residuals(&p);
    update_penalties_and_estimates(&mut s, &p, &res, 1.0, &SolverOptions::default());
    assert!((s.mu - 0.1).abs() < 1e-15);
    assert!((s.rho - 1e-4).abs() < 1e-18);
    assert!((s.delta - 1e-4).abs() < 1e-18);
}

#[test]
fn penalties_respect_floor_and_never_grow() {
    let p = unconstrained(vec![0.0], vec![1.0], vec![true]);
    let opts = SolverOptions::default();
    let mut s = IpPmmState::from_parts(&p, vec![1e-12], vec![], vec![1.0], 1e-6, 1e-6).unwrap();
    let res = s.residuals(&p);
    update_penalties_and_estimates(&mut s, &p, &res, 1.0, &opts);
    assert_eq!(s.rho, opts.rho_floor);
    s.x[0] = 10.0;
    let before = s.rho;
    update_penalties_and_estimates(&mut s, &p, &res, 1e-12, &opts);
    assert_eq!(s.rho, before);
}

#[test]
fn estimates_move_only_on_sufficient_decrease() {
    let p = random_qp(3, 4, 2, 0, true);
    let mut s = IpPmmState::initial(&p, 1e-8, 1e-8);
    let opts = SolverOptions::default();
    let base = s.residuals(&p);
    s.x = vec![2.0; 4];
    s.y = vec![0.5; 2];
    // keep the proximal terms negligible so only the decrease test decides
    s.rho = 1e-14;
    s.delta = 1e-14;
    let scaled = |fp: f64, fd: f64| {
        let mut r = base.clone();
        r.primal.iter_mut().for_each(|v| *v *= fp);
        r.dual.iter_mut().for_each(|v| *v *= fd);
        r.primal_norm *= fp;
        r.dual_norm *= fd;
        r
    };

    let grown = scaled(2.0, 0.5);
    let mu = s.mu;
    update_penalties_and_estimates(&mut s, &p, &grown, mu, &opts);
    assert_eq!(s.zeta, vec![1.0; 4]);
    assert_eq!(s.eta, vec![0.0; 2]);

    let halved = scaled(0.5, 0.5);
    let mu = s.mu;
    update_penalties_and_estimates(&mut s, &p, &halved, mu, &opts);
    assert_eq!(s.zeta, vec![2.0; 4]);
    assert_eq!(s.eta, vec![0.5; 2]);
    assert_eq!(s.estimate_primal, halved.primal_norm);
}

fn kkt_state(tol_scale: f64) -> (ConvexProgram, IpPmmState) {
    // min ½x² − x with x >= 0 and an interior optimum (z = 0 is not
    // representable, so perturb complementarity to the requested scale)
    let p = unconstrained(vec![1.0], vec![-1.0], vec![true]);
    let mut s = IpPmmState::from_parts(&p, vec![1.0], vec![], vec![tol_scale], 1e-8, 1e-8).unwrap();
    s.z[0] = tol_scale;
    (p, s)
}

#[test]
fn termination_boundary_cases() {
    let (p, s) = kkt_state(1e-12);
    assert!(check_termination(&s, &p, 1e-6).optimal);

    let tol = 1e-6;
    let (p, s) = kkt_state(10.0 * tol);
    let t = check_termination(&s, &p, tol);
    assert!((t.mu - 10.0 * tol).abs() < 1e-18);
    assert!(!t.optimal);

    // pick tol equal to the largest residual: inclusive comparison accepts
    let (p, s) = kkt_state(1e-7);
    let t = check_termination(&s, &p, 1.0);
    let exact = t.primal_inf.max(t.dual_inf).max(t.mu);
    assert!(check_termination(&s, &p, exact).optimal);
    assert!(!check_termination(&s, &p, exact * (1.0 - 1e-12)).optimal);
}

#[test]
fn augmented_matrix_matches_hand_assembly() {
    // four variables, two free, general Q
    let q = DMatrix::from_row_slice(4, 4, &[
        2.0, 0.5, 0.0, 0.1, //
        0.5, 1.0, 0.2, 0.0, //
        0.0, 0.2, 3.0, 0.4, //
        0.1, 0.0, 0.4, 1.5,
    ]);
    let a = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 2.0, 0.0, 0.0, 1.0, 1.0, -3.0]);
    let obj = QuadraticObjective::new(CscMatrix::from_dense(&q), vec![1.0, 0.0, -1.0, 0.5]).unwrap();
    let p = ConvexProgram::new(
        CscMatrix::from_dense(&a),
        vec![1.0, 2.0],
        vec![false, true, false, true],
        Box::new(obj),
    )
    .unwrap();
    let x = vec![0.3, 2.0, -1.0, 0.5];
    let z = vec![0.0, 0.25, 0.0, 4.0];
    let (rho, delta) = (0.01, 0.02);
    let s = IpPmmState::from_parts(&p, x.clone(), vec![0.1, -0.2], z.clone(), rho, delta).unwrap();

    let mut expect = DMatrix::zeros(6, 6);
    for i in 0..4 {
        for j in 0..4 {
            expect[(i, j)] = -q[(i, j)];
        }
        expect[(i, i)] -= rho + if p.nonneg[i] { z[i] / x[i] } else { 0.0 };
        for r in 0..2 {
            expect[(4 + r, i)] = a[(r, i)];
            expect[(i, 4 + r)] = a[(r, i)];
        }
    }
    expect[(4, 4)] = delta;
    expect[(5, 5)] = delta;

    let (mat, _) = assemble_augmented_system(&s, &p, 0.0).unwrap();
    assert!((to_dense(&mat) - &expect).amax() < 1e-14);
    let explicit = NewtonMatrix::new(&s, &p, true).unwrap();
    assert!((explicit.to_csc().unwrap().to_dense() - &expect).amax() < 1e-14);
    // action-only Hessians refuse materialization
    assert!(mat.to_csc().is_err());
    assert!(matches!(
        assemble_normal_equations(&s, &p, 0.0),
        Err(crate::Error::UnsupportedStructure(_))
    ));
}

#[test]
fn all_free_variables_have_no_barrier_block() {
    let p = random_qp(5, 4, 2, 4, true);
    let s = IpPmmState::from_parts(&p, vec![0.3; 4], vec![0.0; 2], vec![0.0; 4], 0.5, 0.5).unwrap();
    let (mat, _) = assemble_augmented_system(&s, &p, 0.0).unwrap();
    assert!(mat.regularization().iter().all(|&r| r == 0.5));
}

#[test]
fn identity_normal_operator() {
    let obj = QuadraticObjective::new(CscMatrix::identity(3), vec![0.0; 3]).unwrap();
    let p = ConvexProgram::new(CscMatrix::identity(3), vec![0.0; 3], vec![false; 3], Box::new(obj)).unwrap();
    let s = IpPmmState::from_parts(&p, vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], 0.0, 0.0).unwrap();
    let (op, _) = assemble_normal_equations(&s, &p, 0.0).unwrap();
    assert!((to_dense(&op) - DMatrix::identity(3, 3)).amax() < 1e-15);
}

fn random_state(p: &ConvexProgram, seed: u64, rho: f64, delta: f64) -> IpPmmState {
    let mut r = rng(seed);
    let n = p.n();
    let x: Vec<f64> = (0..n)
        .map(|j| if p.nonneg[j] { r.random_range(0.1..2.0) } else { r.random_range(-1.0..1.0) })
        .collect();
    let z = random_vec(&mut r, n, 0.1, 2.0);
    let y = random_vec(&mut r, p.m(), -1.0, 1.0);
    let mut s = IpPmmState::from_parts(p, x, y, z, rho, delta).unwrap();
    s.zeta = random_vec(&mut r, n, 0.0, 1.0);
    s.eta = random_vec(&mut r, p.m(), -1.0, 1.0);
    s
}

use rand::Rng;

#[test]
fn normal_and_augmented_dy_agree() {
    let p = random_qp(11, 10, 4, 2, true);
    let s = random_state(&p, 12, 1e-2, 1e-3);
    let (mat, rhs) = assemble_augmented_system(&s, &p, 0.3).unwrap();
    let k = to_dense(&mat);
    let full = k.lu().solve(&DVector::from_vec(rhs.stacked())).unwrap();
    let (op, r) = assemble_normal_equations(&s, &p, 0.3).unwrap();
    let dy = to_dense(&op).cholesky().unwrap().solve(&DVector::from_vec(r));
    for i in 0..4 {
        assert!((dy[i] - full[10 + i]).abs() < 1e-10, "{} vs {}", dy[i], full[10 + i]);
    }
    let dx = op.recover_dx(dy.as_slice(), &rhs.r1);
    for j in 0..10 {
        assert!((dx[j] - full[j]).abs() < 1e-10);
    }
}

#[test]
fn normal_operator_spectrum_bounded_by_delta() {
    let p = random_qp(21, 8, 5, 0, true);
    let s = random_state(&p, 22, 1e-3, 0.05);
    let (op, _) = assemble_normal_equations(&s, &p, 0.0).unwrap();
    let eig = SymmetricEigen::new(to_dense(&op)).eigenvalues;
    assert!(eig.min() >= 0.05 * (1.0 - 1e-12));
}

#[test]
fn central_path_rhs_reduces_to_proximal_residuals() {
    let p = random_qp(31, 6, 3, 2, false);
    let mut s = random_state(&p, 32, 0.1, 0.2);
    // put every non-negative pair exactly on x z = μ
    for j in 0..6 {
        if p.nonneg[j] {
            s.z[j] = 0.7 / s.x[j];
        }
    }
    s.mu = s.complementarity(&p);
    assert!((s.mu - 0.7).abs() < 1e-14);
    s.zeta = s.x.clone();
    s.eta = s.y.clone();
    let (mat, rhs) = assemble_augmented_system(&s, &p, 1.0).unwrap();
    assert!(rhs.t.iter().all(|t| t.abs() < 1e-14));
    let res = s.residuals(&p);
    for k in 0..mat.n_active() {
        assert!((rhs.r1[k] - res.dual[k]).abs() < 1e-14);
    }
    assert_eq!(rhs.r2, res.primal);
}

#[test]
fn sigma_one_rhs_is_barrier_subproblem_gradient() {
    // r₁ = ∇f + ρ(x − ζ) − Aᵀy − μ X⁻¹ e on I, and r₂ = b − Ax − δ(y − η)
    for seed in 0..5 {
        let p = random_qp(40 + seed, 7, 3, 3, false);
        let s = random_state(&p, 50 + seed, 0.3, 0.4);
        let (_, rhs) = assemble_augmented_system(&s, &p, 1.0).unwrap();
        let grad = p.objective.gradient(&s.x);
        let aty = p.a.apply_transpose(&s.y);
        for j in 0..7 {
            let mut expect = grad[j] + s.rho * (s.x[j] - s.zeta[j]) - aty[j];
            if p.nonneg[j] {
                expect -= s.mu / s.x[j];
            }
            assert!((rhs.r1[j] - expect).abs() < 1e-12);
        }
        let ax = p.a.apply(&s.x);
        for i in 0..3 {
            let expect = p.b[i] - ax[i] - s.delta * (s.y[i] - s.eta[i]);
            assert!((rhs.r2[i] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn predictor_matches_dense_kkt_on_lp() {
    // 5-variable LP: min cᵀx, Ax = b, x >= 0
    let mut r = rng(61);
    let c = random_vec(&mut r, 5, 0.5, 1.5);
    let a = DMatrix::from_fn(2, 5, |_, _| r.random_range(-1.0..1.0));
    let b = (&a * DVector::from_element(5, 1.0)).as_slice().to_vec();
    let p = ConvexProgram::new(
        CscMatrix::from_dense(&a),
        b.clone(),
        vec![true; 5],
        Box::new(QuadraticObjective::linear(c.clone())),
    )
    .unwrap();
    let s = random_state(&p, 62, 1e-2, 1e-2);

    // full 3x3 block Newton system, σ = 0
    let (n, m) = (5, 2);
    let mut kkt = DMatrix::zeros(2 * n + m, 2 * n + m);
    let mut rhs = DVector::zeros(2 * n + m);
    let aty = a.transpose() * DVector::from_column_slice(&s.y);
    let ax = &a * DVector::from_column_slice(&s.x);
    for j in 0..n {
        kkt[(j, j)] = -s.rho;
        kkt[(j, n + m + j)] = 1.0;
        for i in 0..m {
            kkt[(j, n + i)] = a[(i, j)];
            kkt[(n + i, j)] = a[(i, j)];
        }
        kkt[(n + m + j, j)] = s.z[j];
        kkt[(n + m + j, n + m + j)] = s.x[j];
        rhs[j] = c[j] - aty[j] - s.z[j];
        rhs[n + m + j] = -s.x[j] * s.z[j];
    }
    for i in 0..m {
        kkt[(n + i, n + i)] = s.delta;
        rhs[n + i] = b[i] - ax[i];
    }
    let oracle = kkt.lu().solve(&rhs).unwrap();

    for kind in [LinearSolverKind::DirectAugmented, LinearSolverKind::PcgNormal] {
        let mut opts = options(kind);
        opts.inner_tol = Some(1e-14);
        let mut handle = LinearSolverHandle::new(&opts, &p);
        let mat = NewtonMatrix::new(&s, &p, true).unwrap();
        let res = s.residuals(&p);
        let prepared = handle.prepare(&mat).unwrap();
        let rhs = NewtonRhs::new(&s, &p, mat.active(), &res, 0.0, None);
        let out = handle.solve(&prepared, &mat, &rhs);
        let dz = rhs.recover_dz(&out.dx);
        for j in 0..n {
            assert!((out.dx[j] - oracle[j]).abs() < 1e-8, "{kind:?} dx");
            assert!((dz[j] - oracle[n + m + j]).abs() < 1e-8, "{kind:?} dz");
        }
        for i in 0..m {
            assert!((out.dy[i] - oracle[n + i]).abs() < 1e-8, "{kind:?} dy");
        }
    }
}

#[test]
fn direction_vanishes_at_optimum() {
    // min ½‖x‖² − cᵀx over free x: optimum x = c
    let c = vec![1.0, -2.0, 0.5];
    let p = unconstrained(vec![1.0; 3], c.clone(), vec![false; 3]);
    let p = {
        let obj = QuadraticObjective::new(CscMatrix::identity(3), c.iter().map(|v| -v).collect()).unwrap();
        ConvexProgram::new(p.a.clone(), vec![], vec![false; 3], Box::new(obj)).unwrap()
    };
    let s = IpPmmState::from_parts(&p, c.clone(), vec![], vec![0.0; 3], 1e-2, 1e-2).unwrap();
    let mut h = LinearSolverHandle::new(&SolverOptions::default(), &p);
    let d = predictor_corrector_step(&s, &p, &mut h, &SolverOptions::default()).unwrap();
    assert!(d.dx.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn free_variables_get_zero_dual_step() {
    let p = random_qp(71, 8, 3, 3, true);
    let s = random_state(&p, 72, 1e-2, 1e-2);
    for kind in [
        LinearSolverKind::DirectAugmented,
        LinearSolverKind::PcgNormal,
        LinearSolverKind::MinresAugmented,
    ] {
        let opts = options(kind);
        let mut h = LinearSolverHandle::new(&opts, &p);
        let d = predictor_corrector_step(&s, &p, &mut h, &opts).unwrap();
        for j in 0..3 {
            assert_eq!(d.dz[j], 0.0);
        }
    }
}

#[test]
fn random_qp_matches_active_set_oracle() {
    for (seed, kind) in [
        (81, LinearSolverKind::DirectAugmented),
        (82, LinearSolverKind::PcgNormal),
        (83, LinearSolverKind::DirectAugmented),
    ] {
        let diagonal = kind == LinearSolverKind::PcgNormal;
        let p = random_qp(seed, 60, 20, 10, diagonal);
        let mut opts = options(kind);
        opts.tol = 1e-8;
        let (sol, rep) = solve(&p, &opts).unwrap();
        assert_eq!(rep.status, Status::Optimal, "{kind:?}");
        let mut r = rng(seed);
        let bm = crate::testutil::dense(&mut r, 60, 60);
        let mut q = &bm * bm.transpose() / 60.0;
        if diagonal {
            q = DMatrix::from_diagonal(&q.diagonal());
        }
        let c = random_vec(&mut r, 60, -1.0, 1.0);
        let oracle = active_set_oracle(&q, &c, &p, &sol.x, 1e-5);
        assert!(oracle.certified);
        let rel = (rep.objective - oracle.objective).abs() / (1.0 + oracle.objective.abs());
        assert!(rel <= 1e-6, "{kind:?}: {} vs {}", rep.objective, oracle.objective);
        let gap = sol.x.iter().zip(&oracle.x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap < 1e-4, "{kind:?}: solution gap {gap}");
    }
}

#[test]
fn report_serializes_with_stable_keys() {
    let p = unconstrained(vec![1.0], vec![-1.0], vec![true]);
    let (_, rep) = solve(&p, &SolverOptions::default()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    for key in ["status", "iters", "primal_inf", "dual_inf", "mu", "time_s", "inner_iters"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["status"], "optimal");
}

#[test]
fn time_budget_stops_early() {
    let p = random_qp(91, 30, 10, 0, false);
    let mut opts = SolverOptions::default();
    opts.time_budget = Some(0.0);
    let (_, rep) = solve(&p, &opts).unwrap();
    assert_eq!(rep.status, Status::MaxIterations);
    assert_eq!(rep.iters, 0);
}

#[test]
fn general_hessian_rejects_normal_equations_path() {
    let p = random_qp(92, 6, 2, 0, false);
    let (_, rep) = solve(&p, &options(LinearSolverKind::PcgNormal)).unwrap();
    assert_eq!(rep.status, Status::NumericalFailure);
    assert!(rep.message.unwrap().contains("diagonal Hessian"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimal_status_implies_small_residuals(seed in 0u64..10_000, n in 3usize..12, free in 0usize..3) {
        let m = n / 2;
        let p = random_qp(seed, n, m, free.min(n), seed % 2 == 0);
        let kind = if seed % 2 == 0 { LinearSolverKind::PcgNormal } else { LinearSolverKind::DirectAugmented };
        let (sol, rep) = solve(&p, &options(kind)).unwrap();
        prop_assert_eq!(rep.status, Status::Optimal);
        let tol = 1e-6;
        prop_assert!(rep.primal_inf <= tol && rep.dual_inf <= tol && rep.mu <= tol);
        for j in 0..n {
            if p.nonneg[j] {
                prop_assert!(sol.x[j] > 0.0 && sol.z[j] > 0.0);
            } else {
                prop_assert_eq!(sol.z[j], 0.0);
            }
        }
        // μ in the report is the average complementarity of the final iterate
        let k = p.nonneg_count();
        if k > 0 {
            let avg: f64 = (0..n).filter(|&j| p.nonneg[j]).map(|j| sol.x[j] * sol.z[j]).sum::<f64>() / k as f64;
            prop_assert!((avg - rep.mu).abs() <= 1e-12 * (1.0 + avg));
        }
    }
}
