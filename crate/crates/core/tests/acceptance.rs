//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use sparse_ippmm::baselines::{admm_solve, asb_chol_solve, AdmmProblem, AsbLambdas, FirstOrderOptions};
use sparse_ippmm::harness::{
    builtin_image, gen_blur_instance, gen_classification, gen_fused_lasso, gen_portfolio, random_interior_state,
    seeded_rng,
};
use sparse_ippmm::ippmm::{
    assemble_augmented_system, assemble_normal_equations, solve, ConvexProgram, IpPmmState, LinearSolverKind,
    PreconditionerKind, QuadraticObjective, SolverOptions, Status,
};
use sparse_ippmm::krylov::{pcg, DenseCholesky, IdentityPreconditioner};
use sparse_ippmm::linops::{
    dense_circulant, make_difference_operator, make_tv_operator, to_dense, BccbOperator, BlurFamily, BlurKernel,
    CscMatrix, LinearOperator,
};
use sparse_ippmm::metrics::{
    accuracy, active_positions, corrected_overlap, density, image_scores, portfolio_ratios, psnr, rmse,
    support, threshold_solution, transactions, ClassificationFold, classification_scores,
};
use sparse_ippmm::precond::{augmented_spectrum, normal_spectrum, HtildeChoice};
use sparse_ippmm::problems::{
    build_fused_lasso_ls, build_logistic_l1, build_poisson_tv, build_portfolio_qp, KlDivergence, LogisticLoss,
    PortfolioInstance,
};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn portfolio_suite() -> Vec<(u64, PortfolioInstance)> {
    (0..20u64)
        .map(|k| {
            let s = 5 + (7 * k as usize) % 16;
            let m = 3 + k as usize % 4;
            (k, gen_portfolio(s, m, 1e-2, 1e-2, 100 + k).expect("portfolio instance"))
        })
        .collect()
}

fn direct_options(tol: f64, dropping: bool) -> SolverOptions {
    SolverOptions {
        tol,
        max_iter: 40,
        linear_solver: LinearSolverKind::DirectAugmented,
        dropping,
        eps_drop: 1e-4,
        xi: 1e2,
        ..SolverOptions::default()
    }
}

fn portfolio_kkt() -> Outcome {
    let start = Instant::now();
    let mut worst_gap: f64 = 0.0;
    let mut max_iters = 0;
    for (k, inst) in portfolio_suite() {
        let (sol, rep) = solve(&build_portfolio_qp(&inst).map_err(|e| e.to_string())?, &direct_options(1e-6, true))
            .map_err(|e| e.to_string())?;
        check(rep.status == Status::Optimal && rep.iters <= 40, || {
            format!("instance {k}: {} after {} iterations", rep.status.as_str(), rep.iters)
        })?;
        max_iters = max_iters.max(rep.iters);
        let f_ip = inst.objective(&inst.holdings(&sol.x));
        let opts = FirstOrderOptions {
            tol: 1e-10,
            max_iter: 1_000_000,
            ..FirstOrderOptions::default()
        };
        let (w, asb) = asb_chol_solve(&inst, AsbLambdas::default(), &opts).map_err(|e| e.to_string())?;
        check(asb.converged, || format!("instance {k}: ASB stopped after {} iterations", asb.iterations))?;
        let f_asb = inst.objective(&w);
        let gap = (f_ip - f_asb).abs() / f_asb.abs().max(1e-12);
        worst_gap = worst_gap.max(gap);
        check(gap <= 1e-4, || format!("instance {k}: objective {f_ip:e} vs ASB {f_asb:e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("20 instances, max {max_iters} iterations, worst relative gap {worst_gap:.2e}, {secs:.1} s"))
}

fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let tol = sv.max() * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

fn normal_spectra() -> Outcome {
    let start = Instant::now();
    let grids: [&[usize]; 5] = [&[2, 2, 2], &[3, 3, 3], &[4, 4, 4], &[2, 3, 4], &[4, 3, 2]];
    let mut min_eig = f64::INFINITY;
    let mut max_eig: f64 = 0.0;
    for k in 0..10u64 {
        let s = 3 + k as usize % 8;
        let grid = grids[k as usize % grids.len()];
        let inst = gen_fused_lasso(s, grid, 0.05, 0.05, 200 + k).map_err(|e| e.to_string())?;
        let p = build_fused_lasso_ls(&inst).map_err(|e| e.to_string())?;
        let state = random_interior_state(&p, 300 + k, 1e-4, 1e-4).map_err(|e| e.to_string())?;
        let rep = normal_spectrum(&p, &state).map_err(|e| e.to_string())?;
        let need = inst.tv_rows().saturating_sub(rank(&inst.data));
        check(rep.normal_bounds_hold == Some(true), || {
            format!("state {k}: spectrum [{:e}, {:e}] outside (χ = {:?}, 2)", rep.min(), rep.max(), rep.chi)
        })?;
        check(rep.unit_count >= need, || format!("state {k}: {} unit eigenvalues, need {need}", rep.unit_count))?;
        min_eig = min_eig.min(rep.min());
        max_eig = max_eig.max(rep.max());
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("10 states, eigenvalues in [{min_eig:.3e}, {max_eig:.6}], {secs:.1} s"))
}

fn augmented_states() -> Result<Vec<(String, ConvexProgram, IpPmmState)>, String> {
    let mut out = Vec::new();
    for k in 0..5u64 {
        let n = 4 + k as usize % 2;
        let kernel = BlurKernel::new(BlurFamily::Gaussian { sigma: 1.0 }, n, n).map_err(|e| e.to_string())?;
        let data = gen_blur_instance(&builtin_image(n, n), &kernel, 50.0, 1.0, 0.05, true, 400 + k)
            .map_err(|e| e.to_string())?;
        let p = build_poisson_tv(&data.instance).map_err(|e| e.to_string())?;
        let state = random_interior_state(&p, 500 + k, 1e-4, 1e-4).map_err(|e| e.to_string())?;
        out.push((format!("poisson {k}"), p, state));
    }
    for k in 0..5u64 {
        let data = gen_classification(30, 6 + k as usize, 5.0, 0.5, 600 + k).map_err(|e| e.to_string())?;
        let p = build_logistic_l1(&data.train).map_err(|e| e.to_string())?;
        let state = random_interior_state(&p, 700 + k, 1e-4, 1e-4).map_err(|e| e.to_string())?;
        out.push((format!("logistic {k}"), p, state));
    }
    Ok(out)
}

fn augmented_spectra() -> Outcome {
    let start = Instant::now();
    let states = augmented_states()?;
    for (name, p, state) in &states {
        for choice in [HtildeChoice::USquared, HtildeChoice::DiagH] {
            let rep = augmented_spectrum(p, state, choice).map_err(|e| e.to_string())?;
            check(rep.augmented_bounds_hold == Some(true), || {
                format!(
                    "{name} {choice:?}: spectrum [{:e}, {:e}] with α = {:?}, β = {:?}",
                    rep.min(),
                    rep.max(),
                    rep.alpha_h,
                    rep.beta_h
                )
            })?;
            if choice == HtildeChoice::DiagH {
                let (a, b) = (rep.alpha_h.unwrap_or(f64::NAN), rep.beta_h.unwrap_or(f64::NAN));
                check(a <= 1.0 + 1e-8 && b >= 1.0 - 1e-8, || format!("{name}: α = {a}, β = {b}"))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} states x 2 choices, {secs:.1} s", states.len()))
}

fn random_diagonal_qp(seed: u64) -> Result<ConvexProgram, String> {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(10..=50);
    let m = rng.random_range(2..=n / 2);
    let mut dense = DMatrix::zeros(m, n);
    for v in dense.iter_mut() {
        if rng.random_bool(0.4) {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    for i in 0..m {
        dense[(i, i)] = 1.0 + rng.random::<f64>();
    }
    let q: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) }).collect();
    let c = random_vec(&mut rng, n);
    let b = random_vec(&mut rng, m);
    let nonneg = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let obj = QuadraticObjective::new(CscMatrix::from_diagonal(&q), c).map_err(|e| e.to_string())?;
    ConvexProgram::new(CscMatrix::from_dense(&dense), b, nonneg, Box::new(obj)).map_err(|e| e.to_string())
}

fn solver_paths() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let p = if k % 2 == 0 {
            random_diagonal_qp(800 + k)?
        } else {
            let grid: &[usize] = if k % 4 == 1 { &[2, 2, 2] } else { &[2, 3] };
            build_fused_lasso_ls(&gen_fused_lasso(3, grid, 0.1, 0.1, 900 + k).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
        };
        check(p.n() <= 50, || format!("state {k}: n = {}", p.n()))?;
        let state = random_interior_state(&p, 1000 + k, 1e-4, 1e-4).map_err(|e| e.to_string())?;
        let sigma = 0.3;

        let (mat, rhs) = assemble_augmented_system(&state, &p, sigma).map_err(|e| e.to_string())?;
        let stacked = rhs.stacked();
        let lu = to_dense(&mat).lu();
        let full = lu
            .solve(&DVector::from_column_slice(&stacked))
            .ok_or_else(|| format!("state {k}: augmented matrix is singular"))?;
        let dy_aug: Vec<f64> = full.as_slice()[rhs.r1.len()..].to_vec();

        let (op, r) = assemble_normal_equations(&state, &p, sigma).map_err(|e| e.to_string())?;
        let chol = DenseCholesky::factor(&to_dense(&op)).map_err(|e| e.to_string())?;
        let dy_chol = chol.solve(&r);
        let dy_pcg = pcg(&op, &r, &IdentityPreconditioner(r.len()), 1e-14, 50 * r.len()).solution;
        let dx_aug = &full.as_slice()[..rhs.r1.len()];
        let dx_normal = op.recover_dx(&dy_chol, &rhs.r1);

        for (label, e) in [
            ("dense normal", rel_err(&dy_chol, &dy_aug)),
            ("pcg normal", rel_err(&dy_pcg, &dy_aug)),
            ("recovered dx", rel_err(&dx_normal, dx_aug)),
        ] {
            worst = worst.max(e);
            check(e <= 1e-8, || format!("state {k}: {label} Δy differs by {e:e}"))?;
        }
    }
    Ok(format!("10 states, worst relative difference {worst:.2e}"))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
    let mut wp = w.to_vec();
    (0..w.len())
        .map(|j| {
            let h = 1e-6 * w[j].abs().max(1.0);
            wp[j] = w[j] + h;
            let fp = f(&wp);
            wp[j] = w[j] - h;
            let fm = f(&wp);
            wp[j] = w[j];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn gradient_fidelity() -> Outcome {
    let mut rng = seeded_rng(1100);
    let (n1, n2) = (6, 5);
    let kernel = BlurKernel::new(BlurFamily::Gaussian { sigma: 1.2 }, n1, n2).map_err(|e| e.to_string())?;
    let g: Vec<f64> = (0..n1 * n2).map(|_| rng.random_range(0.5..3.0)).collect();
    let kl = KlDivergence::new(BccbOperator::new(&kernel), g, vec![0.1; n1 * n2]).map_err(|e| e.to_string())?;
    let data = DMatrix::from_fn(40, 8, |_, _| rng.random_range(-1.0..1.0));
    let labels: Vec<f64> = (0..40).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let lr = LogisticLoss::new(CscMatrix::from_dense(&data), labels).map_err(|e| e.to_string())?;

    let (mut worst_grad, mut worst_sym): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let w: Vec<f64> = (0..n1 * n2).map(|_| rng.random_range(0.1..2.0)).collect();
        let grad = kl.gradient(&w).map_err(|e| e.to_string())?;
        let fd = central_difference(|v| kl.value(v).expect("positive intensity"), &w);
        let e = rel_err(&grad, &fd);
        worst_grad = worst_grad.max(e);
        check(e <= 1e-6, || format!("KL point {k}: gradient error {e:e}"))?;
        let (u, v) = (random_vec(&mut rng, w.len()), random_vec(&mut rng, w.len()));
        let hu = kl.hessian_apply(&w, &u).map_err(|e| e.to_string())?;
        let hv = kl.hessian_apply(&w, &v).map_err(|e| e.to_string())?;
        let s = (dot(&hu, &v) - dot(&u, &hv)).abs() / (norm(&hu) * norm(&v)).max(f64::MIN_POSITIVE);
        worst_sym = worst_sym.max(s);
        check(s <= 1e-12, || format!("KL point {k}: Hessian asymmetry {s:e}"))?;
    }
    for k in 0..20 {
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let grad = lr.gradient(&w);
        let fd = central_difference(|v| lr.value(v), &w);
        let e = rel_err(&grad, &fd);
        worst_grad = worst_grad.max(e);
        check(e <= 1e-6, || format!("logistic point {k}: gradient error {e:e}"))?;
        let (u, v) = (random_vec(&mut rng, 8), random_vec(&mut rng, 8));
        let (hu, hv) = (lr.hessian_apply(&w, &u), lr.hessian_apply(&w, &v));
        let s = (dot(&hu, &v) - dot(&u, &hv)).abs() / (norm(&hu) * norm(&v)).max(f64::MIN_POSITIVE);
        worst_sym = worst_sym.max(s);
        check(s <= 1e-12, || format!("logistic point {k}: Hessian asymmetry {s:e}"))?;
    }
    Ok(format!("40 points, worst gradient error {worst_grad:.2e}, worst asymmetry {worst_sym:.2e}"))
}

fn adjoint_gap(op: &dyn LinearOperator, rng: &mut impl Rng) -> f64 {
    let v = random_vec(rng, op.cols());
    let u = random_vec(rng, op.rows());
    let av = op.apply(&v);
    let atu = op.apply_transpose(&u);
    (dot(&av, &u) - dot(&v, &atu)).abs() / (norm(&av) * norm(&u)).max(f64::MIN_POSITIVE)
}

fn operator_fidelity() -> Outcome {
    let mut rng = seeded_rng(1200);
    let families = [
        BlurFamily::Gaussian { sigma: 2.0 },
        BlurFamily::Motion { length: 7.0, angle_deg: 30.0 },
        BlurFamily::OutOfFocus { radius: 3.0 },
    ];
    let mut worst_bccb: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    let mut probe = |name: &str, op: &dyn LinearOperator, rng: &mut rand_chacha::ChaCha8Rng| -> Result<(), String> {
        for _ in 0..5 {
            let g = adjoint_gap(op, rng);
            worst_adj = worst_adj.max(g);
            check(g <= 1e-12, || format!("{name}: adjoint gap {g:e}"))?;
        }
        Ok(())
    };
    for family in families {
        let kernel = BlurKernel::new(family, 16, 16).map_err(|e| e.to_string())?;
        let op = BccbOperator::new(&kernel);
        let dense = dense_circulant(kernel.psf(), 16, 16);
        for _ in 0..3 {
            let v = random_vec(&mut rng, 256);
            let e = rel_err(&op.apply(&v), (&dense * DVector::from_column_slice(&v)).as_slice());
            worst_bccb = worst_bccb.max(e);
            check(e <= 1e-10, || format!("{family:?}: BCCB apply differs from dense by {e:e}"))?;
        }
        probe(&format!("{family:?}"), &op, &mut rng)?;
    }
    let tv2 = make_tv_operator(&[7, 5]).map_err(|e| e.to_string())?;
    probe("tv 2d", tv2.matrix(), &mut rng)?;
    let tv3 = make_tv_operator(&[3, 4, 2]).map_err(|e| e.to_string())?;
    probe("tv 3d", tv3.matrix(), &mut rng)?;
    let diff = make_difference_operator(6, 4).map_err(|e| e.to_string())?;
    probe("difference", diff.matrix(), &mut rng)?;
    let csc = CscMatrix::from_dense(&DMatrix::from_fn(9, 13, |_, _| {
        if rng.random_bool(0.3) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    }));
    probe("csc", &csc, &mut rng)?;
    let p = random_diagonal_qp(1300)?;
    let state = random_interior_state(&p, 1301, 1e-4, 1e-4).map_err(|e| e.to_string())?;
    let (mat, _) = assemble_augmented_system(&state, &p, 0.5).map_err(|e| e.to_string())?;
    probe("augmented", &mat, &mut rng)?;
    let (normal, _) = assemble_normal_equations(&state, &p, 0.5).map_err(|e| e.to_string())?;
    probe("normal", &normal, &mut rng)?;
    Ok(format!("BCCB worst {worst_bccb:.2e}, adjoint worst {worst_adj:.2e}"))
}

fn dropping_soundness() -> Outcome {
    let (mut sparse_instances, mut worst): (usize, f64) = (0, 0.0);
    for (k, inst) in portfolio_suite() {
        let p = build_portfolio_qp(&inst).map_err(|e| e.to_string())?;
        let (sol_d, rep_d) = solve(&p, &direct_options(1e-10, true)).map_err(|e| e.to_string())?;
        let (sol_n, rep_n) = solve(&p, &direct_options(1e-10, false)).map_err(|e| e.to_string())?;
        check(rep_d.status == Status::Optimal && rep_n.status == Status::Optimal, || {
            format!("instance {k}: {} / {}", rep_d.status.as_str(), rep_n.status.as_str())
        })?;
        check(rep_d.drop_audit.is_clean(), || {
            format!("instance {k}: {} audit violations", rep_d.drop_audit.violated.len())
        })?;
        let (fd, fn_) = (inst.objective(&inst.holdings(&sol_d.x)), inst.objective(&inst.holdings(&sol_n.x)));
        let gap = (fd - fn_).abs() / fn_.abs().max(1e-12);
        worst = worst.max(gap);
        check(gap <= 1e-6, || format!("instance {k}: objective {fd:e} vs {fn_:e}"))?;
        let scale = sol_n.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sparse = (0..p.n()).any(|j| p.nonneg[j] && sol_n.x[j] <= 1e-6 * scale);
        if sparse {
            sparse_instances += 1;
            check(rep_d.final_active < rep_d.initial_active, || {
                format!("instance {k}: sparse optimum but {} of {} still active", rep_d.final_active, rep_d.initial_active)
            })?;
        }
    }
    Ok(format!("20 instances ({sparse_instances} with sparse optima), worst relative gap {worst:.2e}"))
}

fn restoration_quality() -> Outcome {
    let start = Instant::now();
    let n = 64;
    let truth = builtin_image(n, n);
    let kernel = BlurKernel::new(BlurFamily::Gaussian { sigma: 2.0 }, n, n).map_err(|e| e.to_string())?;
    let data = gen_blur_instance(&truth, &kernel, 255.0, 1.0, 2e-2, true, 1).map_err(|e| e.to_string())?;
    let opts = SolverOptions {
        max_iter: 20,
        linear_solver: LinearSolverKind::MinresAugmented,
        preconditioner: PreconditionerKind::AugBlockDiagonal(HtildeChoice::USquared),
        ..SolverOptions::default()
    };
    let (sol, rep) = solve(&build_poisson_tv(&data.instance).map_err(|e| e.to_string())?, &opts)
        .map_err(|e| e.to_string())?;
    check(rep.status != Status::NumericalFailure, || format!("solver failed: {:?}", rep.message))?;
    let restored = image_scores(&data.instance.image(&sol.x), &truth, n, n).map_err(|e| e.to_string())?;
    let observed = image_scores(&data.observed, &truth, n, n).map_err(|e| e.to_string())?;
    let drop = 1.0 - restored.rmse / observed.rmse;
    let secs = start.elapsed().as_secs_f64();
    check(drop >= 0.2, || format!("RMSE {:.4} vs observed {:.4}", restored.rmse, observed.rmse))?;
    check(restored.mssim > observed.mssim, || {
        format!("MSSIM {:.4} vs observed {:.4}", restored.mssim, observed.mssim)
    })?;
    check(secs < 120.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "RMSE {:.4} -> {:.4} ({:.0}% lower), MSSIM {:.3} -> {:.3}, {} iterations, {secs:.1} s",
        observed.rmse,
        restored.rmse,
        100.0 * drop,
        observed.mssim,
        restored.mssim,
        rep.iters
    ))
}

fn classification_behaviour() -> Outcome {
    let (n, s) = (500, 100);
    let data = gen_classification(n, s, 100.0, 0.1, 7).map_err(|e| e.to_string())?;
    let inst = &data.train;
    check(inst.tau == 1.0 / n as f64, || format!("τ = {}", inst.tau))?;
    let opts = SolverOptions {
        tol: 1e-8,
        max_iter: 200,
        ..SolverOptions::default()
    };
    let (sol, rep) = solve(&build_logistic_l1(inst).map_err(|e| e.to_string())?, &opts).map_err(|e| e.to_string())?;
    check(rep.status == Status::Optimal, || format!("IP-PMM {}", rep.status.as_str()))?;
    let w = inst.weights(&sol.x);
    let acc = accuracy(&w, &data.test_data, &data.test_labels).map_err(|e| e.to_string())?;
    let thresholded = threshold_solution(&w[..s], 1e-4);
    let den = 100.0 * density(&thresholded);
    check(100.0 - acc <= 5.0, || format!("test error {:.1}%", 100.0 - acc))?;
    check(den <= 30.0, || format!("density {den:.1}%"))?;
    let planted = support(&data.planted);
    let found = support(&thresholded);
    let recovered = planted.iter().filter(|j| found.contains(j)).count() as f64 / planted.len() as f64;
    check(recovered >= 0.8, || format!("recovered {:.0}% of the planted support", 100.0 * recovered))?;

    let f_ip = inst.objective(&w);
    let budget = 10.0 * rep.time_s.max(0.1);
    let admm_opts = FirstOrderOptions {
        tol: 1e-12,
        max_iter: usize::MAX,
        time_budget_s: Some(budget),
        ..FirstOrderOptions::default()
    };
    let (wa, admm) = admm_solve(AdmmProblem::Logistic(inst), &admm_opts).map_err(|e| e.to_string())?;
    let f_admm = inst.objective(&wa);
    let gap = (f_ip - f_admm).abs() / f_admm.abs();
    check(gap <= 1e-3, || format!("objective {f_ip:e} vs ADMM {f_admm:e} ({} iterations)", admm.iterations))?;
    Ok(format!(
        "test error {:.1}%, density {den:.0}%, planted support recovered {:.0}%, ADMM gap {gap:.1e} after {} iterations",
        100.0 - acc,
        100.0 * recovered,
        admm.iterations
    ))
}

fn metric_examples() -> Outcome {
    let eye = |n: usize| CscMatrix::identity(n);
    let w = vec![0.2, 0.3, 0.5, 0.1, 0.4, 0.5];
    let r = portfolio_ratios(&w, &w, &eye(6), 3, 1e-4).map_err(|e| e.to_string())?;
    check(r.ratio == 1.0 && r.ratio_h == 1.0 && r.ratio_t == 1.0, || format!("identical portfolios: {r:?}"))?;

    let naive = vec![1.0 / 48.0; 480];
    let mut opt = vec![0.0; 480];
    opt[..72].fill(0.01);
    let r = portfolio_ratios(&opt, &naive, &eye(480), 48, 1e-4).map_err(|e| e.to_string())?;
    check(active_positions(&opt) == 72 && r.ratio_h == 480.0 / 72.0, || format!("ratio_h {}", r.ratio_h))?;
    check((r.ratio_h - 6.67).abs() < 5e-3, || format!("ratio_h {} vs 6.67", r.ratio_h))?;
    check(transactions(&[0.7, 0.7], 1, 1e-8).map_err(|e| e.to_string())? == 0, || "T != 0".into())?;

    let mut a = vec![0.0; 100];
    a[..10].fill(1.0);
    let o = corrected_overlap(&a, &a).ok_or("overlap undefined")?;
    check((o - 0.9).abs() < 1e-12, || format!("identical supports overlap {o}"))?;
    let mut b = vec![0.0; 100];
    b[10..20].fill(1.0);
    let o = corrected_overlap(&a, &b).ok_or("overlap undefined")?;
    check((o + 0.1).abs() < 1e-12, || format!("disjoint supports overlap {o}"))?;
    let data = CscMatrix::from_dense(&DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 2.0, -3.0]));
    let labels = [1.0, -1.0, 1.0, -1.0];
    check(accuracy(&[1.0], &data, &labels).map_err(|e| e.to_string())? == 100.0, || "ACC != 100".into())?;
    let folds = [
        ClassificationFold { weights: &[1.0], test_data: &data, test_labels: &labels },
        ClassificationFold { weights: &[2.0], test_data: &data, test_labels: &labels },
    ];
    let sc = classification_scores(&folds, 1e-4).map_err(|e| e.to_string())?;
    check(sc.acc.mean == 100.0 && sc.den.mean == 100.0, || format!("{sc:?}"))?;

    check(threshold_solution(&[0.0, 5.0, 0.0], 1e-4) == vec![0.0, 5.0, 0.0], || "zeros only".into())?;
    let v = [0.3, -1e-9, 2.0];
    check(threshold_solution(&v, 0.0) == v.to_vec(), || "fraction 0 changed w".into())?;
    check(threshold_solution(&[1.0, 1e-6, 1e-6], 1e-4) == vec![1.0, 0.0, 0.0], || "small entries kept".into())?;

    let img: Vec<f64> = (0..256).map(|k| ((k * 37) % 17) as f64 / 16.0).collect();
    let same = image_scores(&img, &img, 16, 16).map_err(|e| e.to_string())?;
    check(same.rmse == 0.0 && same.psnr == f64::INFINITY && (same.mssim - 1.0).abs() < 1e-12, || {
        format!("{same:?}")
    })?;
    let mut reference = vec![0.5; 256];
    reference[0] = 1.0;
    let shifted: Vec<f64> = reference.iter().map(|v| v + 0.01).collect();
    check((rmse(&shifted, &reference) - 0.01).abs() < 1e-12, || "RMSE of shift".into())?;
    let p = psnr(&shifted, &reference).map_err(|e| e.to_string())?;
    check((p - 40.0).abs() < 1e-9, || format!("PSNR {p}"))?;
    let sh = image_scores(&shifted, &reference, 16, 16).map_err(|e| e.to_string())?;
    check(sh.mssim < 1.0, || format!("shifted MSSIM {}", sh.mssim))?;
    Ok(format!("all examples hold, ratio_h = {:.4}", 480.0 / 72.0))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("portfolio KKT convergence", portfolio_kkt),
        ("normal-equation spectra", normal_spectra),
        ("augmented-system spectra", augmented_spectra),
        ("normal vs augmented directions", solver_paths),
        ("gradient fidelity", gradient_fidelity),
        ("operator fidelity", operator_fidelity),
        ("dropping soundness", dropping_soundness),
        ("restoration quality", restoration_quality),
        ("classification behaviour", classification_behaviour),
        ("metric examples", metric_examples),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
