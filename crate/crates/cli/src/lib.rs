//! Command-line front end: generates or loads instances, runs IP-PMM and the
//! baselines, writes report JSON, score CSV and images.
//!
//! Exit codes: 0 when every solver converged, 2 on numerical failure or
//! non-convergence, 1 on usage, input or I/O errors.

use clap::{Args, Parser, Subcommand};
use sparse_ippmm::baselines::{admm_solve, asb_chol_solve, fista_solve, AdmmProblem, AsbLambdas, FirstOrderOptions};
use sparse_ippmm::harness::{
    builtin_image, gen_blur_instance, gen_classification, gen_fused_lasso, gen_portfolio, random_interior_state,
    read_pgm, write_pgm, GrayImage, RunConfig,
};
use sparse_ippmm::ippmm::{solve, ConvexProgram, SolveReport, Status};
use sparse_ippmm::linops::{BlurFamily, BlurKernel, CscMatrix};
use sparse_ippmm::metrics::{
    classification_scores, density, image_scores, portfolio_ratios, threshold_solution, ClassificationFold, ScoreSet,
};
use sparse_ippmm::precond::{augmented_spectrum, normal_spectrum, HtildeChoice, SpectralReport};
use sparse_ippmm::problems::{build_fused_lasso_ls, build_logistic_l1, build_poisson_tv, build_portfolio_qp, LogisticInstance};
use sparse_ippmm::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "ippmm", about = "IP-PMM for sparse approximation problems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multi-period fused-lasso portfolio selection.
    Portfolio(RunArgs),
    /// Fused-lasso least squares on a voxel grid.
    Fmri(RunArgs),
    /// TV-regularized Poisson image restoration.
    Restore(RunArgs),
    /// ℓ¹-regularized logistic regression with k-fold scores.
    Classify(RunArgs),
    /// Runs several solvers on one instance of `--family`.
    Bench(RunArgs),
    /// Dense spectral check of a preconditioned Newton matrix.
    Spectest(RunArgs),
}

/// Flags shared by every subcommand. Each one maps to the config key of the
/// same name; unset flags leave the config file's value.
#[derive(Debug, Args, Default)]
struct RunArgs {
    /// `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated: ippmm, asb, fista, admm.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Grid as `AxBxC`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// PGM file; a builtin pattern of `--size` is used otherwise.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    size: Option<usize>,
    /// gaussian, motion, out-of-focus or identity.
    #[arg(long)]
    blur: Option<String>,
    #[arg(long)]
    len: Option<f64>,
    #[arg(long)]
    angle: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    peak: Option<f64>,
    #[arg(long)]
    background: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// H̃ for the augmented preconditioner: u-squared or diag-h.
    #[arg(long)]
    choice: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Linear solver: direct, pcg or minres.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    precond: Option<String>,
    #[arg(long)]
    dropping: bool,
    #[arg(long)]
    eps_drop: Option<f64>,
    /// Wall-clock budget per solver.
    #[arg(long = "budget-seconds")]
    budget_seconds: Option<f64>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        put(&mut out, "seed", &self.seed);
        put(&mut out, "family", &self.family);
        put(&mut out, "solvers", &self.solvers);
        put(&mut out, "s", &self.s);
        put(&mut out, "m", &self.m);
        put(&mut out, "n", &self.n);
        put(&mut out, "grid", &self.grid);
        put(&mut out, "tau", &self.tau);
        put(&mut out, "tau1", &self.tau1);
        put(&mut out, "tau2", &self.tau2);
        put(&mut out, "lambda", &self.lambda);
        put(&mut out, "image", &self.image.as_ref().map(|p| p.display().to_string()));
        put(&mut out, "size", &self.size);
        put(&mut out, "blur", &self.blur);
        put(&mut out, "len", &self.len);
        put(&mut out, "angle", &self.angle);
        put(&mut out, "sigma", &self.sigma);
        put(&mut out, "radius", &self.radius);
        put(&mut out, "peak", &self.peak);
        put(&mut out, "background", &self.background);
        put(&mut out, "separation", &self.separation);
        put(&mut out, "sparsity", &self.sparsity);
        put(&mut out, "folds", &self.folds);
        put(&mut out, "choice", &self.choice);
        put(&mut out, "tol", &self.tol);
        put(&mut out, "max_iter", &self.iters);
        put(&mut out, "linear_solver", &self.solver);
        put(&mut out, "preconditioner", &self.precond);
        put(&mut out, "eps_drop", &self.eps_drop);
        put(&mut out, "time_budget", &self.budget_seconds);
        if self.dropping {
            out.push(("dropping", "on".into()));
        }
        out
    }

    /// Subcommand defaults, then the config file, flags and `--set`.
    fn config(&self, defaults: &[(&str, &str)]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (k, v) in defaults {
            cfg.set(k, v)?;
        }
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for (k, v) in self.pairs() {
            cfg.set(k, &v)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.options.validate()?;
        Ok(cfg)
    }
}

/// One solver's outcome on one instance.
struct Run {
    solver: String,
    status: String,
    converged: bool,
    iterations: usize,
    objective: f64,
    time_s: f64,
    report_json: String,
    scores: ScoreSet,
}

impl Run {
    fn from_ippmm(rep: &SolveReport, scores: ScoreSet) -> Self {
        Self {
            solver: "ippmm".into(),
            status: rep.status.as_str().into(),
            converged: rep.status == Status::Optimal,
            iterations: rep.iters,
            objective: rep.objective,
            time_s: rep.time_s,
            report_json: rep.to_json(),
            scores,
        }
    }

    fn from_first_order(rep: &sparse_ippmm::baselines::FirstOrderReport, objective: f64, scores: ScoreSet) -> Self {
        Self {
            solver: rep.solver.into(),
            status: if rep.converged { "converged" } else { "not-converged" }.into(),
            converged: rep.converged,
            iterations: rep.iterations,
            objective,
            time_s: rep.time_s,
            report_json: rep.to_json(),
            scores,
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<usize>> {
    text.split('x')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid '{text}', expected e.g. 4x4x4")))
        })
        .collect()
}

fn first_order_options(cfg: &RunConfig) -> Result<FirstOrderOptions> {
    Ok(FirstOrderOptions {
        max_iter: cfg.param("baseline_iters", FirstOrderOptions::default().max_iter)?,
        tol: cfg.options.tol,
        time_budget_s: cfg.options.time_budget,
        ..FirstOrderOptions::default()
    })
}

fn unknown_solver(name: &str, family: &str) -> Error {
    Error::InvalidArgument(format!("solver '{name}' does not apply to the {family} family"))
}

fn run_portfolio(cfg: &RunConfig) -> Result<Vec<Run>> {
    let s = cfg.param("s", 10)?;
    let m = cfg.param("m", 4)?;
    let inst = gen_portfolio(s, m, cfg.param("tau1", 1e-2)?, cfg.param("tau2", 1e-2)?, cfg.seed)?;
    let naive = inst.naive_portfolio();
    let c = inst.covariance();
    let scores = |w: &[f64]| -> ScoreSet {
        let mut set = match portfolio_ratios(w, &naive, &c, s, cfg.transaction_eps) {
            Ok(r) => ScoreSet::portfolio(&r),
            Err(_) => ScoreSet::new("portfolio"),
        };
        set.push("objective", inst.objective(w), "");
        set
    };
    let mut runs = Vec::new();
    for name in &cfg.solvers {
        match name.as_str() {
            "ippmm" => {
                let (sol, rep) = solve(&build_portfolio_qp(&inst)?, &cfg.options)?;
                let w = inst.holdings(&sol.x);
                let mut run = Run::from_ippmm(&rep, scores(&w));
                run.objective = inst.objective(&w);
                runs.push(run);
            }
            "asb" => {
                let (w, rep) = asb_chol_solve(&inst, AsbLambdas::default(), &first_order_options(cfg)?)?;
                runs.push(Run::from_first_order(&rep, inst.objective(&w), scores(&w)));
            }
            other => return Err(unknown_solver(other, "portfolio")),
        }
    }
    Ok(runs)
}

fn run_fmri(cfg: &RunConfig) -> Result<Vec<Run>> {
    let grid = parse_grid(&cfg.param("grid", "4x4x4".to_string())?)?;
    let tau = cfg.param("tau", 0.05)?;
    let inst = gen_fused_lasso(
        cfg.param("s", 10)?,
        &grid,
        cfg.param("tau1", tau)?,
        cfg.param("tau2", tau)?,
        cfg.seed,
    )?;
    let scores = |w: &[f64]| {
        let mut set = ScoreSet::new("fmri");
        set.push("objective", inst.objective(w), "")
            .push("den", 100.0 * density(&threshold_solution(w, cfg.threshold_fraction)), "%");
        set
    };
    let mut runs = Vec::new();
    for name in &cfg.solvers {
        match name.as_str() {
            "ippmm" => {
                let (sol, rep) = solve(&build_fused_lasso_ls(&inst)?, &cfg.options)?;
                let w = inst.weights(&sol.x);
                let mut run = Run::from_ippmm(&rep, scores(&w));
                run.objective = inst.objective(&w);
                runs.push(run);
            }
            "fista" => {
                let (w, rep) = fista_solve(&inst, &first_order_options(cfg)?)?;
                runs.push(Run::from_first_order(&rep, inst.objective(&w), scores(&w)));
            }
            "admm" => {
                let (w, rep) = admm_solve(AdmmProblem::FusedLasso(&inst), &first_order_options(cfg)?)?;
                runs.push(Run::from_first_order(&rep, inst.objective(&w), scores(&w)));
            }
            other => return Err(unknown_solver(other, "fmri")),
        }
    }
    Ok(runs)
}

fn blur_kernel(cfg: &RunConfig, rows: usize, cols: usize) -> Result<BlurKernel> {
    let family = match cfg.param("blur", "gaussian".to_string())?.as_str() {
        "gaussian" => BlurFamily::Gaussian {
            sigma: cfg.param("sigma", 2.0)?,
        },
        "motion" => BlurFamily::Motion {
            length: cfg.param("len", 9.0)?,
            angle_deg: cfg.param("angle", 0.0)?,
        },
        "out-of-focus" | "oof" => BlurFamily::OutOfFocus {
            radius: cfg.param("radius", 3.0)?,
        },
        "identity" | "none" => BlurFamily::Identity,
        other => return Err(Error::InvalidArgument(format!("unknown blur '{other}'"))),
    };
    BlurKernel::new(family, rows, cols)
}

/// Restoration writes the observed and restored images next to the reports.
fn run_restore(cfg: &RunConfig, out: &Path) -> Result<Vec<Run>> {
    let (truth, rows, cols) = match cfg.params.get("image") {
        Some(p) => {
            let img = read_pgm(Path::new(p))?;
            (img.to_unit(), img.rows, img.cols)
        }
        None => {
            let n = cfg.param("size", 64)?;
            (builtin_image(n, n), n, n)
        }
    };
    let kernel = blur_kernel(cfg, rows, cols)?;
    let data = gen_blur_instance(
        &truth,
        &kernel,
        cfg.param("peak", 255.0)?,
        cfg.param("background", 1.0)?,
        cfg.param("lambda", 2e-2)?,
        true,
        cfg.seed,
    )?;
    write_pgm(&out.join("observed.pgm"), &GrayImage::from_unit(&data.observed, rows, cols, 255)?, true)?;
    let observed = image_scores(&data.observed, &truth, rows, cols)?;
    let mut runs = Vec::new();
    for name in &cfg.solvers {
        if name != "ippmm" {
            return Err(unknown_solver(name, "restore"));
        }
        let (sol, rep) = solve(&build_poisson_tv(&data.instance)?, &cfg.options)?;
        let w = data.instance.image(&sol.x);
        write_pgm(&out.join("restored.pgm"), &GrayImage::from_unit(&w, rows, cols, 255)?, true)?;
        let restored = image_scores(&w, &truth, rows, cols)?;
        let mut set = ScoreSet::image(&restored);
        set.push("observed_rmse", observed.rmse, "")
            .push("observed_psnr", observed.psnr, "dB")
            .push("observed_mssim", observed.mssim, "");
        let mut run = Run::from_ippmm(&rep, set);
        // the iteration budget is the stopping rule here
        run.converged = rep.status != Status::NumericalFailure;
        runs.push(run);
    }
    Ok(runs)
}

fn select_rows(a: &CscMatrix, rows: &[usize]) -> CscMatrix {
    a.transpose().select_columns(rows).transpose()
}

fn run_classify(cfg: &RunConfig) -> Result<Vec<Run>> {
    let n = cfg.param("n", 200)?;
    let data = gen_classification(
        n,
        cfg.param("s", 20)?,
        cfg.param("separation", 100.0)?,
        cfg.param("sparsity", 0.2)?,
        cfg.seed,
    )?;
    let k: usize = cfg.param("folds", 5)?;
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("need 2 <= folds <= n, got {k}")));
    }
    let train = &data.train;
    let mut splits = Vec::with_capacity(k);
    for f in 0..k {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % k == f);
        let fit = LogisticInstance::new(
            select_rows(&train.data, &kept),
            kept.iter().map(|&i| train.labels[i]).collect(),
            cfg.param("tau", 1.0 / kept.len() as f64)?,
            train.bias,
        )?;
        let test_labels: Vec<f64> = held.iter().map(|&i| train.labels[i]).collect();
        splits.push((fit, select_rows(&train.data, &held), test_labels));
    }

    let mut runs = Vec::new();
    for name in &cfg.solvers {
        let mut weights = Vec::with_capacity(k);
        let (mut iterations, mut time_s, mut converged, mut objective) = (0, 0.0, true, 0.0);
        let mut numerical_failure = false;
        let mut reports = Vec::new();
        for (fit, _, _) in &splits {
            match name.as_str() {
                "ippmm" => {
                    let (sol, rep) = solve(&build_logistic_l1(fit)?, &cfg.options)?;
                    let w = fit.weights(&sol.x);
                    iterations += rep.iters;
                    time_s += rep.time_s;
                    converged &= rep.status == Status::Optimal;
                    numerical_failure |= rep.status == Status::NumericalFailure;
                    objective += fit.objective(&w);
                    reports.push(rep.to_json());
                    weights.push(w);
                }
                "admm" => {
                    let (w, rep) = admm_solve(AdmmProblem::Logistic(fit), &first_order_options(cfg)?)?;
                    iterations += rep.iterations;
                    time_s += rep.time_s;
                    converged &= rep.converged;
                    objective += fit.objective(&w);
                    reports.push(rep.to_json());
                    weights.push(w);
                }
                other => return Err(unknown_solver(other, "classify")),
            }
        }
        let folds: Vec<ClassificationFold> = splits
            .iter()
            .zip(&weights)
            .map(|((_, test, labels), w)| ClassificationFold {
                weights: w,
                test_data: test,
                test_labels: labels,
            })
            .collect();
        let cs = classification_scores(&folds, cfg.threshold_fraction)?;
        let mut set = ScoreSet::classification(&cs);
        set.push("objective_mean", objective / k as f64, "");
        runs.push(Run {
            solver: name.clone(),
            status: if numerical_failure {
                Status::NumericalFailure.as_str().into()
            } else if converged {
                if name == "ippmm" { "optimal" } else { "converged" }.into()
            } else {
                "not-converged".into()
            },
            converged,
            iterations,
            objective: objective / k as f64,
            time_s,
            report_json: format!("[{}]", reports.join(",\n")),
            scores: set,
        });
    }
    Ok(runs)
}

fn htilde(cfg: &RunConfig) -> Result<HtildeChoice> {
    match cfg.param("choice", "u-squared".to_string())?.as_str() {
        "u-squared" | "u2" => Ok(HtildeChoice::USquared),
        "diag-h" | "diag" => Ok(HtildeChoice::DiagH),
        other => Err(Error::InvalidArgument(format!("unknown H̃ choice '{other}'"))),
    }
}

fn run_spectest(cfg: &RunConfig) -> Result<SpectralReport> {
    let rho = cfg.param("rho", 1e-4)?;
    let delta = cfg.param("delta", 1e-4)?;
    let family = cfg.param("family", "fmri".to_string())?;
    let state_for = |p: &ConvexProgram| random_interior_state(p, cfg.seed, rho, delta);
    match family.as_str() {
        "fmri" => {
            let grid = parse_grid(&cfg.param("grid", "2x2x2".to_string())?)?;
            let tau = cfg.param("tau", 0.05)?;
            let inst = gen_fused_lasso(cfg.param("s", 3)?, &grid, tau, tau, cfg.seed)?;
            let p = build_fused_lasso_ls(&inst)?;
            normal_spectrum(&p, &state_for(&p)?)
        }
        "poisson" | "restore" => {
            let n = cfg.param("size", 6)?;
            let kernel = blur_kernel(cfg, n, n)?;
            let data = gen_blur_instance(&builtin_image(n, n), &kernel, 50.0, 1.0, cfg.param("lambda", 1e-2)?, true, cfg.seed)?;
            let p = build_poisson_tv(&data.instance)?;
            augmented_spectrum(&p, &state_for(&p)?, htilde(cfg)?)
        }
        "logistic" | "classify" => {
            let data = gen_classification(cfg.param("n", 30)?, cfg.param("s", 5)?, 10.0, 0.4, cfg.seed)?;
            let p = build_logistic_l1(&data.train)?;
            augmented_spectrum(&p, &state_for(&p)?, htilde(cfg)?)
        }
        other => Err(Error::InvalidArgument(format!("spectest has no family '{other}'"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `report_<solver>.json`, `scores.csv` and `summary.csv`.
fn write_runs(out: &Path, runs: &[Run]) -> Result<()> {
    let mut scores = String::new();
    let mut summary = String::from("solver,status,iterations,objective,time_s\n");
    for (k, r) in runs.iter().enumerate() {
        write_file(&out.join(format!("report_{}.json", r.solver)), &r.report_json)?;
        if k == 0 {
            let _ = writeln!(scores, "solver,{}", r.scores.csv_header());
        }
        let _ = writeln!(scores, "{},{}", r.solver, r.scores.csv_row());
        let _ = writeln!(summary, "{},{},{},{:e},{:.6}", r.solver, r.status, r.iterations, r.objective, r.time_s);
    }
    write_file(&out.join("scores.csv"), &scores)?;
    write_file(&out.join("summary.csv"), &summary)
}

fn execute(cmd: Command) -> Result<i32> {
    let (args, family, defaults): (&RunArgs, String, Vec<(&str, &str)>) = match &cmd {
        Command::Portfolio(a) => (a, "portfolio".into(), vec![("dropping", "on")]),
        Command::Fmri(a) => (
            a,
            "fmri".into(),
            vec![("linear_solver", "pcg"), ("preconditioner", "fmri-block-normal")],
        ),
        Command::Restore(a) => (
            a,
            "restore".into(),
            vec![
                ("linear_solver", "minres"),
                ("preconditioner", "aug-block-diagonal:u-squared"),
                ("max_iter", "20"),
            ],
        ),
        Command::Classify(a) => (a, "classify".into(), vec![("tol", "1e-6")]),
        Command::Bench(a) => {
            let cfg = a.config(&[])?;
            let fam = cfg.param("family", "portfolio".to_string())?;
            let defaults = match fam.as_str() {
                "fmri" => vec![("linear_solver", "pcg"), ("preconditioner", "fmri-block-normal")],
                "restore" => vec![
                    ("linear_solver", "minres"),
                    ("preconditioner", "aug-block-diagonal:u-squared"),
                    ("max_iter", "20"),
                ],
                _ => vec![],
            };
            (a, fam, defaults)
        }
        Command::Spectest(a) => (a, "spectest".into(), vec![]),
    };
    let cfg = args.config(&defaults)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.display().to_string(),
        source,
    })?;

    if family == "spectest" {
        let rep = run_spectest(&cfg)?;
        let json = serde_json::to_string_pretty(&rep).expect("report serializes");
        write_file(&args.out.join("spectral.json"), &json)?;
        let holds = rep.normal_bounds_hold.or(rep.augmented_bounds_hold).unwrap_or(false);
        println!(
            "spectest: dim {} eigenvalues in [{:.3e}, {:.3e}], bounds {}",
            rep.dim,
            rep.min(),
            rep.max(),
            if holds { "hold" } else { "violated" }
        );
        return Ok(if holds { 0 } else { 2 });
    }

    let runs = match family.as_str() {
        "portfolio" => run_portfolio(&cfg)?,
        "fmri" => run_fmri(&cfg)?,
        "restore" => run_restore(&cfg, &args.out)?,
        "classify" => run_classify(&cfg)?,
        other => return Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
    };
    write_runs(&args.out, &runs)?;
    for r in &runs {
        println!(
            "{}: {} after {} iterations, objective {:.6e}, {:.2}s",
            r.solver, r.status, r.iterations, r.objective, r.time_s
        );
    }
    Ok(if runs.iter().all(|r| r.converged) { 0 } else { 2 })
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
