use crate::ippmm::{ConvexProgram, IpPmmState};
use crate::linops::{BccbOperator, BlurKernel, CscMatrix, LinearOperator};
use crate::problems::{FusedLassoLsInstance, LogisticInstance, PoissonTvInstance, PortfolioInstance};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One Poisson draw with the given mean (0 for a zero mean).
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Synthetic multi-period portfolio: `Cⱼ = BⱼBⱼᵀ + 0.1I` with `Bⱼ` of size
/// `s × ⌈s/4⌉`, returns uniform in `[−0.05, 0.10]`, `ξ_init = 1` and
/// `ξ_term` the terminal wealth of the equal-weight strategy.
pub fn gen_portfolio(s: usize, m: usize, tau1: f64, tau2: f64, seed: u64) -> Result<PortfolioInstance> {
    if s < 2 || m < 2 {
        return Err(Error::invalid("portfolio generator needs s >= 2 and m >= 2"));
    }
    let mut rng = seeded_rng(seed);
    let k = s.div_ceil(4);
    let scale = 1.0 / (k as f64).sqrt();
    let covs = (0..m)
        .map(|_| {
            let b = DMatrix::from_fn(s, k, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
            &b * b.transpose() + DMatrix::identity(s, s) * 0.1
        })
        .collect();
    let returns = (0..m)
        .map(|_| (0..s).map(|_| rng.random_range(-0.05..0.10)).collect())
        .collect();
    let mut inst = PortfolioInstance::new(covs, returns, 1.0, 1.0, tau1, tau2)?;
    inst.xi_term = inst.naive_terminal_wealth();
    Ok(inst)
}

/// Random fused-lasso least-squares instance on `grid` with `s` samples:
/// Gaussian data rows, labels from a planted piecewise-constant weight map.
pub fn gen_fused_lasso(s: usize, grid: &[usize], tau1: f64, tau2: f64, seed: u64) -> Result<FusedLassoLsInstance> {
    let q: usize = grid.iter().product();
    if s == 0 || q == 0 {
        return Err(Error::invalid("fused-lasso generator needs samples and voxels"));
    }
    let mut rng = seeded_rng(seed);
    let data = DMatrix::from_fn(s, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    // planted map: the first voxel block along the leading axis is active
    let lead = grid[0].div_ceil(2);
    let stride = q / grid[0];
    let planted: Vec<f64> = (0..q).map(|j| if j / stride < lead { 1.0 } else { 0.0 }).collect();
    let scores = CscMatrix::from_dense(&data).apply(&planted);
    let median = {
        let mut v = scores.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v[v.len() / 2]
    };
    let labels = scores.iter().map(|&t| if t >= median { 1.0 } else { -1.0 }).collect();
    FusedLassoLsInstance::new(data, labels, grid.to_vec(), tau1, tau2)
}

/// Piecewise-constant test image in `[0, 1]`: a dim background, a bright
/// square, a mid-grey disk and a small white block.
pub fn builtin_image(n1: usize, n2: usize) -> Vec<f64> {
    let mut img = vec![0.1; n1 * n2];
    let (f1, f2) = (n1 as f64, n2 as f64);
    for i in 0..n1 {
        for j in 0..n2 {
            let (y, x) = (i as f64 / f1, j as f64 / f2);
            let v = &mut img[i * n2 + j];
            if (0.125..0.5).contains(&y) && (0.125..0.5).contains(&x) {
                *v = 0.8;
            }
            if (y - 0.68).powi(2) + (x - 0.62).powi(2) <= 0.2 * 0.2 {
                *v = 0.5;
            }
            if (0.7..0.85).contains(&y) && (0.15..0.3).contains(&x) {
                *v = 1.0;
            }
        }
    }
    img
}

/// A blurred, noisy observation together with its ground truth.
#[derive(Debug, Clone)]
pub struct BlurInstance {
    pub instance: PoissonTvInstance,
    /// Ground truth `w̄` in `[0, 1]`.
    pub truth: Vec<f64>,
    /// Observation rescaled to image units, `g / peak`.
    pub observed: Vec<f64>,
    pub peak: f64,
}

/// `g ~ Poisson(peak·Dw̄ + a)` (or `g = peak·Dw̄ + a` when `noise` is off),
/// then rescaled by `1/peak` so the program works in image units.
pub fn gen_blur_instance(
    truth: &[f64],
    kernel: &BlurKernel,
    peak: f64,
    background: f64,
    lambda: f64,
    noise: bool,
    seed: u64,
) -> Result<BlurInstance> {
    if !(peak > 0.0) {
        return Err(Error::invalid("peak counts must be positive"));
    }
    if !(background > 0.0) {
        return Err(Error::invalid("background must be positive"));
    }
    let blur = BccbOperator::new(kernel);
    if truth.len() != blur.rows() {
        return Err(Error::dims(format!("image has {} pixels, kernel grid {}", truth.len(), blur.rows())));
    }
    let mut rng = seeded_rng(seed);
    let mean: Vec<f64> = blur.apply(truth).iter().map(|v| (peak * v).max(0.0) + background).collect();
    let counts = if noise {
        mean.iter().map(|&m| sample_poisson(&mut rng, m)).collect::<Result<Vec<_>>>()?
    } else {
        mean
    };
    let g: Vec<f64> = counts.iter().map(|c| c / peak).collect();
    let a = vec![background / peak; g.len()];
    Ok(BlurInstance {
        instance: PoissonTvInstance::new(blur, g.clone(), a, lambda)?,
        truth: truth.to_vec(),
        observed: g,
        peak,
    })
}

/// Labelled train/test split with the planted weights that generated it.
#[derive(Debug, Clone)]
pub struct ClassificationData {
    pub train: LogisticInstance,
    pub test_data: CscMatrix,
    pub test_labels: Vec<f64>,
    pub planted: Vec<f64>,
}

/// Gaussian samples scaled to unit Euclidean norm, planted weights with
/// `⌈sparsity·s⌉` non-zeros and labels `sign(separation·dᵢᵀw̄ + εᵢ)`, `εᵢ ~ N(0, 1)`. `n` training and `n`
/// test samples; `τ = 1/n`; bias column on.
pub fn gen_classification(n: usize, s: usize, separation: f64, sparsity: f64, seed: u64) -> Result<ClassificationData> {
    if n == 0 || s == 0 {
        return Err(Error::invalid("classification generator needs n, s >= 1"));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::invalid("sparsity must lie in (0, 1]"));
    }
    let mut rng = seeded_rng(seed);
    let k = ((sparsity * s as f64).ceil() as usize).clamp(1, s);
    let mut planted = vec![0.0; s];
    for j in sample(&mut rng, s, k) {
        let mag: f64 = rng.random_range(0.5..1.5);
        planted[j] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |count: usize| {
        let mut d = DMatrix::from_fn(count, s, |_, _| rng.sample::<f64, _>(StandardNormal));
        for mut row in d.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        let t = &d * nalgebra::DVector::from_column_slice(&planted);
        let labels: Vec<f64> = t
            .iter()
            .map(|&ti| if separation * ti + noise.sample(&mut rng) >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        (CscMatrix::from_dense(&d), labels)
    };
    let (train, train_labels) = draw(n);
    let (test_data, test_labels) = draw(n);
    Ok(ClassificationData {
        train: LogisticInstance::new(train, train_labels, 1.0 / n as f64, true)?,
        test_data,
        test_labels,
        planted,
    })
}

/// Interior iterate with `x, z ∈ [0.1, 2]` on non-negative variables,
/// free entries and `y` in `[−1, 1]`.
pub fn random_interior_state(program: &ConvexProgram, seed: u64, rho: f64, delta: f64) -> Result<IpPmmState> {
    let mut rng = seeded_rng(seed);
    let x = (0..program.n())
        .map(|j| {
            if program.nonneg[j] {
                rng.random_range(0.1..2.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    let z = (0..program.n()).map(|_| rng.random_range(0.1..2.0)).collect();
    let y = (0..program.m()).map(|_| rng.random_range(-1.0..1.0)).collect();
    IpPmmState::from_parts(program, x, y, z, rho, delta)
}
