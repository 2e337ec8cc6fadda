//! Evaluation scores: portfolio ratios, cross-validated classification
//! scores with support thresholding, and image-quality scores.

use crate::linops::{CscMatrix, LinearOperator};
use crate::vecops::{dot, norm1, norm2};
use crate::{Error, Result};
use serde::Serialize;

/// Default `ε` for counting a change of holdings as a transaction.
pub const DEFAULT_TRANSACTION_EPS: f64 = 1e-4;
/// Default share of the ℓ¹ mass removed by [`threshold_solution`].
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortfolioRatios {
    /// Risk reduction `w_naiveᵀCw_naive / w_optᵀCw_opt`.
    pub ratio: f64,
    /// Holding-cost reduction: active positions of naive over optimal.
    pub ratio_h: f64,
    /// Transaction reduction `T_naive / T_opt`.
    pub ratio_t: f64,
}

/// Number of strictly positive entries.
pub fn active_positions(w: &[f64]) -> usize {
    w.iter().filter(|v| **v > 0.0).count()
}

/// `T = trace(VᵀV)`: the number of (asset, period) pairs whose holding
/// changes by at least `eps` into the next period. `w` stacks the periods,
/// `assets` entries each.
pub fn transactions(w: &[f64], assets: usize, eps: f64) -> Result<usize> {
    if assets == 0 || w.len() % assets != 0 {
        return Err(Error::dims(format!("{} holdings do not split into periods of {assets}", w.len())));
    }
    let count = w
        .chunks(assets)
        .zip(w.chunks(assets).skip(1))
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() >= eps).count())
        .sum();
    Ok(count)
}

pub fn portfolio_ratios(
    w_opt: &[f64],
    w_naive: &[f64],
    c: &CscMatrix,
    assets: usize,
    eps: f64,
) -> Result<PortfolioRatios> {
    if !(eps > 0.0) {
        return Err(Error::invalid("transaction threshold must be positive"));
    }
    if w_opt.len() != w_naive.len() || c.ncols() != w_opt.len() || c.nrows() != w_opt.len() {
        return Err(Error::dims(format!(
            "portfolios of length {} and {} against a {}x{} covariance",
            w_opt.len(),
            w_naive.len(),
            c.nrows(),
            c.ncols()
        )));
    }
    let risk = |w: &[f64]| dot(w, &c.apply(w));
    let ratio = divide(risk(w_naive), risk(w_opt), "optimal portfolio has zero risk")?;
    let ratio_h = divide(
        active_positions(w_naive) as f64,
        active_positions(w_opt) as f64,
        "optimal portfolio has no active positions",
    )?;
    let ratio_t = divide(
        transactions(w_naive, assets, eps)? as f64,
        transactions(w_opt, assets, eps)? as f64,
        "optimal portfolio has no transactions",
    )?;
    Ok(PortfolioRatios { ratio, ratio_h, ratio_t })
}

fn divide(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::UndefinedMetric(what.into()));
    }
    Ok(num / den)
}

/// Zeroes the smallest-magnitude entries whose cumulative `|·|` stays within
/// `fraction·‖w‖₁`.
pub fn threshold_solution(w: &[f64], fraction: f64) -> Vec<f64> {
    let budget = fraction * norm1(w);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()));
    let mut out = w.to_vec();
    let mut removed = 0.0;
    for j in order {
        removed += w[j].abs();
        if removed > budget {
            break;
        }
        out[j] = 0.0;
    }
    out
}

/// Support `𝒵(v)`.
pub fn support(v: &[f64]) -> Vec<usize> {
    (0..v.len()).filter(|&j| v[j] != 0.0).collect()
}

/// `𝒟(v) = |𝒵(v)|/q`.
pub fn density(v: &[f64]) -> f64 {
    support(v).len() as f64 / v.len() as f64
}

/// Corrected overlap `(|𝒵ᵢ ∩ 𝒵ⱼ| − E) / max(|𝒵ᵢ|, |𝒵ⱼ|)` with
/// `E = q·𝒟ᵢ·𝒟ⱼ`. `None` when both supports are empty.
pub fn corrected_overlap(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "overlap needs vectors of one length");
    let q = a.len() as f64;
    let (za, zb) = (support(a).len() as f64, support(b).len() as f64);
    let common = a.iter().zip(b).filter(|(x, y)| **x != 0.0 && **y != 0.0).count() as f64;
    let largest = za.max(zb);
    if largest == 0.0 {
        return None;
    }
    let expected = q * (za / q) * (zb / q);
    Some((common - expected) / largest)
}

/// Percentage of `labels` matched by `sign(data·w + bias)`; the bias is the
/// trailing weight when `w` has one more entry than `data` has columns.
pub fn accuracy(w: &[f64], data: &CscMatrix, labels: &[f64]) -> Result<f64> {
    let q = data.ncols();
    let bias = match w.len() {
        n if n == q => 0.0,
        n if n == q + 1 => w[q],
        n => return Err(Error::dims(format!("{n} weights for {q} features"))),
    };
    if labels.len() != data.nrows() {
        return Err(Error::dims(format!("{} labels for {} samples", labels.len(), data.nrows())));
    }
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("empty test set".into()));
    }
    let scores = data.apply(&w[..q]);
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(t, y)| (if **t + bias >= 0.0 { 1.0 } else { -1.0 }) == **y)
        .count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

/// One cross-validation fold: the weights fitted on the training part and
/// the held-out samples.
#[derive(Debug, Clone, Copy)]
pub struct ClassificationFold<'a> {
    pub weights: &'a [f64],
    pub test_data: &'a CscMatrix,
    pub test_labels: &'a [f64],
}

/// Mean and sample standard deviation (`n − 1` divisor, 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationScores {
    /// Percent of test samples classified correctly.
    pub acc: MeanStd,
    /// Percent of non-zero feature weights.
    pub den: MeanStd,
    /// Corrected pairwise overlap in percent, over all fold pairs.
    pub corr_ovr: MeanStd,
    /// Fold pairs skipped because both supports were empty.
    pub skipped_pairs: usize,
}

/// ACC, DEN and CORR-OVR after thresholding every fold's weights. Density
/// and overlap use the feature weights only (a trailing bias is excluded).
pub fn classification_scores(folds: &[ClassificationFold], fraction: f64) -> Result<ClassificationScores> {
    if folds.len() < 2 {
        return Err(Error::invalid("overlap needs at least two folds"));
    }
    let mut acc = Vec::with_capacity(folds.len());
    let mut features = Vec::with_capacity(folds.len());
    for f in folds {
        let q = f.test_data.ncols();
        let w = threshold_solution(f.weights, fraction);
        acc.push(accuracy(&w, f.test_data, f.test_labels)?);
        features.push(w[..q.min(w.len())].to_vec());
    }
    if features.iter().any(|w| w.len() != features[0].len()) {
        return Err(Error::dims("folds disagree on the number of features"));
    }
    let den: Vec<f64> = features.iter().map(|w| 100.0 * density(w)).collect();
    let mut overlaps = Vec::new();
    let mut skipped = 0;
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            match corrected_overlap(&features[i], &features[j]) {
                Some(o) => overlaps.push(100.0 * o),
                None => skipped += 1,
            }
        }
    }
    Ok(ClassificationScores {
        acc: MeanStd::of(&acc),
        den: MeanStd::of(&den),
        corr_ovr: MeanStd::of(&overlaps),
        skipped_pairs: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageScores {
    pub rmse: f64,
    /// dB; `+∞` when the images coincide.
    pub psnr: f64,
    pub mssim: f64,
}

/// `‖w − w̄‖₂/√n`.
pub fn rmse(w: &[f64], w_ref: &[f64]) -> f64 {
    let diff: Vec<f64> = w.iter().zip(w_ref).map(|(a, b)| a - b).collect();
    norm2(&diff) / (w.len() as f64).sqrt()
}

/// `20 log₁₀(max w̄ / RMSE)`.
pub fn psnr(w: &[f64], w_ref: &[f64]) -> Result<f64> {
    let peak = w_ref.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::UndefinedMetric("reference image has no positive peak".into()));
    }
    let e = rmse(w, w_ref);
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / e).log10()
    })
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW * SSIM_WINDOW)
        .map(|k| {
            let (i, j) = ((k / SSIM_WINDOW) as f64 - c, (k % SSIM_WINDOW) as f64 - c);
            (-(i * i + j * j) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM over all fully contained 11×11 Gaussian windows (σ = 1.5),
/// `C₁ = (0.01R)²`, `C₂ = (0.03R)²` with `R` the dynamic range of the
/// reference (1 when the reference is constant). Images are row-major
/// `rows × cols`.
pub fn mssim(a: &[f64], b: &[f64], rows: usize, cols: usize) -> Result<f64> {
    if a.len() != rows * cols || b.len() != rows * cols {
        return Err(Error::dims(format!("images must have {rows}x{cols} pixels")));
    }
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::invalid(format!("MSSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")));
    }
    let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let win = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=rows - SSIM_WINDOW {
        for c0 in 0..=cols - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let g = win[i * SSIM_WINDOW + j];
                    let k = (r0 + i) * cols + c0 + j;
                    ma += g * a[k];
                    mb += g * b[k];
                    saa += g * a[k] * a[k];
                    sbb += g * b[k] * b[k];
                    sab += g * a[k] * b[k];
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// RMSE, PSNR and MSSIM of `w` against the reference `w_ref`.
pub fn image_scores(w: &[f64], w_ref: &[f64], rows: usize, cols: usize) -> Result<ImageScores> {
    if w.len() != w_ref.len() {
        return Err(Error::dims(format!("images of {} and {} pixels", w.len(), w_ref.len())));
    }
    Ok(ImageScores {
        rmse: rmse(w, w_ref),
        psnr: psnr(w, w_ref)?,
        mssim: mssim(w, w_ref, rows, cols)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Named scores of one instance or fold, tagged by problem family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSet {
    pub family: String,
    pub scores: Vec<Score>,
}

impl ScoreSet {
    pub fn new(family: impl Into<String>) -> Self {
        Self {
            family: family.into(),
            scores: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, value: f64, unit: &str) -> &mut Self {
        self.scores.push(Score {
            name: name.into(),
            value,
            unit: unit.into(),
        });
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn portfolio(r: &PortfolioRatios) -> Self {
        let mut s = Self::new("portfolio");
        s.push("ratio", r.ratio, "").push("ratio_h", r.ratio_h, "").push("ratio_t", r.ratio_t, "");
        s
    }

    pub fn classification(c: &ClassificationScores) -> Self {
        let mut s = Self::new("classification");
        s.push("acc_mean", c.acc.mean, "%")
            .push("acc_std", c.acc.std, "%")
            .push("den_mean", c.den.mean, "%")
            .push("den_std", c.den.std, "%")
            .push("corr_ovr_mean", c.corr_ovr.mean, "%")
            .push("corr_ovr_std", c.corr_ovr.std, "%");
        s
    }

    pub fn image(i: &ImageScores) -> Self {
        let mut s = Self::new("image");
        s.push("rmse", i.rmse, "").push("psnr", i.psnr, "dB").push("mssim", i.mssim, "");
        s
    }

    /// Checks the range invariants of the known scores.
    pub fn validate(&self) -> Result<()> {
        for sc in &self.scores {
            let ok = match sc.name.as_str() {
                "acc_mean" | "den_mean" => (0.0..=100.0).contains(&sc.value),
                "mssim" => (-1.0..=1.0).contains(&sc.value),
                _ => true,
            };
            if !ok {
                return Err(Error::invalid(format!("{} = {} is out of range", sc.name, sc.value)));
            }
        }
        Ok(())
    }

    pub fn csv_header(&self) -> String {
        std::iter::once("family".to_string())
            .chain(self.scores.iter().map(|s| s.name.clone()))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        std::iter::once(self.family.clone())
            .chain(self.scores.iter().map(|s| format!("{}", s.value)))
            .collect::<Vec<_>>()
            .join(",")
    }
}
