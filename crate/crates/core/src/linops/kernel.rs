use crate::{Error, Result};

/// Point-spread function family and its parameters (all in pixels/degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurFamily {
    /// Delta kernel: the operator is the identity.
    Identity,
    Gaussian { sigma: f64 },
    Motion { length: f64, angle_deg: f64 },
    OutOfFocus { radius: f64 },
}

/// A normalized, non-negative kernel on an `n1 x n2` periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    family: BlurFamily,
    grid: (usize, usize),
    psf: Vec<f64>,
}

impl BlurKernel {
    pub fn new(family: BlurFamily, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid("kernel grid must be non-empty"));
        }
        let taps = match family {
            BlurFamily::Identity => vec![(0, 0, 1.0)],
            BlurFamily::Gaussian { sigma } => gaussian_taps(sigma)?,
            BlurFamily::Motion { length, angle_deg } => motion_taps(length, angle_deg)?,
            BlurFamily::OutOfFocus { radius } => disk_taps(radius)?,
        };
        let total: f64 = taps.iter().map(|t| t.2).sum();
        let mut psf = vec![0.0; n1 * n2];
        for (di, dj, w) in taps {
            let i = di.rem_euclid(n1 as i64) as usize;
            let j = dj.rem_euclid(n2 as i64) as usize;
            psf[i * n2 + j] += w / total;
        }
        Ok(Self {
            family,
            grid: (n1, n2),
            psf,
        })
    }

    /// Builds a kernel from an arbitrary non-negative psf stored with its
    /// centre at index (0, 0) (wrapped). The weights are renormalized.
    pub fn from_psf(psf: Vec<f64>, n1: usize, n2: usize) -> Result<Self> {
        if psf.len() != n1 * n2 {
            return Err(Error::dims(format!("psf has {} entries, grid is {n1}x{n2}", psf.len())));
        }
        if psf.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("psf weights must be finite and non-negative"));
        }
        let total: f64 = psf.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("psf weights sum to zero"));
        }
        Ok(Self {
            family: BlurFamily::Identity,
            grid: (n1, n2),
            psf: psf.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn family(&self) -> BlurFamily {
        self.family
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    /// Row-major psf with the kernel centre at (0, 0).
    pub fn psf(&self) -> &[f64] {
        &self.psf
    }
}

fn check_param(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn gaussian_taps(sigma: f64) -> Result<Vec<(i64, i64, f64)>> {
    check_param("sigma", sigma)?;
    if sigma == 0.0 {
        return Ok(vec![(0, 0, 1.0)]);
    }
    let half = (4.0 * sigma).ceil() as i64;
    let mut taps = Vec::with_capacity(((2 * half + 1) * (2 * half + 1)) as usize);
    for i in -half..=half {
        for j in -half..=half {
            let r2 = (i * i + j * j) as f64;
            taps.push((i, j, (-r2 / (2.0 * sigma * sigma)).exp()));
        }
    }
    Ok(taps)
}

fn disk_taps(radius: f64) -> Result<Vec<(i64, i64, f64)>> {
    check_param("radius", radius)?;
    let half = radius.floor() as i64;
    let mut taps = Vec::new();
    for i in -half..=half {
        for j in -half..=half {
            if ((i * i + j * j) as f64) <= radius * radius {
                taps.push((i, j, 1.0));
            }
        }
    }
    Ok(taps)
}

// Line segment through the origin, sampled densely and splatted bilinearly.
fn motion_taps(length: f64, angle_deg: f64) -> Result<Vec<(i64, i64, f64)>> {
    check_param("length", length)?;
    if !angle_deg.is_finite() {
        return Err(Error::invalid("angle must be finite"));
    }
    if length <= 1.0 {
        return Ok(vec![(0, 0, 1.0)]);
    }
    let theta = angle_deg.to_radians();
    // image rows grow downwards
    let (dx, dy) = (theta.cos(), -theta.sin());
    let samples = (8.0 * length).ceil() as usize + 1;
    let mut taps = Vec::with_capacity(4 * samples);
    for k in 0..samples {
        let t = -0.5 * (length - 1.0) + (length - 1.0) * k as f64 / (samples - 1) as f64;
        let (x, y) = (t * dx, t * dy);
        let (j0, i0) = (x.floor(), y.floor());
        let (fx, fy) = (x - j0, y - i0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        taps.push((i0, j0, (1.0 - fy) * (1.0 - fx)));
        taps.push((i0, j0 + 1, (1.0 - fy) * fx));
        taps.push((i0 + 1, j0, fy * (1.0 - fx)));
        taps.push((i0 + 1, j0 + 1, fy * fx));
    }
    taps.retain(|t| t.2 > 0.0);
    Ok(taps)
}
