//! Finite-difference probes of the RED conditions.

use nalgebra::{DMatrix, DVector};

use super::Denoiser;
use crate::error::{Error, Result};
use crate::image::ImageField;
use crate::par::{self, Execution};
use crate::rng::RngStream;

/// Largest vector length for which dense Jacobians are assembled.
pub const DENSE_LIMIT: usize = 4096;

const POWER_MAX_ITERS: usize = 50;
const POWER_REL_TOL: f64 = 1e-8;

/// Averages over the patches that were not skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedConditionReport {
    pub nmse_lh1: f64,
    pub nmse_lh2: f64,
    pub nmse_js: f64,
    pub msr: f64,
    pub patch_count: usize,
    pub skipped: usize,
    /// Mean finite-difference step over the scored patches.
    pub probe_epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedCheckOptions {
    /// Relative perturbation for the homogeneity test `D((1 + eps) x)`.
    pub homogeneity_eps: f64,
    /// Central-difference step; `None` picks [`default_probe_eps`] per patch.
    pub jacobian_eps: Option<f64>,
    pub exec: Execution,
}

impl RedCheckOptions {
    pub fn new(eps: f64) -> Self {
        RedCheckOptions {
            homogeneity_eps: eps,
            jacobian_eps: Some(eps),
            exec: Execution::Parallel,
        }
    }
}

/// `1e-4 * (1 + max |x_i|)`.
pub fn default_probe_eps(x: &ImageField) -> f64 {
    1e-4 * (1.0 + x.max_abs())
}

/// Central-difference Jacobian of `d` at `x`; column `j` is the response
/// to the basis vector `e_j` in the flattened (interleaved) layout.
pub fn fd_jacobian(d: &Denoiser, x: &ImageField, eps: f64) -> Result<DMatrix<f64>> {
    fd_jacobian_with(d, x, eps, Execution::Parallel)
}

pub fn fd_jacobian_with(
    d: &Denoiser,
    x: &ImageField,
    eps: f64,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_LIMIT,
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "probe step must be > 0, got {eps}"
        )));
    }
    let columns = par::try_map_indexed(n, exec, |j| {
        let mut plus = x.data().to_vec();
        let mut minus = x.data().to_vec();
        plus[j] += eps;
        minus[j] -= eps;
        let dp = d.apply(&ImageField::new(x.shape(), plus)?)?;
        let dm = d.apply(&ImageField::new(x.shape(), minus)?)?;
        Ok::<_, Error>(
            dp.data()
                .iter()
                .zip(dm.data())
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect::<Vec<f64>>(),
        )
    })?;
    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Dominant-magnitude eigenvalue estimate by power iteration.
fn power_radius(j: &DMatrix<f64>, seed: u64) -> f64 {
    let n = j.nrows();
    let mut rng = RngStream::new(seed);
    let mut v = DVector::from_fn(n, |_, _| rng.standard_normal());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = j * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        let done = (next - lambda).abs() <= POWER_REL_TOL * next;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

struct PatchScores {
    lh1: f64,
    lh2: f64,
    js: f64,
    msr: f64,
    eps: f64,
}

fn score_patch(
    d: &Denoiser,
    x: &ImageField,
    opts: &RedCheckOptions,
    seed: u64,
) -> Result<Option<PatchScores>> {
    let dx = d.apply(x)?;
    let dx_norm2 = dx.norm_sq();
    if dx_norm2 == 0.0 {
        return Ok(None);
    }
    let e = opts.homogeneity_eps;
    let scaled = d.apply(&x.scale(1.0 + e))?;
    let lh1 = scaled.sub(&dx.scale(1.0 + e)).norm_sq() / ((1.0 + e) * (1.0 + e) * dx_norm2);

    let fd_eps = opts.jacobian_eps.unwrap_or_else(|| default_probe_eps(x));
    let jac = fd_jacobian_with(d, x, fd_eps, Execution::Sequential)?;
    let jfro2 = jac.norm_squared();
    if jfro2 == 0.0 {
        return Ok(None);
    }
    let xv = DVector::from_column_slice(x.data());
    let jx = &jac * xv;
    let lh2 = jx
        .iter()
        .zip(dx.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / dx_norm2;
    let js = (&jac - jac.transpose()).norm_squared() / jfro2;
    let msr = power_radius(&jac, seed);
    Ok(Some(PatchScores {
        lh1,
        lh2,
        js,
        msr,
        eps: fd_eps,
    }))
}

/// The four RED-condition scores averaged over `patches`, using `eps` both
/// as the homogeneity perturbation and the finite-difference step.
pub fn verify_red_conditions(
    d: &Denoiser,
    patches: &[ImageField],
    eps: f64,
) -> Result<RedConditionReport> {
    verify_red_conditions_with(d, patches, &RedCheckOptions::new(eps))
}

pub fn verify_red_conditions_with(
    d: &Denoiser,
    patches: &[ImageField],
    opts: &RedCheckOptions,
) -> Result<RedConditionReport> {
    if patches.is_empty() {
        return Err(Error::InvalidInput("no patches to verify".into()));
    }
    if !(opts.homogeneity_eps > 0.0) {
        return Err(Error::InvalidInput("homogeneity eps must be > 0".into()));
    }
    let scores = par::try_map_indexed(patches.len(), opts.exec, |k| {
        score_patch(d, &patches[k], opts, 0x5eed_0000 + k as u64)
    })?;
    let used: Vec<&PatchScores> = scores.iter().flatten().collect();
    let skipped = patches.len() - used.len();
    if used.is_empty() {
        return Err(Error::InvalidInput(format!(
            "all {skipped} patches are degenerate (D(x) = 0)"
        )));
    }
    let n = used.len() as f64;
    let avg = |f: fn(&PatchScores) -> f64| used.iter().map(|s| f(s)).sum::<f64>() / n;
    Ok(RedConditionReport {
        nmse_lh1: avg(|s| s.lh1),
        nmse_lh2: avg(|s| s.lh2),
        nmse_js: avg(|s| s.js),
        msr: avg(|s| s.msr),
        patch_count: used.len(),
        skipped,
        probe_epsilon: avg(|s| s.eps),
    })
}

/// `count` patches of side `size` at uniformly random positions.
pub fn extract_patches(
    image: &ImageField,
    size: usize,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<ImageField>> {
    if size == 0 || size > image.height() || size > image.width() {
        return Err(Error::InvalidInput(format!(
            "patch size {size} does not fit {}",
            image.shape()
        )));
    }
    let rows = (image.height() - size + 1) as u64;
    let cols = (image.width() - size + 1) as u64;
    (0..count)
        .map(|_| {
            let r = rng.below(rows) as usize;
            let c = rng.below(cols) as usize;
            image.patch(r, c, size)
        })
        .collect()
}
