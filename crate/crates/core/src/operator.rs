//! Linear degradation operators `A`, their adjoints, and observation
//! simulation `y = A x + sigma w`.
//!
//! All convolutions are periodic. Operators act channel-wise.

use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};
use crate::kernel::Kernel;
use crate::par::{self, Execution};
use crate::rng::{GaussianSource, RngStream};

/// Binary sampling mask over every pixel-channel entry of an image shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    shape: Shape,
    keep: Vec<bool>,
    kept: Vec<usize>,
}

impl Mask {
    pub fn new(shape: Shape, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), keep.len()));
        }
        let kept: Vec<usize> = keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidInput("mask keeps no entries".into()));
        }
        Ok(Mask { shape, keep, kept })
    }

    /// Drops `missing_fraction` of the pixels of each channel, chosen
    /// uniformly without replacement and independently per channel.
    pub fn random(shape: Shape, missing_fraction: f64, rng: &mut RngStream) -> Result<Self> {
        if !(0.0..1.0).contains(&missing_fraction) {
            return Err(Error::InvalidInput(format!(
                "missing fraction must lie in [0, 1), got {missing_fraction}"
            )));
        }
        let pixels = shape.pixels();
        let n_drop = ((missing_fraction * pixels as f64).round() as usize).min(pixels - 1);
        let mut keep = vec![true; shape.len()];
        for c in 0..shape.channels {
            let mut order: Vec<usize> = (0..pixels).collect();
            rng.shuffle(&mut order);
            for &p in &order[..n_drop] {
                keep[p * shape.channels + c] = false;
            }
        }
        Mask::new(shape, keep)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn keep(&self) -> &[bool] {
        &self.keep
    }
    /// Flat indices of kept entries in scan order.
    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }
    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DegradationOp {
    /// Periodic convolution with a centered kernel.
    Circulant(Kernel),
    /// Keeps selected entries, packed in scan order into a `1 x m x 1` field.
    Mask(Mask),
    /// Keeps the top-left sample of every `d x d` block.
    Downsample(usize),
    /// `A = S B`: periodic blur followed by regular subsampling.
    BlurThenDownsample { kernel: Kernel, factor: usize },
}

impl DegradationOp {
    pub fn variant_name(&self) -> &'static str {
        match self {
            DegradationOp::Circulant(_) => "Circulant",
            DegradationOp::Mask(_) => "Mask",
            DegradationOp::Downsample(_) => "Downsample",
            DegradationOp::BlurThenDownsample { .. } => "BlurThenDownsample",
        }
    }

    /// Shape of `A x` for an input of shape `input`.
    pub fn range_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            DegradationOp::Circulant(_) => Ok(input),
            DegradationOp::Mask(m) => {
                if m.shape != input {
                    return Err(Error::mismatch(m.shape, input));
                }
                Ok(Shape::new(1, m.kept_count(), 1))
            }
            DegradationOp::Downsample(d) | DegradationOp::BlurThenDownsample { factor: d, .. } => {
                let d = *d;
                if d == 0 || !input.height.is_multiple_of(d) || !input.width.is_multiple_of(d) {
                    return Err(Error::InvalidInput(format!(
                        "factor {d} must divide both dimensions of {input}"
                    )));
                }
                Ok(Shape::new(
                    input.height / d,
                    input.width / d,
                    input.channels,
                ))
            }
        }
    }

    /// Output dimension `m`.
    pub fn output_len(&self, input: Shape) -> Result<usize> {
        Ok(self.range_shape(input)?.len())
    }

    /// `A x`.
    pub fn apply(&self, x: &ImageField) -> Result<ImageField> {
        let out_shape = self.range_shape(x.shape())?;
        Ok(match self {
            DegradationOp::Circulant(k) => circular_convolve(x, k),
            DegradationOp::Mask(m) => {
                ImageField::from_raw(out_shape, m.kept.iter().map(|&i| x.data()[i]).collect())
            }
            DegradationOp::Downsample(d) => downsample(x, *d, out_shape),
            DegradationOp::BlurThenDownsample { kernel, factor } => {
                downsample(&circular_convolve(x, kernel), *factor, out_shape)
            }
        })
    }

    /// `A^T y` for `y` in the range of an operator with domain `domain`.
    pub fn adjoint(&self, y: &ImageField, domain: Shape) -> Result<ImageField> {
        let expected = self.range_shape(domain)?;
        if y.shape() != expected {
            return Err(Error::mismatch(expected, y.shape()));
        }
        Ok(match self {
            DegradationOp::Circulant(k) => circular_convolve(y, &k.reversed()),
            DegradationOp::Mask(m) => {
                let mut out = vec![0.0; domain.len()];
                for (&i, &v) in m.kept.iter().zip(y.data()) {
                    out[i] = v;
                }
                ImageField::from_raw(domain, out)
            }
            DegradationOp::Downsample(d) => upsample_zero(y, *d, domain),
            DegradationOp::BlurThenDownsample { kernel, factor } => {
                circular_convolve(&upsample_zero(y, *factor, domain), &kernel.reversed())
            }
        })
    }
}

/// Periodic convolution `(k * x)[i, j] = sum_{a,b} k[a, b] x[i - a, j - b]`
/// with offsets measured from the kernel center, applied per channel.
pub fn circular_convolve(x: &ImageField, k: &Kernel) -> ImageField {
    let work = x.len() * k.data().len();
    circular_convolve_with(x, k, par::for_work(work))
}

fn downsample(x: &ImageField, d: usize, out_shape: Shape) -> ImageField {
    let s = x.shape();
    let mut out = Vec::with_capacity(out_shape.len());
    for i in 0..out_shape.height {
        for j in 0..out_shape.width {
            let b = s.index(i * d, j * d, 0);
            out.extend_from_slice(&x.data()[b..b + s.channels]);
        }
    }
    ImageField::from_raw(out_shape, out)
}

fn upsample_zero(y: &ImageField, d: usize, domain: Shape) -> ImageField {
    let ys = y.shape();
    let mut out = vec![0.0; domain.len()];
    for i in 0..ys.height {
        for j in 0..ys.width {
            let src = ys.index(i, j, 0);
            let dst = domain.index(i * d, j * d, 0);
            out[dst..dst + ys.channels].copy_from_slice(&y.data()[src..src + ys.channels]);
        }
    }
    ImageField::from_raw(domain, out)
}

/// Additive white Gaussian noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise sigma must be > 0, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Simulates `y = A x + sigma w`, `w ~ N(0, I)` drawn from `rng`.
pub fn degrade(
    x: &ImageField,
    op: &DegradationOp,
    noise: NoiseModel,
    rng: &mut impl GaussianSource,
) -> Result<ImageField> {
    let clean = op.apply(x)?;
    let mut w = vec![0.0; clean.len()];
    rng.fill_standard_normal(&mut w);
    let data = clean
        .data()
        .iter()
        .zip(&w)
        .map(|(a, n)| a + noise.sigma * n)
        .collect();
    ImageField::new(clean.shape(), data)
}

/// Noise level giving `10 log10(||A ref||^2 / (m sigma^2)) = snr_db`, i.e.
/// the SNR is a per-sample power ratio measured on the degraded signal.
pub fn sigma_from_snr(reference: &ImageField, op: &DegradationOp, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!(
            "snr must be finite, got {snr_db}"
        )));
    }
    let ax = op.apply(reference)?;
    let power = ax.norm_sq() / ax.len() as f64;
    if !(power > 0.0) {
        return Err(Error::InvalidInput(
            "reference has zero energy under the operator".into(),
        ));
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Dense `m x n` matrix of an operator on a given domain, column `j` being
/// `A e_j`. Intended for small oracle problems.
pub fn dense_matrix(op: &DegradationOp, domain: Shape) -> Result<nalgebra::DMatrix<f64>> {
    let n = domain.len();
    let m = op.output_len(domain)?;
    let mut a = nalgebra::DMatrix::zeros(m, n);
    let mut e = ImageField::zeros(domain);
    for j in 0..n {
        e.data_mut()[j] = 1.0;
        let col = op.apply(&e)?;
        a.column_mut(j).copy_from_slice(col.data());
        e.data_mut()[j] = 0.0;
    }
    Ok(a)
}

/// [`circular_convolve`] with an explicit execution mode.
pub fn circular_convolve_with(x: &ImageField, k: &Kernel, exec: Execution) -> ImageField {
    let s = x.shape();
    let (h, w, c) = (s.height as isize, s.width as isize, s.channels);
    let taps: Vec<(isize, isize, f64)> = k.taps().filter(|t| t.2 != 0.0).collect();
    let src = x.data();
    let mut out = vec![0.0; s.len()];
    let row_len = s.width * c;
    par::for_each_chunk_mut(&mut out, row_len, exec, |i, row| {
        let i = i as isize;
        for (di, dj, v) in &taps {
            let base = (i - di).rem_euclid(h) as usize * row_len;
            for j in 0..w {
                let sb = base + (j - dj).rem_euclid(w) as usize * c;
                let db = j as usize * c;
                for ch in 0..c {
                    row[db + ch] += v * src[sb + ch];
                }
            }
        }
    });
    ImageField::from_raw(s, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_field(shape: Shape, seed: u64) -> ImageField {
        let mut r = RngStream::new(seed);
        ImageField::from_fn(shape, |_, _, _| r.standard_normal()).unwrap()
    }

    fn all_ops(shape: Shape) -> Vec<DegradationOp> {
        let mut r = RngStream::new(99);
        vec![
            DegradationOp::Circulant(Kernel::gaussian(5, 1.2).unwrap()),
            DegradationOp::Circulant(Kernel::new(1, 3, vec![0.2, 0.5, 0.3]).unwrap()),
            DegradationOp::Mask(Mask::random(shape, 0.4, &mut r).unwrap()),
            DegradationOp::Downsample(2),
            DegradationOp::BlurThenDownsample {
                kernel: Kernel::new(3, 1, vec![1.0, -2.0, 0.5]).unwrap(),
                factor: 2,
            },
        ]
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = random_field(Shape::new(5, 7, 3), 1);
        let y = DegradationOp::Circulant(Kernel::identity())
            .apply(&x)
            .unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn mask_selects_and_scatters() {
        let shape = Shape::gray(2, 2);
        let m = Mask::new(shape, vec![true, false, false, true]).unwrap();
        let op = DegradationOp::Mask(m);
        let x = ImageField::new(shape, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = op.apply(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 4.0]);
        let back = op.adjoint(&y, shape).unwrap();
        assert_eq!(back.data(), &[1.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn averaging_preserves_constants() {
        let x = ImageField::filled(Shape::gray(6, 6), 0.37);
        let y = DegradationOp::Circulant(Kernel::uniform(3).unwrap())
            .apply(&x)
            .unwrap();
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint() {
        let shape = Shape::gray(9, 8);
        let x = random_field(shape, 3);
        let op = DegradationOp::Circulant(Kernel::gaussian(5, 1.0).unwrap());
        let a = op.apply(&x).unwrap();
        let b = op.adjoint(&x, shape).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn adjoint_identity_every_variant() {
        let shape = Shape::new(8, 6, 2);
        for op in all_ops(shape) {
            let rs = op.range_shape(shape).unwrap();
            for t in 0..100 {
                let x = random_field(shape, 10 + t);
                let y = random_field(rs, 1000 + t);
                let lhs = op.apply(&x).unwrap().dot(&y);
                let rhs = x.dot(&op.adjoint(&y, shape).unwrap());
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * x.norm() * y.norm(),
                    "{}: {lhs} vs {rhs}",
                    op.variant_name()
                );
            }
        }
    }

    #[test]
    fn linearity_every_variant() {
        let shape = Shape::new(8, 6, 2);
        for op in all_ops(shape) {
            let x = random_field(shape, 5);
            let z = random_field(shape, 6);
            let (a, b) = (0.7, -2.3);
            let lhs = op.apply(&x.lincomb(a, &z, b)).unwrap();
            let rhs = op.apply(&x).unwrap().lincomb(a, &op.apply(&z).unwrap(), b);
            assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * (1.0 + rhs.max_abs()));
        }
    }

    #[test]
    fn blur_then_downsample_is_composition() {
        let shape = Shape::new(8, 12, 3);
        let x = random_field(shape, 8);
        let k = Kernel::gaussian(7, 1.6).unwrap();
        let composed = DegradationOp::BlurThenDownsample {
            kernel: k.clone(),
            factor: 4,
        }
        .apply(&x)
        .unwrap();
        let blurred = DegradationOp::Circulant(k).apply(&x).unwrap();
        let two_step = DegradationOp::Downsample(4).apply(&blurred).unwrap();
        assert_eq!(composed, two_step);
    }

    #[test]
    fn downsample_keeps_top_left() {
        let x = ImageField::from_fn(Shape::gray(4, 4), |i, j, _| (i * 4 + j) as f64).unwrap();
        let y = DegradationOp::Downsample(2).apply(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn dimension_errors() {
        let x = ImageField::zeros(Shape::gray(5, 5));
        assert!(DegradationOp::Downsample(2).apply(&x).is_err());
        let m = Mask::new(Shape::gray(2, 2), vec![true; 4]).unwrap();
        assert!(DegradationOp::Mask(m).apply(&x).is_err());
        let op = DegradationOp::Circulant(Kernel::identity());
        assert!(op.adjoint(&x, Shape::gray(4, 4)).is_err());
        assert!(Mask::new(Shape::gray(1, 2), vec![false, false]).is_err());
    }

    #[test]
    fn vanishing_noise_and_determinism() {
        let shape = Shape::gray(8, 8);
        let x = random_field(shape, 11);
        let op = DegradationOp::Circulant(Kernel::gaussian(3, 1.0).unwrap());
        let tiny = NoiseModel::new(1e-300).unwrap();
        let y = degrade(&x, &op, tiny, &mut RngStream::new(1)).unwrap();
        assert_eq!(y, op.apply(&x).unwrap());
        let n = NoiseModel::new(0.1).unwrap();
        let a = degrade(&x, &op, n, &mut RngStream::new(5)).unwrap();
        let b = degrade(&x, &op, n, &mut RngStream::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_noise_level() {
        let shape = Shape::gray(320, 320);
        let x = ImageField::filled(shape, 0.5);
        let op = DegradationOp::Circulant(Kernel::identity());
        let y = degrade(
            &x,
            &op,
            NoiseModel::new(0.1).unwrap(),
            &mut RngStream::new(2),
        )
        .unwrap();
        let r = y.sub(&x);
        let mean = r.data().iter().sum::<f64>() / r.len() as f64;
        let std =
            (r.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
        assert!((0.099..=0.101).contains(&std), "std {std}");
    }

    #[test]
    fn snr_formula() {
        let op = DegradationOp::Circulant(Kernel::identity());
        let x = ImageField::filled(Shape::gray(4, 4), 1.0);
        let s30 = sigma_from_snr(&x, &op, 30.0).unwrap();
        assert!((s30 - 10f64.powf(-1.5)).abs() < 1e-15);
        assert!((s30 - 0.031623).abs() < 1e-6);
        assert!((sigma_from_snr(&x, &op, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let x2 = x.scale(2.0);
        let s2 = sigma_from_snr(&x2, &op, 30.0).unwrap();
        assert!((s2 - 2.0 * s30).abs() < 1e-15);
        assert!(sigma_from_snr(&ImageField::zeros(Shape::gray(2, 2)), &op, 30.0).is_err());
    }

    #[test]
    fn random_mask_fraction_per_channel() {
        let shape = Shape::new(10, 10, 3);
        let m = Mask::random(shape, 0.8, &mut RngStream::new(4)).unwrap();
        for c in 0..3 {
            let kept = (0..100).filter(|p| m.keep()[p * 3 + c]).count();
            assert_eq!(kept, 20);
        }
        let m2 = Mask::random(shape, 0.8, &mut RngStream::new(4)).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn execution_modes_agree_for_convolution() {
        let x = random_field(Shape::new(64, 64, 3), 12);
        let k = Kernel::gaussian(9, 1.6).unwrap();
        let a = circular_convolve_with(&x, &k, Execution::Sequential);
        let b = circular_convolve_with(&x, &k, Execution::Parallel);
        assert_eq!(a, b);
    }
}
