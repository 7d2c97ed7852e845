use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};

/// Orthonormal DCT-II matrix, row `k` holding basis vector `k`.
fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let alpha = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            m[k * n + i] =
                alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    m
}

/// `x -> U^T diag(gains) U x` with `U` the separable orthonormal 2D DCT,
/// applied per channel. Linear with symmetric Jacobian and spectral radius
/// `max(gains)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformShrink {
    height: usize,
    width: usize,
    gains: Vec<f64>,
    dct_h: Vec<f64>,
    dct_w: Vec<f64>,
}

impl TransformShrink {
    /// `gains[u * width + v]` multiplies DCT coefficient `(u, v)`. Gains
    /// must lie in `[0, 1]`; strict contraction additionally needs
    /// `max(gains) < 1`, which [`TransformShrink::margin`] reports.
    pub fn new(height: usize, width: usize, gains: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("empty transform shape".into()));
        }
        if gains.len() != height * width {
            return Err(Error::mismatch(height * width, gains.len()));
        }
        if gains.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidInput(
                "transform gains must lie in [0, 1]".into(),
            ));
        }
        Ok(TransformShrink {
            height,
            width,
            gains,
            dct_h: dct_matrix(height),
            dct_w: dct_matrix(width),
        })
    }

    /// Smooth low-pass shrinkage `g(f) = (1 - shrink) / (1 + (f / cutoff)^2)`
    /// with `f` the normalized DCT frequency radius.
    pub fn lowpass(height: usize, width: usize, cutoff: f64, shrink: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cutoff must be > 0, got {cutoff}"
            )));
        }
        if !(shrink > 0.0 && shrink < 1.0) {
            return Err(Error::InvalidInput(format!(
                "shrink must lie in (0, 1), got {shrink}"
            )));
        }
        let mut gains = Vec::with_capacity(height * width);
        for u in 0..height {
            for v in 0..width {
                let fu = u as f64 / height as f64;
                let fv = v as f64 / width as f64;
                let r2 = (fu * fu + fv * fv) / (cutoff * cutoff);
                gains.push((1.0 - shrink) / (1.0 + r2));
            }
        }
        TransformShrink::new(height, width, gains)
    }

    /// Posterior-mean denoiser for the prior `N(0, U^T diag(prior_var) U)`
    /// under white noise of variance `noise_var`: gains `v / (v + noise_var)`.
    pub fn gaussian_mmse(
        height: usize,
        width: usize,
        prior_var: &[f64],
        noise_var: f64,
    ) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::InvalidInput("noise variance must be > 0".into()));
        }
        if prior_var.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("prior variances must be >= 0".into()));
        }
        let gains = prior_var.iter().map(|v| v / (v + noise_var)).collect();
        TransformShrink::new(height, width, gains)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// `1 - max(gains)`: the contraction margin (plays the role of shrink).
    pub fn margin(&self) -> f64 {
        1.0 - self.gains.iter().cloned().fold(0.0, f64::max)
    }

    fn check(&self, shape: Shape) -> Result<()> {
        if shape.height != self.height || shape.width != self.width {
            return Err(Error::mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", shape.height, shape.width),
            ));
        }
        Ok(())
    }

    /// Orthonormal 2D DCT of a plane: `C_h X C_w^T`.
    pub fn forward_plane(&self, plane: &[f64]) -> Vec<f64> {
        separable(
            &self.dct_h,
            &self.dct_w,
            plane,
            self.height,
            self.width,
            false,
        )
    }

    /// Inverse of [`TransformShrink::forward_plane`].
    pub fn inverse_plane(&self, coef: &[f64]) -> Vec<f64> {
        separable(
            &self.dct_h,
            &self.dct_w,
            coef,
            self.height,
            self.width,
            true,
        )
    }

    pub fn apply(&self, x: &ImageField) -> Result<ImageField> {
        self.check(x.shape())?;
        let mut out = x.clone();
        for c in 0..x.channels() {
            let mut coef = self.forward_plane(&x.channel(c));
            coef.iter_mut().zip(&self.gains).for_each(|(v, g)| *v *= g);
            out.set_channel(c, &self.inverse_plane(&coef));
        }
        Ok(out)
    }

    pub fn spectrum(&self, shape: Shape) -> Result<Vec<f64>> {
        self.check(shape)?;
        Ok(self.gains.clone())
    }
}

/// `M_h X M_w^T` (forward) or `M_h^T X M_w` (transpose) for row-major
/// `h x w` planes.
fn separable(mh: &[f64], mw: &[f64], x: &[f64], h: usize, w: usize, transpose: bool) -> Vec<f64> {
    let at = |m: &[f64], n: usize, r: usize, c: usize| {
        if transpose {
            m[c * n + r]
        } else {
            m[r * n + c]
        }
    };
    // t = X M_w^T (or X M_w): t[i, v] = sum_j x[i, j] * M_w[v, j]
    let mut t = vec![0.0; h * w];
    for i in 0..h {
        let row = &x[i * w..(i + 1) * w];
        for v in 0..w {
            let mut acc = 0.0;
            for (j, xv) in row.iter().enumerate() {
                acc += xv * at(mw, w, v, j);
            }
            t[i * w + v] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for i in 0..h {
            let m = at(mh, h, u, i);
            if m == 0.0 {
                continue;
            }
            let src = &t[i * w..(i + 1) * w];
            let dst = &mut out[u * w..(u + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += m * s;
            }
        }
    }
    out
}
