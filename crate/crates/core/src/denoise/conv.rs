use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::{ImageField, Shape};
use crate::kernel::Kernel;
use crate::operator::circular_convolve;

/// `x -> (1 - shrink) (k * x)` with a symmetric, nonnegative, unit-sum
/// kernel. The Jacobian is a symmetric circulant matrix whose eigenvalues
/// lie in `[-(1 - shrink), 1 - shrink]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricConv {
    kernel: Kernel,
    shrink: f64,
}

impl SymmetricConv {
    pub fn new(kernel: Kernel, shrink: f64) -> Result<Self> {
        if !(shrink > 0.0 && shrink < 1.0) {
            return Err(Error::InvalidInput(format!(
                "shrink must lie in (0, 1), got {shrink}"
            )));
        }
        if kernel.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput(
                "denoiser kernel must be nonnegative".into(),
            ));
        }
        if (kernel.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "denoiser kernel must sum to 1, sums to {}",
                kernel.sum()
            )));
        }
        if !kernel.is_point_symmetric(1e-15) {
            return Err(Error::InvalidInput(
                "denoiser kernel must be symmetric".into(),
            ));
        }
        Ok(SymmetricConv { kernel, shrink })
    }

    /// `shrink`-scaled identity: `D(x) = (1 - shrink) x`.
    pub fn scaled_identity(shrink: f64) -> Result<Self> {
        SymmetricConv::new(Kernel::identity(), shrink)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn shrink(&self) -> f64 {
        self.shrink
    }

    pub fn apply(&self, x: &ImageField) -> ImageField {
        let scale = 1.0 - self.shrink;
        if self.kernel.rows() == 1 && self.kernel.cols() == 1 {
            return x.scale(scale * self.kernel.data()[0]);
        }
        let mut y = circular_convolve(x, &self.kernel);
        y.data_mut().iter_mut().for_each(|v| *v *= scale);
        y
    }

    /// Jacobian eigenvalues on one `h x w` plane, in DFT order.
    pub fn spectrum(&self, shape: Shape) -> Vec<f64> {
        let fft = Fft2::new(shape.height, shape.width);
        let scale = 1.0 - self.shrink;
        self.kernel
            .transfer_function(&fft)
            .iter()
            .map(|c| scale * c.re)
            .collect()
    }
}
