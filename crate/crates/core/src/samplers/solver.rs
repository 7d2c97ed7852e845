use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::image::{ImageField, Shape};
use crate::kernel::Kernel;
use crate::operator::DegradationOp;
use crate::rng::GaussianSource;

/// Factorized precision `Q` of a Gaussian conditional, diagonal either in
/// the pixel basis or in the 2D Fourier basis (one spectrum shared by all
/// channels).
#[derive(Debug, Clone)]
pub enum ConditionalGaussianSolver {
    Diagonal {
        shape: Shape,
        precision: Vec<f64>,
    },
    FourierDiagonal {
        shape: Shape,
        precision: Vec<f64>,
        fft: Fft2,
    },
}

impl ConditionalGaussianSolver {
    pub fn diagonal(shape: Shape, precision: Vec<f64>) -> Result<Self> {
        if precision.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), precision.len()));
        }
        check_positive(&precision)?;
        Ok(ConditionalGaussianSolver::Diagonal { shape, precision })
    }

    /// `Q = data_weight * K^T K + ridge * I` for the periodic convolution `K`.
    pub fn fourier(shape: Shape, kernel: &Kernel, data_weight: f64, ridge: f64) -> Result<Self> {
        let fft = Fft2::new(shape.height, shape.width);
        let precision: Vec<f64> = kernel
            .transfer_function(&fft)
            .iter()
            .map(|a| data_weight * a.norm_sqr() + ridge)
            .collect();
        check_positive(&precision)?;
        Ok(ConditionalGaussianSolver::FourierDiagonal {
            shape,
            precision,
            fft,
        })
    }

    /// `Q = data_weight * A^T A + ridge * I` for operators whose normal
    /// matrix is diagonal in the pixel or Fourier basis.
    pub fn for_operator(
        op: &DegradationOp,
        shape: Shape,
        data_weight: f64,
        ridge: f64,
    ) -> Result<Self> {
        match op {
            DegradationOp::Circulant(k) => Self::fourier(shape, k, data_weight, ridge),
            DegradationOp::Mask(_) | DegradationOp::Downsample(_) => {
                // A^T A is a 0/1 diagonal; probe it with a ones image.
                let ones = ImageField::filled(shape, 1.0);
                let ata = op.adjoint(&op.apply(&ones)?, shape)?;
                let precision = ata.data().iter().map(|v| data_weight * v + ridge).collect();
                Self::diagonal(shape, precision)
            }
            DegradationOp::BlurThenDownsample { .. } => Err(Error::UnsupportedOperator {
                context: "Gaussian conditional (use the triple-split sampler)",
                variant: op.variant_name(),
            }),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Self::Diagonal { shape, .. } | Self::FourierDiagonal { shape, .. } => *shape,
        }
    }

    /// Eigenvalues of `Q` (per entry, or per frequency of one plane).
    pub fn precision(&self) -> &[f64] {
        match self {
            Self::Diagonal { precision, .. } | Self::FourierDiagonal { precision, .. } => precision,
        }
    }

    /// Operator norm of `Q^{-1}`.
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self
            .precision()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    fn check(&self, v: &ImageField) -> Result<()> {
        if v.shape() != self.shape() {
            return Err(Error::mismatch(self.shape(), v.shape()));
        }
        Ok(())
    }

    /// Applies `Q^{power}` with `power` in {-1, -1/2}.
    fn apply_power(&self, v: &ImageField, f: impl Fn(f64) -> f64) -> ImageField {
        match self {
            Self::Diagonal { precision, .. } => ImageField::from_raw(
                v.shape(),
                v.data()
                    .iter()
                    .zip(precision)
                    .map(|(a, q)| a * f(*q))
                    .collect(),
            ),
            Self::FourierDiagonal { precision, fft, .. } => {
                let mut out = v.clone();
                for c in 0..v.channels() {
                    let mut spec = fft.forward_real(&v.channel(c));
                    for (s, q) in spec.iter_mut().zip(precision) {
                        *s *= Complex64::new(f(*q), 0.0);
                    }
                    out.set_channel(c, &fft.inverse_real(spec));
                }
                out
            }
        }
    }

    /// `Q^{-1} v`.
    pub fn solve(&self, v: &ImageField) -> Result<ImageField> {
        self.check(v)?;
        Ok(self.apply_power(v, |q| 1.0 / q))
    }

    /// `mu + C w` with `C C^T = Q^{-1}` and `w ~ N(0, I)` from `rng`.
    pub fn sample(&self, mu: &ImageField, rng: &mut impl GaussianSource) -> Result<ImageField> {
        self.check(mu)?;
        let mut w = vec![0.0; mu.len()];
        rng.fill_standard_normal(&mut w);
        let w = ImageField::from_raw(mu.shape(), w);
        let cw = self.apply_power(&w, |q| 1.0 / q.sqrt());
        let out = mu.lincomb(1.0, &cw, 1.0);
        if !out.is_finite() {
            return Err(Error::NonFinite("ConditionalGaussianSolver::sample"));
        }
        Ok(out)
    }
}

fn check_positive(precision: &[f64]) -> Result<()> {
    if precision.iter().all(|q| *q > 0.0 && q.is_finite()) {
        Ok(())
    } else {
        Err(Error::Singular(
            "conditional precision has a nonpositive entry".into(),
        ))
    }
}

/// The `x | z` conditional of the split model: precision
/// `Q = A^T A / sigma^2 + I / rho2`, mean `Q^{-1}(A^T y / sigma^2 + z / rho2)`.
#[derive(Debug, Clone)]
pub struct XConditional {
    solver: ConditionalGaussianSolver,
    data_term: ImageField,
    rho2: f64,
}

impl XConditional {
    pub fn new(
        op: &DegradationOp,
        y: &ImageField,
        domain: Shape,
        sigma: f64,
        rho2: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && rho2 > 0.0) {
            return Err(Error::Config(format!(
                "sigma and rho2 must be > 0, got {sigma}, {rho2}"
            )));
        }
        let s2 = sigma * sigma;
        let solver = ConditionalGaussianSolver::for_operator(op, domain, 1.0 / s2, 1.0 / rho2)?;
        let data_term = op.adjoint(y, domain)?.scale(1.0 / s2);
        Ok(XConditional {
            solver,
            data_term,
            rho2,
        })
    }

    pub fn solver(&self) -> &ConditionalGaussianSolver {
        &self.solver
    }

    pub fn mean(&self, z: &ImageField) -> Result<ImageField> {
        self.solver
            .solve(&self.data_term.lincomb(1.0, z, 1.0 / self.rho2))
    }
}

/// `mu(z)` and the factorized precision of the `x | z` conditional.
pub fn conditional_mu_q(
    z: &ImageField,
    y: &ImageField,
    op: &DegradationOp,
    sigma: f64,
    rho2: f64,
) -> Result<(ImageField, ConditionalGaussianSolver)> {
    let cond = XConditional::new(op, y, z.shape(), sigma, rho2)?;
    let mu = cond.mean(z)?;
    Ok((mu, cond.solver))
}

/// One draw from `N(mu, Q^{-1})`.
pub fn sample_x_cond(
    mu: &ImageField,
    solver: &ConditionalGaussianSolver,
    rng: &mut impl GaussianSource,
) -> Result<ImageField> {
    solver.sample(mu, rng)
}
