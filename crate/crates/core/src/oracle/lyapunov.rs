use nalgebra::{DMatrix, DVector};

use super::GaussianDist;
use crate::error::{Error, Result};

const MAX_DOUBLINGS: usize = 64;

/// Spectral radius of a square matrix: symmetric eigenvalues when the
/// matrix is symmetric up to rounding, else the real Schur form, else
/// Gelfand's formula on repeated squares.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if (m - m.transpose()).amax() <= 1e-12 * m.amax() {
        let e = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
        return e.eigenvalues.amax();
    }
    if let Some(s) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        return s
            .complex_eigenvalues()
            .iter()
            .fold(0.0, |r, c| r.max(c.norm()));
    }
    let mut a = m / m.norm().max(f64::MIN_POSITIVE);
    let mut log_scale = m.norm().max(f64::MIN_POSITIVE).ln();
    let mut estimate = log_scale;
    for k in 1..=40 {
        a = &a * &a;
        let nrm = a.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        log_scale = 2.0 * log_scale + nrm.ln();
        a /= nrm;
        estimate = log_scale / 2f64.powi(k);
    }
    estimate.exp()
}

/// Solves `X = T X T^T + N` by doubling: after `k` rounds the partial sum
/// equals `2^k` plain fixed-point sweeps `X <- T X T^T + N` started at `N`.
/// Stops once the newest increment is below `1e-12` in max-abs, relative
/// to the largest entry of the running sum.
pub fn solve_discrete_lyapunov(t: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = n.clone();
    let mut a = t.clone();
    for _ in 0..MAX_DOUBLINGS {
        let inc = &a * &x * a.transpose();
        x += &inc;
        a = &a * &a;
        if inc.amax() <= 1e-12 * x.amax().max(f64::MIN_POSITIVE) {
            return Ok((&x + x.transpose()) * 0.5);
        }
        if !x.amax().is_finite() {
            break;
        }
    }
    Err(Error::NonContractive {
        radius: spectral_radius(t),
        gamma: f64::NAN,
    })
}

/// `v+ = T v + k + xi`, `xi ~ N(0, noise_cov)`.
#[derive(Debug, Clone)]
pub struct LinearRecursion {
    pub t: DMatrix<f64>,
    pub k: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
}

impl LinearRecursion {
    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.t)
    }

    /// The unique invariant Gaussian: mean `(I - T)^{-1} k`, covariance
    /// from the discrete Lyapunov equation.
    pub fn stationary(&self) -> Result<GaussianDist> {
        let r = self.spectral_radius();
        if r >= 1.0 {
            return Err(Error::NonContractive {
                radius: r,
                gamma: f64::NAN,
            });
        }
        let n = self.dim();
        let mean = (DMatrix::identity(n, n) - &self.t)
            .lu()
            .solve(&self.k)
            .ok_or_else(|| Error::Singular("I - T".into()))?;
        let cov = solve_discrete_lyapunov(&self.t, &self.noise_cov)?;
        GaussianDist::new(mean, cov)
    }

    /// Law after one step from `law`.
    pub fn push(&self, law: &GaussianDist) -> Result<GaussianDist> {
        let mean = &self.t * &law.mean + &self.k;
        let cov = &self.t * &law.cov * self.t.transpose() + &self.noise_cov;
        GaussianDist::new(mean, (&cov + cov.transpose()) * 0.5)
    }

    /// Laws after `1..=steps` steps started at the point `v0`.
    pub fn pushforward(&self, v0: &DVector<f64>, steps: usize) -> Result<Vec<GaussianDist>> {
        let n = self.dim();
        let mut law = GaussianDist::new(v0.clone(), DMatrix::zeros(n, n))?;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            law = self.push(&law)?;
            out.push(law.clone());
        }
        Ok(out)
    }
}
