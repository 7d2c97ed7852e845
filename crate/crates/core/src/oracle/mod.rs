//! Exact references for linear denoisers `D(x) = W x`.
//!
//! With a linear denoiser every law in play is Gaussian: the posterior, the
//! split-model target and the stationary law of the sampler itself. These
//! are assembled densely and compared in the 2-Wasserstein metric.

mod lyapunov;

pub use lyapunov::{solve_discrete_lyapunov, LinearRecursion};

use nalgebra::{DMatrix, DVector};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};
use crate::operator::{dense_matrix, DegradationOp};

/// Largest dimension handled by the dense routines.
pub const DENSE_LIMIT: usize = 4096;

fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(Error::TooLarge {
            n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianDist {
    /// Rejects non-square or asymmetric covariances (tolerance `1e-10`
    /// relative to the largest entry) and symmetrizes the rest.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::mismatch(
                format!("{n}x{n}"),
                format!("{}x{}", cov.nrows(), cov.ncols()),
            ));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianDist { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the coordinates `start..start + len`.
    pub fn marginal(&self, start: usize, len: usize) -> GaussianDist {
        GaussianDist {
            mean: self.mean.rows(start, len).into_owned(),
            cov: self.cov.view((start, start), (len, len)).into_owned(),
        }
    }

    /// Pointwise standard deviations.
    pub fn std(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Dense ingredients of `f(x) = |A x - y|^2 / (2 sigma^2)`.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
}

impl DenseProblem {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, sigma: f64) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::mismatch(a.nrows(), y.len()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        guard(a.ncols())?;
        Ok(DenseProblem { a, y, sigma })
    }

    pub fn from_operator(
        op: &DegradationOp,
        domain: Shape,
        y: &ImageField,
        sigma: f64,
    ) -> Result<Self> {
        guard(domain.len())?;
        DenseProblem::new(
            dense_matrix(op, domain)?,
            DVector::from_column_slice(y.data()),
            sigma,
        )
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// `A^T A / sigma^2`.
    pub fn data_precision(&self) -> DMatrix<f64> {
        self.a.tr_mul(&self.a) / (self.sigma * self.sigma)
    }

    /// `A^T y / sigma^2`.
    pub fn data_vector(&self) -> DVector<f64> {
        self.a.tr_mul(&self.y) / (self.sigma * self.sigma)
    }
}

/// Dense matrix of a linear denoiser on `shape`, column `j` being `D(e_j)`.
pub fn dense_denoiser(d: &Denoiser, shape: Shape) -> Result<DMatrix<f64>> {
    if !d.is_linear() {
        return Err(Error::InvalidInput("denoiser is not linear".into()));
    }
    let n = shape.len();
    guard(n)?;
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = d.apply(&ImageField::new(shape, e)?)?;
        w.column_mut(j).copy_from_slice(col.data());
    }
    Ok(w)
}

fn check_symmetric(w: &DMatrix<f64>, n: usize) -> Result<()> {
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::mismatch(
            format!("{n}x{n}"),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    if (w - w.transpose()).amax() > 1e-10 * w.amax().max(1.0) {
        return Err(Error::InvalidInput(
            "denoiser matrix must be symmetric".into(),
        ));
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(what.to_string()))
}

fn gaussian_from_precision(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    what: &str,
) -> Result<GaussianDist> {
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    let mean = chol.solve(linear);
    GaussianDist::new(mean, chol.inverse())
}

/// Posterior with precision `A^T A / sigma^2 + beta (I - W)`.
pub fn linear_posterior(w: &DMatrix<f64>, beta: f64, p: &DenseProblem) -> Result<GaussianDist> {
    let n = p.n();
    check_symmetric(w, n)?;
    let prec = p.data_precision() + (DMatrix::identity(n, n) - w) * beta;
    gaussian_from_precision(prec, &p.data_vector(), "posterior precision")
}

/// `Q = A^T A / sigma^2 + I / rho2`.
pub fn split_precision(p: &DenseProblem, rho2: f64) -> DMatrix<f64> {
    let n = p.n();
    p.data_precision() + DMatrix::identity(n, n) / rho2
}

/// The split model `pi_rho` on `(x, z)` together with its marginals.
#[derive(Debug, Clone)]
pub struct SplitLaw {
    /// Joint over `(x, z)`, `x` first.
    pub joint: GaussianDist,
    pub x: GaussianDist,
    pub z: GaussianDist,
}

impl SplitLaw {
    fn from_joint(joint: GaussianDist, n: usize) -> Self {
        SplitLaw {
            x: joint.marginal(0, n),
            z: joint.marginal(n, n),
            joint,
        }
    }
}

/// Exact `pi_rho(x, z) ~ exp(-f(x) - beta g(z) - |x - z|^2 / (2 rho2))`.
pub fn axda_marginal(w: &DMatrix<f64>, beta: f64, rho2: f64, p: &DenseProblem) -> Result<SplitLaw> {
    let n = p.n();
    check_symmetric(w, n)?;
    if !(rho2 > 0.0) || !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need rho2 > 0 and beta >= 0, got {rho2}, {beta}"
        )));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut prec = DMatrix::zeros(2 * n, 2 * n);
    prec.view_mut((0, 0), (n, n))
        .copy_from(&(p.data_precision() + &id / rho2));
    prec.view_mut((0, n), (n, n)).copy_from(&(-&id / rho2));
    prec.view_mut((n, 0), (n, n)).copy_from(&(-&id / rho2));
    prec.view_mut((n, n), (n, n))
        .copy_from(&((&id - w) * beta + &id / rho2));
    let mut lin = DVector::zeros(2 * n);
    lin.rows_mut(0, n).copy_from(&p.data_vector());
    let joint = gaussian_from_precision(prec, &lin, "split-model precision")?;
    Ok(SplitLaw::from_joint(joint, n))
}

/// Coefficients of the sampler's `z` chain `z+ = G z + c + xi`.
#[derive(Debug, Clone)]
pub struct ZRecursion {
    pub g: DMatrix<f64>,
    pub c: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
    pub q_inv: DMatrix<f64>,
}

/// `G = (1 - gamma/rho2) I - gamma beta (I - W) + (gamma/rho2^2) Q^{-1}`,
/// `c = (gamma/rho2) Q^{-1} A^T y / sigma^2`,
/// `Cov(xi) = 2 gamma I + (gamma/rho2)^2 Q^{-1}`.
pub fn z_recursion(
    w: &DMatrix<f64>,
    beta: f64,
    rho2: f64,
    gamma: f64,
    p: &DenseProblem,
) -> Result<ZRecursion> {
    let n = p.n();
    check_symmetric(w, n)?;
    let id = DMatrix::<f64>::identity(n, n);
    let q_inv = spd_inverse(&split_precision(p, rho2), "split precision Q")?;
    let g =
        &id * (1.0 - gamma / rho2) - (&id - w) * (gamma * beta) + &q_inv * (gamma / (rho2 * rho2));
    let c = &q_inv * p.data_vector() * (gamma / rho2);
    let k = gamma / rho2;
    let noise_cov = &id * (2.0 * gamma) + &q_inv * (k * k);
    Ok(ZRecursion {
        g,
        c,
        noise_cov,
        q_inv,
    })
}

/// Stationary law `pi_{rho,gamma}` of the split sampler: the `z` chain's
/// Gaussian fixed point extended by `x | z ~ N(mu(z), Q^{-1})`.
pub fn lwsgs_stationary(
    w: &DMatrix<f64>,
    beta: f64,
    rho2: f64,
    gamma: f64,
    p: &DenseProblem,
) -> Result<SplitLaw> {
    let n = p.n();
    let rec = z_recursion(w, beta, rho2, gamma, p)?;
    let radius = lyapunov::spectral_radius(&rec.g);
    if radius >= 1.0 {
        return Err(Error::NonContractive { radius, gamma });
    }
    let lin = LinearRecursion {
        t: rec.g.clone(),
        k: rec.c.clone(),
        noise_cov: rec.noise_cov.clone(),
    };
    let z = lin.stationary()?;
    // x = Q^{-1}(b + z / rho2) + Q^{-1/2} eta
    let m = &rec.q_inv / rho2;
    let x_mean = &rec.q_inv * p.data_vector() + &m * &z.mean;
    let cov_xz = &m * &z.cov;
    let cov_xx = &rec.q_inv + &cov_xz * m.transpose();
    let mut mean = DVector::zeros(2 * n);
    mean.rows_mut(0, n).copy_from(&x_mean);
    mean.rows_mut(n, n).copy_from(&z.mean);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    cov.view_mut((0, 0), (n, n)).copy_from(&cov_xx);
    cov.view_mut((0, n), (n, n)).copy_from(&cov_xz);
    cov.view_mut((n, 0), (n, n)).copy_from(&cov_xz.transpose());
    cov.view_mut((n, n), (n, n)).copy_from(&z.cov);
    Ok(SplitLaw::from_joint(GaussianDist::new(mean, cov)?, n))
}

/// One full sweep of the split sampler as a linear recursion on `(x, z)`
/// (`x` first): `z+ = A_z z + (gamma/rho2) x + sqrt(2 gamma) e`, then
/// `x+ = Q^{-1}(b + z+/rho2) + Q^{-1/2} eta`.
pub fn lwsgs_sweep(
    w: &DMatrix<f64>,
    beta: f64,
    rho2: f64,
    gamma: f64,
    p: &DenseProblem,
) -> Result<LinearRecursion> {
    let n = p.n();
    check_symmetric(w, n)?;
    let id = DMatrix::<f64>::identity(n, n);
    let q_inv = spd_inverse(&split_precision(p, rho2), "split precision Q")?;
    let a_z = &id * (1.0 - gamma * beta - gamma / rho2) + w * (gamma * beta);
    let c = gamma / rho2;
    let m = &q_inv / rho2;
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&(&m * c));
    t.view_mut((0, n), (n, n)).copy_from(&(&m * &a_z));
    t.view_mut((n, 0), (n, n)).copy_from(&(&id * c));
    t.view_mut((n, n), (n, n)).copy_from(&a_z);
    let mut k = DVector::zeros(2 * n);
    k.rows_mut(0, n).copy_from(&(&q_inv * p.data_vector()));
    let mut noise = DMatrix::zeros(2 * n, 2 * n);
    let s = 2.0 * gamma;
    noise
        .view_mut((0, 0), (n, n))
        .copy_from(&(&m * m.transpose() * s + &q_inv));
    noise.view_mut((0, n), (n, n)).copy_from(&(&m * s));
    noise
        .view_mut((n, 0), (n, n))
        .copy_from(&(m.transpose() * s));
    noise.view_mut((n, n), (n, n)).copy_from(&(&id * s));
    Ok(LinearRecursion {
        t,
        k,
        noise_cov: noise,
    })
}

/// One sweep of the triple-split sampler as a linear recursion on
/// `(x, z2)` (`x` first), with `A = S B` given densely as `s` and `b`.
#[allow(clippy::too_many_arguments)]
pub fn sr_sweep(
    w: &DMatrix<f64>,
    s: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: f64,
    beta: f64,
    rho1_2: f64,
    rho2_2: f64,
    gamma: f64,
) -> Result<LinearRecursion> {
    let n = b.ncols();
    guard(n)?;
    check_symmetric(w, n)?;
    let id = DMatrix::<f64>::identity(n, n);
    let s2 = sigma * sigma;
    let p1_inv = spd_inverse(&(s.tr_mul(s) / s2 + &id / rho1_2), "z1 precision")?;
    let p2_inv = spd_inverse(&(b.tr_mul(b) / rho1_2 + &id / rho2_2), "x precision")?;
    let sty = s.tr_mul(y) / s2;
    // z1 = P1^{-1}(S^T y / sigma^2 + B x / rho1^2) + P1^{-1/2} e1
    // x+ = P2^{-1}(B^T z1 / rho1^2 + z2 / rho2^2) + P2^{-1/2} e2
    let m = &p2_inv * b.transpose() / rho1_2;
    let k1 = &m * &p1_inv * b / rho1_2;
    let k2 = &p2_inv / rho2_2;
    let kx = &m * &p1_inv * sty;
    let nx = &m * &p1_inv * m.transpose() + &p2_inv;
    let a_z = &id * (1.0 - gamma * beta - gamma / rho2_2) + w * (gamma * beta);
    let c = gamma / rho2_2;
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&k1);
    t.view_mut((0, n), (n, n)).copy_from(&k2);
    t.view_mut((n, 0), (n, n)).copy_from(&(&k1 * c));
    t.view_mut((n, n), (n, n)).copy_from(&(&a_z + &k2 * c));
    let mut k = DVector::zeros(2 * n);
    k.rows_mut(0, n).copy_from(&kx);
    k.rows_mut(n, n).copy_from(&(&kx * c));
    let mut noise = DMatrix::zeros(2 * n, 2 * n);
    noise.view_mut((0, 0), (n, n)).copy_from(&nx);
    noise.view_mut((0, n), (n, n)).copy_from(&(&nx * c));
    noise.view_mut((n, 0), (n, n)).copy_from(&(&nx * c));
    noise
        .view_mut((n, n), (n, n))
        .copy_from(&(&nx * (c * c) + &id * (2.0 * gamma)));
    Ok(LinearRecursion {
        t,
        k,
        noise_cov: noise,
    })
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Squared 2-Wasserstein distance between Gaussians:
/// `|m1 - m2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2})`.
pub fn w2_squared(g1: &GaussianDist, g2: &GaussianDist) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::mismatch(g1.dim(), g2.dim()));
    }
    let dm = (&g1.mean - &g2.mean).norm_squared();
    let r = sym_sqrt(&g2.cov);
    let inner = &r * &g1.cov * &r;
    let e = nalgebra::SymmetricEigen::new((&inner + inner.transpose()) * 0.5);
    let cross: f64 = e.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((dm + g1.cov.trace() + g2.cov.trace() - 2.0 * cross).max(0.0))
}

/// 2-Wasserstein distance between Gaussians.
pub fn w2_gaussians(g1: &GaussianDist, g2: &GaussianDist) -> Result<f64> {
    w2_squared(g1, g2).map(f64::sqrt)
}

/// Constants entering the contraction and bias bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub beta: f64,
    pub rho2: f64,
    pub gamma: f64,
    pub m_g: f64,
    pub big_m_g: f64,
    /// Operator norm of `Q^{-1}`.
    pub q_inv_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValues {
    /// `C1 (1 - gamma beta m_g)^{2(t-1)} W2^2(start, pi_{rho,gamma})`.
    pub contraction_rhs: f64,
    /// `n gamma C2 M~^2 (1 + gamma^2 M~^2 / 12 + gamma M~^2 / (2 m~))`.
    pub bias_rhs: f64,
    pub rate: f64,
    pub c1: f64,
    pub c2: f64,
}

impl BoundInputs {
    /// `m~ = beta m_g + 1/rho2`.
    pub fn m_tilde(&self) -> f64 {
        self.beta * self.m_g + 1.0 / self.rho2
    }

    /// `M~ = beta M_g + 1/rho2`.
    pub fn big_m_tilde(&self) -> f64 {
        self.beta * self.big_m_g + 1.0 / self.rho2
    }

    /// `C1 = 1 + |Q^{-1}|^2 / rho2`.
    pub fn c1(&self) -> f64 {
        1.0 + self.q_inv_norm * self.q_inv_norm / self.rho2
    }

    /// `C2 = 2 C1 / (beta m_g)`.
    pub fn c2(&self) -> f64 {
        2.0 * self.c1() / (self.beta * self.m_g)
    }
}

/// Evaluates both bounds. `w2_init` is the squared distance of the start
/// to the stationary law.
pub fn evaluate_bounds(inputs: &BoundInputs, t: usize, w2_init: f64) -> Result<BoundValues> {
    let i = inputs;
    for (name, v) in [
        ("beta", i.beta),
        ("rho2", i.rho2),
        ("gamma", i.gamma),
        ("m_g", i.m_g),
        ("M_g", i.big_m_g),
        ("|Q^-1|", i.q_inv_norm),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    if i.m_g > i.big_m_g {
        return Err(Error::InvalidInput(format!(
            "need m_g <= M_g, got {} > {}",
            i.m_g, i.big_m_g
        )));
    }
    if t == 0 {
        return Err(Error::InvalidInput("t must be >= 1".into()));
    }
    if !(w2_init >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "w2_init must be >= 0, got {w2_init}"
        )));
    }
    let one_sided = 1.0 / i.big_m_tilde();
    if i.gamma > one_sided {
        return Err(Error::StepSize {
            gamma: i.gamma,
            bound: one_sided,
            bound_name: "1/(beta*M_g + 1/rho2)",
        });
    }
    let two_sided = 2.0 / (i.beta * i.m_g + i.big_m_tilde());
    if i.gamma > two_sided {
        return Err(Error::StepSize {
            gamma: i.gamma,
            bound: two_sided,
            bound_name: "2/(beta*m_g + beta*M_g + 1/rho2)",
        });
    }
    let rate = 1.0 - i.gamma * i.beta * i.m_g;
    let c1 = i.c1();
    let c2 = i.c2();
    let mt = i.m_tilde();
    let big = i.big_m_tilde();
    let g = i.gamma;
    let bias_rhs = i.n as f64
        * g
        * c2
        * big
        * big
        * (1.0 + g * g * big * big / 12.0 + g * big * big / (2.0 * mt));
    let contraction_rhs = c1 * rate.powi(2 * (t as i32 - 1)) * w2_init;
    Ok(BoundValues {
        contraction_rhs,
        bias_rhs,
        rate,
        c1,
        c2,
    })
}

/// `Sigma (Sigma + eps I)^{-1}`: the posterior-mean denoiser for the prior
/// `N(0, Sigma)` under white noise of variance `eps`.
pub fn mmse_denoiser_matrix(prior_cov: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let n = prior_cov.nrows();
    let inv = spd_inverse(
        &(prior_cov + DMatrix::identity(n, n) * eps),
        "Sigma + eps I",
    )?;
    Ok(prior_cov * inv)
}

/// `grad log p_eps(x) = -(Sigma + eps I)^{-1} x` for the smoothed prior
/// `p_eps = N(0, Sigma + eps I)`.
pub fn smoothed_prior_score(
    prior_cov: &DMatrix<f64>,
    eps: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = prior_cov.nrows();
    let chol = (prior_cov + DMatrix::identity(n, n) * eps)
        .cholesky()
        .ok_or_else(|| Error::Singular("Sigma + eps I".into()))?;
    Ok(-chol.solve(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> DenseProblem {
        DenseProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.7),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn posterior_without_prior_curvature() {
        let p = scalar_problem();
        let post = linear_posterior(&DMatrix::zeros(1, 1), 1.0, &p).unwrap();
        assert!((post.mean[0] - 0.35).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_stationary_by_hand() {
        let p = scalar_problem();
        let (wv, beta, rho2, gamma) = (0.5, 1.0, 1.0, 0.1);
        let law =
            lwsgs_stationary(&DMatrix::from_element(1, 1, wv), beta, rho2, gamma, &p).unwrap();
        let q_inv = 0.5;
        let g = 1.0 - gamma / rho2 - gamma * beta * (1.0 - wv) + gamma / (rho2 * rho2) * q_inv;
        let c = gamma / rho2 * q_inv * 0.7;
        let nz = 2.0 * gamma + (gamma / rho2).powi(2) * q_inv;
        assert!((law.z.cov[(0, 0)] - nz / (1.0 - g * g)).abs() < 1e-12);
        assert!((law.z.mean[0] - c / (1.0 - g)).abs() < 1e-12);
    }

    #[test]
    fn w2_closed_forms() {
        let n = 3;
        let a = GaussianDist::new(DVector::zeros(n), DMatrix::identity(n, n) * 4.0).unwrap();
        let b = GaussianDist::new(DVector::zeros(n), DMatrix::identity(n, n) * 0.25).unwrap();
        let w = w2_gaussians(&a, &b).unwrap();
        assert!((w - (3f64).sqrt() * 1.5).abs() < 1e-12);
        assert_eq!(w2_gaussians(&a, &a).unwrap(), 0.0);
        let shifted =
            GaussianDist::new(DVector::from_vec(vec![3.0, 0.0, 4.0]), a.cov.clone()).unwrap();
        assert!((w2_gaussians(&a, &shifted).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_first_step_and_window() {
        let i = BoundInputs {
            n: 1,
            beta: 1.0,
            rho2: 1.0,
            gamma: 0.2,
            m_g: 1.0,
            big_m_g: 1.0,
            q_inv_norm: 0.5,
        };
        let v = evaluate_bounds(&i, 1, 3.0).unwrap();
        assert!((v.contraction_rhs - v.c1 * 3.0).abs() < 1e-15);
        let bad = BoundInputs { gamma: 0.6, ..i };
        assert!(matches!(
            evaluate_bounds(&bad, 1, 1.0),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianDist::new(DVector::zeros(2), c).is_err());
    }
}
