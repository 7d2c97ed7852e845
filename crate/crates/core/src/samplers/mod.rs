//! Langevin-within-split-Gibbs sampling and its Langevin baselines.
//!
//! The split model augments the posterior with `z` tied to `x` by
//! `|x - z|^2 / (2 rho2)`. Each sweep takes one Langevin step on `z | x`,
//!
//! `z+ = (1 - g b - g / rho2) z + g b D(z) + (g / rho2) x + sqrt(2 g) w`,
//!
//! with `g` the step size and `b` the prior weight, then draws `x | z`
//! exactly from its Gaussian conditional.

mod chain;
mod solver;
mod summary;

pub use chain::{
    lmc_z_step, run_chains, run_lwsgs, run_method, run_pnp_ula, run_red_ula, run_sr_split,
    run_transition, ChainState, LwsgsKernel, Method, Projection, RunOptions, SrKernel, StepInfo,
    Transition, UlaKernel,
};
pub use solver::{conditional_mu_q, sample_x_cond, ConditionalGaussianSolver, XConditional};
pub use summary::{ChainSummary, StepCheck};

use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};
use crate::operator::{DegradationOp, NoiseModel};

/// `1 / (beta * M_g + 1 / rho2)`.
pub fn max_step_size(beta: f64, big_m_g: f64, rho2: f64) -> Result<f64> {
    positive(&[("beta", beta), ("M_g", big_m_g), ("rho2", rho2)])?;
    Ok(1.0 / (beta * big_m_g + 1.0 / rho2))
}

/// `2 / (beta * m_g + beta * M_g + 1 / rho2)`.
pub fn max_step_size_two_sided(beta: f64, m_g: f64, big_m_g: f64, rho2: f64) -> Result<f64> {
    positive(&[
        ("beta", beta),
        ("m_g", m_g),
        ("M_g", big_m_g),
        ("rho2", rho2),
    ])?;
    Ok(2.0 / (beta * m_g + beta * big_m_g + 1.0 / rho2))
}

/// Largest Hessian eigenvalue of any RED potential built from a
/// nonexpansive denoiser.
pub const UNIVERSAL_M_G: f64 = 2.0;

/// `0.99 * max_step_size(beta, 2, rho2)`.
pub fn default_gamma(beta: f64, rho2: f64) -> Result<f64> {
    Ok(0.99 * max_step_size(beta, UNIVERSAL_M_G, rho2)?)
}

fn positive(args: &[(&str, f64)]) -> Result<()> {
    for (name, v) in args {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub beta: f64,
    pub rho2: f64,
    /// Couplings of the triple split (`z1` to `Bx`, and `z2` to `x`).
    pub rho1_2: Option<f64>,
    pub rho2_2: Option<f64>,
    pub gamma: f64,
    pub n_mc: usize,
    pub n_bi: usize,
    pub thin: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Config with the default step size for `(beta, rho2)`.
    pub fn new(beta: f64, rho2: f64, n_mc: usize, n_bi: usize) -> Result<Self> {
        Ok(SamplerConfig {
            beta,
            rho2,
            rho1_2: None,
            rho2_2: None,
            gamma: default_gamma(beta, rho2)?,
            n_mc,
            n_bi,
            thin: 1,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        if !(self.rho2 > 0.0) || !self.rho2.is_finite() {
            return bad(format!("rho2 must be > 0, got {}", self.rho2));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        for (name, v) in [("rho1_2", self.rho1_2), ("rho2_2", self.rho2_2)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return bad(format!("{name} must be > 0, got {v}"));
                }
            }
        }
        if self.n_mc == 0 {
            return bad("n_mc must be positive".into());
        }
        if self.n_bi >= self.n_mc {
            return bad(format!(
                "n_bi ({}) must be < n_mc ({})",
                self.n_bi, self.n_mc
            ));
        }
        if self.thin == 0 {
            return bad("thin must be positive".into());
        }
        Ok(())
    }
}

/// Observation `y = A x + sigma w` together with the domain of `x`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub y: ImageField,
    pub op: DegradationOp,
    pub noise: NoiseModel,
    pub domain: Shape,
}

impl Problem {
    pub fn new(y: ImageField, op: DegradationOp, noise: NoiseModel, domain: Shape) -> Result<Self> {
        let range = op.range_shape(domain)?;
        if range != y.shape() {
            return Err(Error::mismatch(range, y.shape()));
        }
        Ok(Problem {
            y,
            op,
            noise,
            domain,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.noise.sigma()
    }

    /// `A^T y` rescaled to `[0, 1]`.
    pub fn initial_state(&self) -> Result<ImageField> {
        Ok(self.op.adjoint(&self.y, self.domain)?.normalized_unit())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_bounds_by_hand() {
        assert!((max_step_size(1.0, 2.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!((max_step_size_two_sided(1.0, 1.0, 2.0, 1.0).unwrap() - 0.5).abs() < 1e-16);
        assert!(max_step_size(0.0, 2.0, 1.0).is_err());
        let (beta, rho2) = (8e-2, 6e-8);
        let g = default_gamma(beta, rho2).unwrap();
        assert!((g - 0.99 / (2.0 * beta + 1.0 / rho2)).abs() <= 1e-15 * g);
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::new(1.0, 1.0, 10, 5).unwrap();
        assert!(c.validate().is_ok());
        c.n_bi = 10;
        assert!(c.validate().is_err());
        c.n_bi = 0;
        c.thin = 0;
        assert!(c.validate().is_err());
        c.thin = 1;
        c.rho1_2 = Some(-1.0);
        assert!(c.validate().is_err());
    }
}
