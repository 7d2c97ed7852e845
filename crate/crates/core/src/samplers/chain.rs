use std::time::Instant;

use super::solver::{ConditionalGaussianSolver, XConditional};
use super::summary::{ChainSummary, Moments, StepCheck};
use super::{Problem, SamplerConfig};
use crate::denoise::{Denoiser, DenoiserSchedule};
use crate::error::{Error, Result};
use crate::image::ImageField;
use crate::kernel::Kernel;
use crate::operator::{circular_convolve, DegradationOp};
use crate::par::{self, Execution};
use crate::rng::{GaussianSource, RngStream};

/// One Langevin step on `z | x`:
/// `(1 - g b - g / rho2) z + g b D(z) + (g / rho2) x + sqrt(2 g) w`.
pub fn lmc_z_step(
    z: &ImageField,
    x: &ImageField,
    d: &Denoiser,
    beta: f64,
    rho2: f64,
    gamma: f64,
    rng: &mut impl GaussianSource,
) -> Result<ImageField> {
    if z.shape() != x.shape() {
        return Err(Error::mismatch(z.shape(), x.shape()));
    }
    if !(gamma >= 0.0) || !(rho2 > 0.0) {
        return Err(Error::Config(format!(
            "need gamma >= 0 and rho2 > 0, got {gamma}, {rho2}"
        )));
    }
    let dz = d.apply(z)?;
    let gb = gamma * beta;
    let c = gamma / rho2;
    let a = 1.0 - gb - c;
    let s = (2.0 * gamma).sqrt();
    let mut w = vec![0.0; z.len()];
    rng.fill_standard_normal(&mut w);
    let data: Vec<f64> = (0..z.len())
        .map(|i| a * z.data()[i] + gb * dz.data()[i] + c * x.data()[i] + s * w[i])
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lmc_z_step"));
    }
    ImageField::new(z.shape(), data)
}

/// Mutable state of one chain. `z` is the Langevin-updated split variable
/// (`z2` in the triple split) and `z1` the extra split of the triple split.
#[derive(Debug, Clone)]
pub struct ChainState<G = RngStream> {
    pub x: ImageField,
    pub z: Option<ImageField>,
    pub z1: Option<ImageField>,
    pub t: usize,
    pub rng: G,
}

impl<G> ChainState<G> {
    fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.z.as_ref().is_none_or(ImageField::is_finite)
            && self.z1.as_ref().is_none_or(ImageField::is_finite)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepInfo {
    pub projection_active: bool,
}

/// A Markov kernel acting on [`ChainState`].
pub trait Transition: Sync {
    fn init<G: GaussianSource>(&self, x0: ImageField, rng: G) -> ChainState<G>;
    fn step<G: GaussianSource>(&self, state: &mut ChainState<G>) -> Result<StepInfo>;
    fn step_check(&self) -> StepCheck;
}

fn take_z(z: &Option<ImageField>) -> Result<&ImageField> {
    z.as_ref()
        .ok_or_else(|| Error::Config("chain state has no split variable".into()))
}

/// Checks `gamma <= 1 / (beta M_g + 1 / rho2)` when the denoiser is fixed
/// and linear.
fn check_step(
    d: &dyn DenoiserSchedule,
    shape: crate::image::Shape,
    beta: f64,
    rho2: f64,
    gamma: f64,
) -> Result<StepCheck> {
    let Some(curv) = d.fixed().and_then(|den| den.curvature(shape)) else {
        return Ok(StepCheck::Unverified);
    };
    let bound = 1.0 / (beta * curv?.big_m_g.max(0.0) + 1.0 / rho2);
    if gamma > bound * (1.0 + 1e-12) {
        return Err(Error::StepSize {
            gamma,
            bound,
            bound_name: "1/(beta*M_g + 1/rho2)",
        });
    }
    Ok(StepCheck::Verified { bound })
}

/// Langevin-within-split-Gibbs: LMC on `z | x`, exact draw of `x | z`.
pub struct LwsgsKernel<'a> {
    cond: XConditional,
    d: &'a dyn DenoiserSchedule,
    beta: f64,
    rho2: f64,
    gamma: f64,
    check: StepCheck,
}

impl<'a> LwsgsKernel<'a> {
    pub fn new(cfg: &SamplerConfig, p: &Problem, d: &'a dyn DenoiserSchedule) -> Result<Self> {
        cfg.validate()?;
        let cond = XConditional::new(&p.op, &p.y, p.domain, p.sigma(), cfg.rho2)?;
        let check = check_step(d, p.domain, cfg.beta, cfg.rho2, cfg.gamma)?;
        Ok(LwsgsKernel {
            cond,
            d,
            beta: cfg.beta,
            rho2: cfg.rho2,
            gamma: cfg.gamma,
            check,
        })
    }

    pub fn conditional(&self) -> &XConditional {
        &self.cond
    }
}

impl Transition for LwsgsKernel<'_> {
    fn init<G: GaussianSource>(&self, x0: ImageField, rng: G) -> ChainState<G> {
        ChainState {
            z: Some(x0.clone()),
            x: x0,
            z1: None,
            t: 0,
            rng,
        }
    }

    fn step<G: GaussianSource>(&self, s: &mut ChainState<G>) -> Result<StepInfo> {
        let den = self.d.at(s.t)?;
        let z = lmc_z_step(
            take_z(&s.z)?,
            &s.x,
            &den,
            self.beta,
            self.rho2,
            self.gamma,
            &mut s.rng,
        )?;
        let mu = self.cond.mean(&z)?;
        s.x = self.cond.solver().sample(&mu, &mut s.rng)?;
        s.z = Some(z);
        s.t += 1;
        Ok(StepInfo::default())
    }

    fn step_check(&self) -> StepCheck {
        self.check
    }
}

/// Box-projection drift `(gamma / lambda)(clamp(x, lo, hi) - x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lo: f64,
    pub hi: f64,
    /// `None` disables the drift term.
    pub lambda: Option<f64>,
}

/// Unadjusted Langevin on the full posterior:
/// `x+ = x - g A^T(Ax - y)/sigma^2 + g b (D(x) - x) + sqrt(2 g) w`,
/// optionally with a box-projection drift.
pub struct UlaKernel<'a> {
    p: &'a Problem,
    d: &'a dyn DenoiserSchedule,
    beta: f64,
    gamma: f64,
    projection: Option<Projection>,
}

impl<'a> UlaKernel<'a> {
    pub fn new(
        cfg: &SamplerConfig,
        p: &'a Problem,
        d: &'a dyn DenoiserSchedule,
        projection: Option<Projection>,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(pr) = projection {
            if !(pr.lo < pr.hi) {
                return Err(Error::Config(format!("empty box [{}, {}]", pr.lo, pr.hi)));
            }
            if let Some(l) = pr.lambda {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::Config(format!("lambda must be > 0, got {l}")));
                }
            }
        }
        Ok(UlaKernel {
            p,
            d,
            beta: cfg.beta,
            gamma: cfg.gamma,
            projection,
        })
    }
}

impl Transition for UlaKernel<'_> {
    fn init<G: GaussianSource>(&self, x0: ImageField, rng: G) -> ChainState<G> {
        ChainState {
            x: x0,
            z: None,
            z1: None,
            t: 0,
            rng,
        }
    }

    fn step<G: GaussianSource>(&self, s: &mut ChainState<G>) -> Result<StepInfo> {
        let den = self.d.at(s.t)?;
        let x = &s.x;
        let resid = self.p.op.apply(x)?.sub(&self.p.y);
        let s2 = self.p.sigma() * self.p.sigma();
        let grad_f = self.p.op.adjoint(&resid, self.p.domain)?;
        let dx = den.apply(x)?;
        let (g, gb, sq) = (
            self.gamma,
            self.gamma * self.beta,
            (2.0 * self.gamma).sqrt(),
        );
        let mut w = vec![0.0; x.len()];
        s.rng.fill_standard_normal(&mut w);
        let mut next: Vec<f64> = (0..x.len())
            .map(|i| {
                let xi = x.data()[i];
                xi - g * (grad_f.data()[i] / s2) + gb * (dx.data()[i] - xi) + sq * w[i]
            })
            .collect();
        let mut info = StepInfo::default();
        if let Some(Projection {
            lo,
            hi,
            lambda: Some(lambda),
        }) = self.projection
        {
            if x.data().iter().any(|&v| v < lo || v > hi) {
                info.projection_active = true;
                let c = g / lambda;
                for (n, &xi) in next.iter_mut().zip(x.data()) {
                    *n += c * (xi.clamp(lo, hi) - xi);
                }
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ULA step"));
        }
        s.x = ImageField::new(x.shape(), next)?;
        s.t += 1;
        Ok(info)
    }

    fn step_check(&self) -> StepCheck {
        StepCheck::Unverified
    }
}

/// Triple split for `A = S B`: `z1 ~ B x` carries the subsampling, `z2 ~ x`
/// carries the prior.
pub struct SrKernel<'a> {
    kernel: Kernel,
    kernel_rev: Kernel,
    sty: ImageField,
    z1_solver: ConditionalGaussianSolver,
    x_solver: ConditionalGaussianSolver,
    d: &'a dyn DenoiserSchedule,
    beta: f64,
    rho1_2: f64,
    rho2_2: f64,
    gamma: f64,
    check: StepCheck,
}

impl<'a> SrKernel<'a> {
    pub fn new(cfg: &SamplerConfig, p: &Problem, d: &'a dyn DenoiserSchedule) -> Result<Self> {
        cfg.validate()?;
        let DegradationOp::BlurThenDownsample { kernel, factor } = &p.op else {
            return Err(Error::UnsupportedOperator {
                context: "triple-split sampler",
                variant: p.op.variant_name(),
            });
        };
        let (Some(rho1_2), Some(rho2_2)) = (cfg.rho1_2, cfg.rho2_2) else {
            return Err(Error::Config(
                "triple split needs both rho1_2 and rho2_2".into(),
            ));
        };
        let s2 = p.sigma() * p.sigma();
        let s_op = DegradationOp::Downsample(*factor);
        let z1_solver =
            ConditionalGaussianSolver::for_operator(&s_op, p.domain, 1.0 / s2, 1.0 / rho1_2)?;
        let sty = s_op.adjoint(&p.y, p.domain)?.scale(1.0 / s2);
        let x_solver =
            ConditionalGaussianSolver::fourier(p.domain, kernel, 1.0 / rho1_2, 1.0 / rho2_2)?;
        let check = check_step(d, p.domain, cfg.beta, rho2_2, cfg.gamma)?;
        Ok(SrKernel {
            kernel: kernel.clone(),
            kernel_rev: kernel.reversed(),
            sty,
            z1_solver,
            x_solver,
            d,
            beta: cfg.beta,
            rho1_2,
            rho2_2,
            gamma: cfg.gamma,
            check,
        })
    }

    /// Mean of `z1 | x, y`.
    pub fn z1_mean(&self, x: &ImageField) -> Result<ImageField> {
        let bx = circular_convolve(x, &self.kernel);
        self.z1_solver
            .solve(&self.sty.lincomb(1.0, &bx, 1.0 / self.rho1_2))
    }

    /// Mean of `x | z1, z2`.
    pub fn x_mean(&self, z1: &ImageField, z2: &ImageField) -> Result<ImageField> {
        let btz = circular_convolve(z1, &self.kernel_rev);
        self.x_solver
            .solve(&btz.lincomb(1.0 / self.rho1_2, z2, 1.0 / self.rho2_2))
    }
}

impl Transition for SrKernel<'_> {
    fn init<G: GaussianSource>(&self, x0: ImageField, rng: G) -> ChainState<G> {
        ChainState {
            z1: Some(circular_convolve(&x0, &self.kernel)),
            z: Some(x0.clone()),
            x: x0,
            t: 0,
            rng,
        }
    }

    fn step<G: GaussianSource>(&self, s: &mut ChainState<G>) -> Result<StepInfo> {
        let den = self.d.at(s.t)?;
        let m1 = self.z1_mean(&s.x)?;
        let z1 = self.z1_solver.sample(&m1, &mut s.rng)?;
        let mx = self.x_mean(&z1, take_z(&s.z)?)?;
        s.x = self.x_solver.sample(&mx, &mut s.rng)?;
        let z2 = lmc_z_step(
            take_z(&s.z)?,
            &s.x,
            &den,
            self.beta,
            self.rho2_2,
            self.gamma,
            &mut s.rng,
        )?;
        s.z = Some(z2);
        s.z1 = Some(z1);
        s.t += 1;
        Ok(StepInfo::default())
    }

    fn step_check(&self) -> StepCheck {
        self.check
    }
}

/// What to record while running.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Flat pixel indices whose post-burn-in values are traced.
    pub probes: Vec<usize>,
    /// Keep every `thin`-th post-burn-in `x`.
    pub store_samples: bool,
    /// Also accumulate moments of the split variable.
    pub track_z: bool,
    /// Overrides the default start `A^T y` rescaled to `[0, 1]`.
    pub init: Option<ImageField>,
}

/// Runs `kernel` from `state` for `cfg.n_mc` iterations.
pub fn run_transition<T: Transition, G: GaussianSource>(
    kernel: &T,
    cfg: &SamplerConfig,
    mut state: ChainState<G>,
    opts: &RunOptions,
) -> Result<ChainSummary> {
    cfg.validate()?;
    let shape = state.x.shape();
    let n = shape.len();
    if let Some(&bad) = opts.probes.iter().find(|&&p| p >= n) {
        return Err(Error::InvalidInput(format!(
            "probe {bad} outside {n} pixels"
        )));
    }
    let start = Instant::now();
    let mut mx = Moments::new(n);
    let mut mz = opts.track_z.then(|| Moments::new(n));
    let mut traces = vec![Vec::with_capacity(cfg.n_mc - cfg.n_bi); opts.probes.len()];
    let mut samples = Vec::new();
    let mut projection_steps = 0;
    for t in 0..cfg.n_mc {
        let info = match kernel.step(&mut state) {
            Ok(i) => i,
            Err(Error::NonFinite(_)) => return Err(Error::Divergence { iteration: t + 1 }),
            Err(e) => return Err(e),
        };
        if !state.is_finite() {
            return Err(Error::Divergence { iteration: t + 1 });
        }
        projection_steps += info.projection_active as usize;
        if t < cfg.n_bi {
            continue;
        }
        mx.push(state.x.data());
        if let (Some(m), Some(z)) = (mz.as_mut(), state.z.as_ref()) {
            m.push(z.data());
        }
        for (tr, &p) in traces.iter_mut().zip(&opts.probes) {
            tr.push(state.x.data()[p]);
        }
        if opts.store_samples && (t - cfg.n_bi).is_multiple_of(cfg.thin) {
            samples.push(state.x.clone());
        }
    }
    Ok(ChainSummary::from_moments(
        shape,
        &mx,
        mz.as_ref(),
        samples,
        opts.probes.clone(),
        traces,
        cfg.n_mc,
        projection_steps,
        kernel.step_check(),
        start.elapsed().as_secs_f64(),
    ))
}

/// Which recursion to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Lwsgs,
    RedUla,
    PnpUla(Projection),
    SrSplit,
}

/// Runs chain `chain` of `method`; its random stream is derived from
/// `(cfg.seed, chain)`.
pub fn run_method(
    method: Method,
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    opts: &RunOptions,
    chain: u64,
) -> Result<ChainSummary> {
    let x0 = match &opts.init {
        Some(x) if x.shape() != p.domain => return Err(Error::mismatch(p.domain, x.shape())),
        Some(x) => x.clone(),
        None => p.initial_state()?,
    };
    let rng = RngStream::for_chain(cfg.seed, chain);
    match method {
        Method::Lwsgs => {
            let k = LwsgsKernel::new(cfg, p, d)?;
            run_transition(&k, cfg, k.init(x0, rng), opts)
        }
        Method::RedUla => {
            let k = UlaKernel::new(cfg, p, d, None)?;
            run_transition(&k, cfg, k.init(x0, rng), opts)
        }
        Method::PnpUla(pr) => {
            let k = UlaKernel::new(cfg, p, d, Some(pr))?;
            run_transition(&k, cfg, k.init(x0, rng), opts)
        }
        Method::SrSplit => {
            let k = SrKernel::new(cfg, p, d)?;
            run_transition(&k, cfg, k.init(x0, rng), opts)
        }
    }
}

/// Runs `n_chains` independent chains and pools them in chain order.
pub fn run_chains(
    method: Method,
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    opts: &RunOptions,
    n_chains: usize,
    exec: Execution,
) -> Result<ChainSummary> {
    if n_chains == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    let runs = par::try_map_indexed(n_chains, exec, |k| {
        run_method(method, cfg, p, d, opts, k as u64)
    })?;
    let mut it = runs.into_iter();
    let first = it.next().expect("n_chains > 0");
    it.try_fold(first, |acc, s| acc.merge(&s))
}

pub fn run_lwsgs(
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    opts: &RunOptions,
) -> Result<ChainSummary> {
    run_method(Method::Lwsgs, cfg, p, d, opts, 0)
}

pub fn run_red_ula(
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    opts: &RunOptions,
) -> Result<ChainSummary> {
    run_method(Method::RedUla, cfg, p, d, opts, 0)
}

pub fn run_pnp_ula(
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    bounds: (f64, f64),
    lambda: Option<f64>,
    opts: &RunOptions,
) -> Result<ChainSummary> {
    let pr = Projection {
        lo: bounds.0,
        hi: bounds.1,
        lambda,
    };
    run_method(Method::PnpUla(pr), cfg, p, d, opts, 0)
}

pub fn run_sr_split(
    cfg: &SamplerConfig,
    p: &Problem,
    d: &dyn DenoiserSchedule,
    opts: &RunOptions,
) -> Result<ChainSummary> {
    run_method(Method::SrSplit, cfg, p, d, opts, 0)
}
