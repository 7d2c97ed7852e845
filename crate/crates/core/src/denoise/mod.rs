//! Denoisers and the RED potential built from them.
//!
//! A denoiser `D` induces `g(x) = 1/2 <x, x - D(x)>` whose gradient, under
//! the RED conditions, is the residual `x - D(x)`. The built-in variants
//! are linear with symmetric Jacobian so the identity is exact for them.

mod conv;
mod dct;
mod plugin;
mod verify;

use std::borrow::Cow;
use std::path::PathBuf;

pub use conv::SymmetricConv;
pub use dct::TransformShrink;
pub use plugin::PluginDenoiser;
pub use verify::{
    default_probe_eps, extract_patches, fd_jacobian, fd_jacobian_with, verify_red_conditions,
    verify_red_conditions_with, RedCheckOptions, RedConditionReport, DENSE_LIMIT,
};

use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};
use crate::kernel::Kernel;

/// Default contraction margin applied to built-in denoisers.
pub const DEFAULT_SHRINK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum Denoiser {
    SymmetricConv(SymmetricConv),
    TransformShrink(TransformShrink),
    Plugin(PluginDenoiser),
}

/// Extreme eigenvalues of the Hessian `I - W` of the RED potential for a
/// linear symmetric denoiser `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub m_g: f64,
    pub big_m_g: f64,
}

impl Denoiser {
    pub fn apply(&self, x: &ImageField) -> Result<ImageField> {
        let y = match self {
            Denoiser::SymmetricConv(d) => d.apply(x),
            Denoiser::TransformShrink(d) => d.apply(x)?,
            Denoiser::Plugin(d) => d.apply(x)?,
        };
        if !y.is_finite() {
            return Err(match self {
                Denoiser::Plugin(_) => Error::Denoiser {
                    message: "plugin produced non-finite output".into(),
                    diagnostics: None,
                },
                _ => Error::NonFinite("denoiser"),
            });
        }
        Ok(y)
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, Denoiser::Plugin(_))
    }

    /// Jacobian eigenvalues on one plane of `shape` (the same for every
    /// channel). `None` for plugins.
    pub fn spectrum(&self, shape: Shape) -> Option<Result<Vec<f64>>> {
        match self {
            Denoiser::SymmetricConv(d) => Some(Ok(d.spectrum(shape))),
            Denoiser::TransformShrink(d) => Some(d.spectrum(shape)),
            Denoiser::Plugin(_) => None,
        }
    }

    /// `m_g = 1 - max eig(W)` and `M_g = 1 - min eig(W)` for linear variants.
    pub fn curvature(&self, shape: Shape) -> Option<Result<Curvature>> {
        self.spectrum(shape).map(|s| {
            let s = s?;
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(Curvature {
                m_g: 1.0 - hi,
                big_m_g: 1.0 - lo,
            })
        })
    }
}

/// `D(x)`.
pub fn denoise_apply(d: &Denoiser, x: &ImageField) -> Result<ImageField> {
    d.apply(x)
}

/// `g(x) = 1/2 <x, x - D(x)>`.
pub fn red_potential(d: &Denoiser, x: &ImageField) -> Result<f64> {
    let dx = d.apply(x)?;
    Ok(0.5 * x.dot(&x.sub(&dx)))
}

/// The denoising residual `x - D(x)`.
pub fn red_gradient(d: &Denoiser, x: &ImageField) -> Result<ImageField> {
    Ok(x.sub(&d.apply(x)?))
}

/// Source of the denoiser used at iteration `t`. A plain [`Denoiser`] is
/// constant; [`AnnealedDenoiser`] follows a strength schedule.
pub trait DenoiserSchedule: Sync {
    fn at(&self, t: usize) -> Result<Cow<'_, Denoiser>>;

    /// The denoiser in force once any schedule has frozen.
    fn terminal(&self) -> Result<Cow<'_, Denoiser>>;

    /// The denoiser itself when it never changes.
    fn fixed(&self) -> Option<&Denoiser> {
        None
    }
}

impl DenoiserSchedule for Denoiser {
    fn at(&self, _t: usize) -> Result<Cow<'_, Denoiser>> {
        Ok(Cow::Borrowed(self))
    }

    fn terminal(&self) -> Result<Cow<'_, Denoiser>> {
        Ok(Cow::Borrowed(self))
    }

    fn fixed(&self) -> Option<&Denoiser> {
        Some(self)
    }
}

/// Log-uniform strength decay from `start` to `end` over the first `steps`
/// iterations, then frozen at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSchedule {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl NuSchedule {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self> {
        if !(start > 0.0 && end > 0.0) || !start.is_finite() || !end.is_finite() {
            return Err(Error::Config(format!(
                "schedule endpoints must be positive, got {start} -> {end}"
            )));
        }
        Ok(NuSchedule { start, end, steps })
    }

    pub fn value(&self, t: usize) -> f64 {
        if self.steps <= 1 || t + 1 >= self.steps {
            return self.end;
        }
        let s = t as f64 / (self.steps - 1) as f64;
        (self.start.ln() * (1.0 - s) + self.end.ln() * s).exp()
    }
}

/// Denoiser rebuilt from a [`DenoiserSpec`] at the scheduled strength.
#[derive(Debug, Clone)]
pub struct AnnealedDenoiser {
    spec: DenoiserSpec,
    shape: Shape,
    schedule: NuSchedule,
}

impl AnnealedDenoiser {
    pub fn new(spec: DenoiserSpec, shape: Shape, schedule: NuSchedule) -> Result<Self> {
        spec.build_with_strength(shape, schedule.start)?;
        spec.build_with_strength(shape, schedule.end)?;
        Ok(AnnealedDenoiser {
            spec,
            shape,
            schedule,
        })
    }

    pub fn schedule(&self) -> &NuSchedule {
        &self.schedule
    }
}

impl DenoiserSchedule for AnnealedDenoiser {
    fn at(&self, t: usize) -> Result<Cow<'_, Denoiser>> {
        self.spec
            .build_with_strength(self.shape, self.schedule.value(t))
            .map(Cow::Owned)
    }

    fn terminal(&self) -> Result<Cow<'_, Denoiser>> {
        self.spec
            .build_with_strength(self.shape, self.schedule.end)
            .map(Cow::Owned)
    }
}

/// Textual denoiser description, resolved against an image shape.
///
/// Forms:
/// - `gauss:<size>:<std>[:<shrink>]`
/// - `identity[:<shrink>]` (scaled identity)
/// - `dct:<cutoff>[:<shrink>]` (smooth DCT low-pass)
/// - `plugin:<path>[:<nu>]`
///
/// The strength `nu` sets the Gaussian width for `gauss`, divides the
/// cutoff for `dct`, and is forwarded verbatim to plugins.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSpec {
    Gauss { size: usize, std: f64, shrink: f64 },
    Identity { shrink: f64 },
    Dct { cutoff: f64, shrink: f64 },
    Plugin { program: PathBuf, nu: f64 },
}

impl DenoiserSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("denoiser spec {s:?}: {why}"));
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("{v:?} is not a number")))
        };
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(':').collect()
        };
        let shrink_at = |i: usize| -> Result<f64> {
            parts.get(i).map(|v| num(v)).unwrap_or(Ok(DEFAULT_SHRINK))
        };
        match kind.trim() {
            "gauss" => {
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(bad("expected gauss:<size>:<std>[:<shrink>]"));
                }
                let size = parts[0]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad("kernel size must be an integer"))?;
                Ok(DenoiserSpec::Gauss {
                    size,
                    std: num(parts[1])?,
                    shrink: shrink_at(2)?,
                })
            }
            "identity" => {
                if parts.len() > 1 {
                    return Err(bad("expected identity[:<shrink>]"));
                }
                Ok(DenoiserSpec::Identity {
                    shrink: shrink_at(0)?,
                })
            }
            "dct" => {
                if parts.is_empty() || parts.len() > 2 {
                    return Err(bad("expected dct:<cutoff>[:<shrink>]"));
                }
                Ok(DenoiserSpec::Dct {
                    cutoff: num(parts[0])?,
                    shrink: shrink_at(1)?,
                })
            }
            "plugin" => {
                // The path may itself contain ':'; a trailing numeric field is nu.
                if rest.is_empty() {
                    return Err(bad("expected plugin:<path>[:<nu>]"));
                }
                let (program, nu) = match rest.rsplit_once(':') {
                    Some((p, v)) if v.trim().parse::<f64>().is_ok() => (p, num(v)?),
                    _ => (rest, 0.0),
                };
                Ok(DenoiserSpec::Plugin {
                    program: PathBuf::from(program),
                    nu,
                })
            }
            other => Err(bad(&format!("unknown denoiser kind {other:?}"))),
        }
    }

    pub fn build(&self, shape: Shape) -> Result<Denoiser> {
        Ok(match self {
            DenoiserSpec::Gauss { size, std, shrink } => Denoiser::SymmetricConv(
                SymmetricConv::new(Kernel::gaussian(*size, *std)?, *shrink)?,
            ),
            DenoiserSpec::Identity { shrink } => {
                Denoiser::SymmetricConv(SymmetricConv::scaled_identity(*shrink)?)
            }
            DenoiserSpec::Dct { cutoff, shrink } => Denoiser::TransformShrink(
                TransformShrink::lowpass(shape.height, shape.width, *cutoff, *shrink)?,
            ),
            DenoiserSpec::Plugin { program, nu } => {
                Denoiser::Plugin(PluginDenoiser::new(program.clone(), *nu)?)
            }
        })
    }

    pub fn build_with_strength(&self, shape: Shape, nu: f64) -> Result<Denoiser> {
        if !(nu > 0.0) {
            return Err(Error::Config(format!("strength must be > 0, got {nu}")));
        }
        let spec = match self {
            DenoiserSpec::Gauss { size, shrink, .. } => DenoiserSpec::Gauss {
                size: *size,
                std: nu,
                shrink: *shrink,
            },
            DenoiserSpec::Identity { .. } => self.clone(),
            DenoiserSpec::Dct { cutoff, shrink } => DenoiserSpec::Dct {
                cutoff: cutoff / nu,
                shrink: *shrink,
            },
            DenoiserSpec::Plugin { program, .. } => DenoiserSpec::Plugin {
                program: program.clone(),
                nu,
            },
        };
        spec.build(shape)
    }
}

impl std::fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenoiserSpec::Gauss { size, std, shrink } => write!(f, "gauss:{size}:{std}:{shrink}"),
            DenoiserSpec::Identity { shrink } => write!(f, "identity:{shrink}"),
            DenoiserSpec::Dct { cutoff, shrink } => write!(f, "dct:{cutoff}:{shrink}"),
            DenoiserSpec::Plugin { program, nu } => write!(f, "plugin:{}:{nu}", program.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn rand_field(shape: Shape, seed: u64) -> ImageField {
        let mut r = RngStream::new(seed);
        ImageField::from_fn(shape, |_, _, _| r.standard_normal()).unwrap()
    }

    fn half() -> Denoiser {
        Denoiser::SymmetricConv(SymmetricConv::scaled_identity(0.5).unwrap())
    }

    #[test]
    fn zero_maps_to_zero() {
        let d = DenoiserSpec::parse("gauss:5:1.0")
            .unwrap()
            .build(Shape::gray(8, 8))
            .unwrap();
        let z = ImageField::zeros(Shape::gray(8, 8));
        assert_eq!(d.apply(&z).unwrap(), z);
        assert_eq!(red_potential(&d, &z).unwrap(), 0.0);
    }

    #[test]
    fn scaled_identity_halves() {
        let x = rand_field(Shape::gray(3, 3), 2);
        let y = half().apply(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn potential_and_gradient_by_hand() {
        let x = ImageField::new(Shape::gray(1, 2), vec![2.0, -2.0]).unwrap();
        // |x|^2 = 8: g = 1/2 * 8 * 0.5
        assert_eq!(red_potential(&half(), &x).unwrap(), 2.0);
        assert_eq!(red_gradient(&half(), &x).unwrap().data(), &[1.0, -1.0]);
        let x = ImageField::new(Shape::gray(1, 1), vec![2.0]).unwrap();
        assert_eq!(red_potential(&half(), &x).unwrap(), 1.0);
    }

    #[test]
    fn uniform_gains_match_scaled_identity() {
        let shape = Shape::new(6, 5, 2);
        let t = Denoiser::TransformShrink(TransformShrink::new(6, 5, vec![0.8; 30]).unwrap());
        let s = Denoiser::SymmetricConv(SymmetricConv::scaled_identity(0.2).unwrap());
        let x = rand_field(shape, 3);
        let a = t.apply(&x).unwrap();
        let b = s.apply(&x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn curvature_of_scaled_identity() {
        let c = half().curvature(Shape::gray(4, 4)).unwrap().unwrap();
        assert_eq!(c.m_g, 0.5);
        assert_eq!(c.big_m_g, 0.5);
    }

    #[test]
    fn gaussian_conv_curvature_window() {
        let d = DenoiserSpec::parse("gauss:5:1.0:0.05")
            .unwrap()
            .build(Shape::gray(8, 8))
            .unwrap();
        let c = d.curvature(Shape::gray(8, 8)).unwrap().unwrap();
        assert!((c.m_g - 0.05).abs() < 1e-12);
        assert!(c.big_m_g <= 2.0 && c.big_m_g > c.m_g);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            DenoiserSpec::parse("gauss:5:1.5").unwrap(),
            DenoiserSpec::Gauss {
                size: 5,
                std: 1.5,
                shrink: DEFAULT_SHRINK
            }
        );
        assert_eq!(
            DenoiserSpec::parse("plugin:/opt/d:n/drunet:0.1").unwrap(),
            DenoiserSpec::Plugin {
                program: "/opt/d:n/drunet".into(),
                nu: 0.1
            }
        );
        assert_eq!(
            DenoiserSpec::parse("plugin:./den").unwrap(),
            DenoiserSpec::Plugin {
                program: "./den".into(),
                nu: 0.0
            }
        );
        assert!(DenoiserSpec::parse("gauss:5").is_err());
        assert!(DenoiserSpec::parse("bm3d").is_err());
        assert!(DenoiserSpec::parse("identity:1.5")
            .unwrap()
            .build(Shape::gray(2, 2))
            .is_err());
        let s = DenoiserSpec::parse("dct:0.2:0.1").unwrap();
        assert_eq!(DenoiserSpec::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn schedule_is_log_uniform_then_frozen() {
        let s = NuSchedule::new(1.0, 0.01, 3).unwrap();
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(1) - 0.1).abs() < 1e-15);
        assert_eq!(s.value(2), 0.01);
        assert_eq!(s.value(500), 0.01);
    }

    #[test]
    fn annealed_rebuilds_by_strength() {
        let spec = DenoiserSpec::parse("gauss:5:1.0").unwrap();
        let a = AnnealedDenoiser::new(
            spec,
            Shape::gray(8, 8),
            NuSchedule::new(2.0, 0.5, 10).unwrap(),
        )
        .unwrap();
        match a.at(0).unwrap().as_ref() {
            Denoiser::SymmetricConv(c) => {
                assert_eq!(*c.kernel(), Kernel::gaussian(5, 2.0).unwrap())
            }
            _ => unreachable!(),
        }
        assert_eq!(a.at(9).unwrap().as_ref(), a.terminal().unwrap().as_ref());
    }
}
