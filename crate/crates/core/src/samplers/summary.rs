use crate::error::{Error, Result};
use crate::image::{ImageField, Shape};

/// Streaming per-pixel mean and sum of squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub(crate) fn new(len: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub(crate) fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d * inv;
            *s += d * (v - *m);
        }
    }

    fn finish(&self, shape: Shape) -> (ImageField, ImageField) {
        let n = self.count.max(1) as f64;
        (
            ImageField::from_raw(shape, self.mean.clone()),
            ImageField::from_raw(shape, self.m2.iter().map(|s| (s / n).max(0.0)).collect()),
        )
    }
}

/// Whether the step size was checked against the contraction bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepCheck {
    Verified { bound: f64 },
    Unverified,
}

/// Post-burn-in statistics of one chain, or of several merged chains.
///
/// Variances are population variances (divided by the sample count).
#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub count: usize,
    pub mean_x: ImageField,
    pub var_x: ImageField,
    pub mean_z: Option<ImageField>,
    pub var_z: Option<ImageField>,
    pub samples: Vec<ImageField>,
    /// Flat indices of the traced pixels.
    pub probes: Vec<usize>,
    /// `traces[k]` holds the post-burn-in values of pixel `probes[k]`;
    /// merged summaries concatenate chains in merge order.
    pub traces: Vec<Vec<f64>>,
    pub iterations: usize,
    pub chains: usize,
    /// Iterations in which the box projection drift was active.
    pub projection_steps: usize,
    pub step_check: StepCheck,
    pub wall_seconds: f64,
}

impl ChainSummary {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_moments(
        shape: Shape,
        x: &Moments,
        z: Option<&Moments>,
        samples: Vec<ImageField>,
        probes: Vec<usize>,
        traces: Vec<Vec<f64>>,
        iterations: usize,
        projection_steps: usize,
        step_check: StepCheck,
        wall_seconds: f64,
    ) -> Self {
        let (mean_x, var_x) = x.finish(shape);
        let (mean_z, var_z) = match z.map(|m| m.finish(shape)) {
            Some((m, v)) => (Some(m), Some(v)),
            None => (None, None),
        };
        ChainSummary {
            count: x.count,
            mean_x,
            var_x,
            mean_z,
            var_z,
            samples,
            probes,
            traces,
            iterations,
            chains: 1,
            projection_steps,
            step_check,
            wall_seconds,
        }
    }

    /// Fraction of iterations with an active projection drift.
    pub fn projection_fraction(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.projection_steps as f64 / self.iterations as f64
        }
    }

    /// Pixelwise standard deviation.
    pub fn std_x(&self) -> ImageField {
        self.var_x.map(f64::sqrt)
    }

    /// True when every statistic (not the timing) matches bit for bit.
    pub fn same_statistics(&self, other: &ChainSummary) -> bool {
        self.count == other.count
            && self.mean_x == other.mean_x
            && self.var_x == other.var_x
            && self.mean_z == other.mean_z
            && self.var_z == other.var_z
            && self.samples == other.samples
            && self.probes == other.probes
            && self.traces == other.traces
            && self.iterations == other.iterations
            && self.projection_steps == other.projection_steps
    }

    /// Pools two summaries (parallel-variance update). Associative and
    /// symmetric in exact arithmetic.
    pub fn merge(&self, other: &ChainSummary) -> Result<ChainSummary> {
        if self.mean_x.shape() != other.mean_x.shape() {
            return Err(Error::mismatch(self.mean_x.shape(), other.mean_x.shape()));
        }
        if self.probes != other.probes {
            return Err(Error::InvalidInput(
                "cannot merge summaries with different probes".into(),
            ));
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let pool = |ma: &ImageField, va: &ImageField, mb: &ImageField, vb: &ImageField| {
            let n = na + nb;
            let mut mean = Vec::with_capacity(ma.len());
            let mut var = Vec::with_capacity(ma.len());
            for k in 0..ma.len() {
                let (a, b) = (ma.data()[k], mb.data()[k]);
                let d = b - a;
                let m2 = va.data()[k] * na + vb.data()[k] * nb + d * d * na * nb / n;
                mean.push((na * a + nb * b) / n);
                var.push((m2 / n).max(0.0));
            }
            (
                ImageField::from_raw(ma.shape(), mean),
                ImageField::from_raw(ma.shape(), var),
            )
        };
        let (mean_x, var_x) = pool(&self.mean_x, &self.var_x, &other.mean_x, &other.var_x);
        let (mean_z, var_z) = match (&self.mean_z, &self.var_z, &other.mean_z, &other.var_z) {
            (Some(ma), Some(va), Some(mb), Some(vb)) => {
                let (m, v) = pool(ma, va, mb, vb);
                (Some(m), Some(v))
            }
            _ => (None, None),
        };
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        let traces = self
            .traces
            .iter()
            .zip(&other.traces)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        let step_check = match (self.step_check, other.step_check) {
            (StepCheck::Verified { bound }, StepCheck::Verified { .. }) => {
                StepCheck::Verified { bound }
            }
            _ => StepCheck::Unverified,
        };
        Ok(ChainSummary {
            count: self.count + other.count,
            mean_x,
            var_x,
            mean_z,
            var_z,
            samples,
            probes: self.probes.clone(),
            traces,
            iterations: self.iterations + other.iterations,
            chains: self.chains + other.chains,
            projection_steps: self.projection_steps + other.projection_steps,
            step_check,
            wall_seconds: self.wall_seconds.max(other.wall_seconds),
        })
    }
}
