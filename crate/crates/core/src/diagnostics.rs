//! Image-quality metrics and mixing diagnostics.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::ImageField;
use crate::rng::RngStream;

/// Peak signal-to-noise ratio; identical images have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    /// Value in dB, `+inf` for identical images.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.6}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

fn same_shape(a: &ImageField, b: &ImageField) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch(a.shape(), b.shape()));
    }
    Ok(())
}

pub fn mse(reference: &ImageField, test: &ImageField) -> Result<f64> {
    same_shape(reference, test)?;
    let s: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / reference.len() as f64)
}

/// `10 log10(peak^2 / MSE)`.
pub fn psnr(reference: &ImageField, test: &ImageField, peak: f64) -> Result<Psnr> {
    if !(peak > 0.0) {
        return Err(Error::InvalidInput(format!("peak must be > 0, got {peak}")));
    }
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Finite(10.0 * (peak * peak / m).log10()))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable weighted sums over every fully contained window.
fn window_filter(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..k).map(|t| taps[t] * plane[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| taps[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Local SSIM from window moments, dynamic range 1.
pub fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Per-window SSIM map of one channel, windows fully inside the image.
pub fn ssim_map(reference: &ImageField, test: &ImageField, channel: usize) -> Result<Vec<f64>> {
    same_shape(reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    if channel >= reference.channels() {
        return Err(Error::InvalidInput(format!("no channel {channel}")));
    }
    let taps = ssim_taps();
    let x = reference.channel(channel);
    let y = test.channel(channel);
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = window_filter(&x, h, w, &taps);
    let my = window_filter(&y, h, w, &taps);
    let mxx = window_filter(&prod(&x, &x), h, w, &taps);
    let myy = window_filter(&prod(&y, &y), h, w, &taps);
    let mxy = window_filter(&prod(&x, &y), h, w, &taps);
    Ok((0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            ssim_from_moments(a, b, mxx[i] - a * a, myy[i] - b * b, mxy[i] - a * b)
        })
        .collect())
}

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range 1), averaged over channels.
pub fn ssim(reference: &ImageField, test: &ImageField) -> Result<f64> {
    let mut total = 0.0;
    for c in 0..reference.channels() {
        let map = ssim_map(reference, test, c)?;
        total += map.iter().sum::<f64>() / map.len() as f64;
    }
    Ok(total / reference.channels() as f64)
}

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n;
    if !(c0 > 0.0) {
        return Err(Error::DegenerateSeries("series is constant".into()));
    }
    Ok((c, c0))
}

/// Biased autocorrelation `r_k = c_k / c_0` for `k = 0..=max_lag`, with
/// `c_k = (1/n) sum_t (x_t - m)(x_{t+k} - m)` computed by zero-padded FFT.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::InvalidInput(format!(
            "series length {n} must exceed max_lag {max_lag}"
        )));
    }
    let (c, c0) = centered(series)?;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut()
        .for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * n as f64 * c0);
    let mut out: Vec<f64> = buf[..=max_lag].iter().map(|v| v.re * scale).collect();
    out[0] = 1.0;
    Ok(out)
}

pub const IAT_MIN_LEN: usize = 1000;

/// Integrated autocorrelation time with the window chosen by the
/// initial positive sequence rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IatEstimate {
    pub value: f64,
    /// Number of lags summed.
    pub window: usize,
    /// False when the window reaches a fiftieth of the series length or
    /// the estimate is below 1.
    pub reliable: bool,
}

/// `1 + 2 sum_k r_k`, summing consecutive pairs `r_{2m} + r_{2m+1}` until
/// the first nonpositive pair.
pub fn iat_estimate(series: &[f64]) -> Result<IatEstimate> {
    let n = series.len();
    if n < IAT_MIN_LEN {
        return Err(Error::DegenerateSeries(format!(
            "IAT needs at least {IAT_MIN_LEN} samples, got {n}"
        )));
    }
    let r = acf(series, n - 1)?;
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = r[2 * m] + r[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        m += 1;
    }
    let value = 2.0 * sum - 1.0;
    let window = 2 * m;
    Ok(IatEstimate {
        value,
        window,
        reliable: value >= 1.0 && window * 50 < n,
    })
}

pub fn iat(series: &[f64]) -> Result<f64> {
    iat_estimate(series).map(|e| e.value)
}

/// Monte-Carlo standard error of the trace mean, `sqrt(var * IAT / n)`
/// with the IAT floored at 1.
pub fn mc_standard_error(trace: &[f64]) -> Result<f64> {
    let tau = iat(trace)?.max(1.0);
    Ok((population_variance(trace) * tau / trace.len() as f64).sqrt())
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Index of the trace with the median sample variance (lower median for
/// an even count; ties broken by index).
pub fn median_variance_probe<T: AsRef<[f64]>>(traces: &[T]) -> Result<usize> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("no traces".into()));
    }
    let mut vars = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        let t = t.as_ref();
        if t.is_empty() {
            return Err(Error::InvalidInput(format!("trace {i} is empty")));
        }
        let v = population_variance(t);
        if !v.is_finite() {
            return Err(Error::NonFinite("trace"));
        }
        vars.push((v, i));
    }
    vars.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(vars[(vars.len() - 1) / 2].1)
}

/// Largest number of pixels traced in full before falling back to a
/// seeded subset.
pub const FULL_PROBE_LIMIT: usize = 1024;
pub const PROBE_SUBSET: usize = 256;

/// Every pixel when at most `FULL_PROBE_LIMIT`, else a seeded subset of
/// `PROBE_SUBSET` distinct indices in increasing order.
pub fn default_probe_set(n: usize, seed: u64) -> Vec<usize> {
    if n <= FULL_PROBE_LIMIT {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::for_chain(seed, u64::MAX);
    rng.shuffle(&mut idx);
    idx.truncate(PROBE_SUBSET);
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr_db: Psnr,
    pub ssim: f64,
    pub iat: Option<IatEstimate>,
    pub acf: Vec<f64>,
}

impl MetricReport {
    /// Scores `test` against `reference` (peak 1) and, given a trace,
    /// its mixing diagnostics up to `max_lag`.
    pub fn compute(
        reference: &ImageField,
        test: &ImageField,
        trace: Option<&[f64]>,
        max_lag: usize,
    ) -> Result<Self> {
        let psnr_db = psnr(reference, test, 1.0)?;
        let ssim = ssim(reference, test)?;
        let (iat, acf) = match trace {
            Some(t) => (Some(iat_estimate(t)?), acf(t, max_lag.min(t.len() - 1))?),
            None => (None, Vec::new()),
        };
        Ok(MetricReport {
            psnr_db,
            ssim,
            iat,
            acf,
        })
    }
}
