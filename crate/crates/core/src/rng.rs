//! Reproducible random streams.
//!
//! Uniforms come from ChaCha20 in counter mode, and standard Gaussians from
//! the Box–Muller transform evaluated with `libm`, so a given seed yields
//! the same variates on every platform.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Source of standard Gaussian vectors consumed by the samplers.
pub trait GaussianSource {
    /// Overwrites `out` with i.i.d. N(0, 1) variates.
    fn fill_standard_normal(&mut self, out: &mut [f64]);
}

/// Single-owner seeded stream; chains derive their own via
/// [`RngStream::for_chain`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

const TWO_PI: f64 = std::f64::consts::TAU;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream::for_chain(seed, 0)
    }

    /// Independent stream for chain `index` under master `seed`.
    pub fn for_chain(seed: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(index);
        RngStream {
            seed,
            stream: index,
            inner,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform integer in `0..bound` (rejection sampling, unbiased).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = TWO_PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Fisher–Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

impl GaussianSource for RngStream {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }
}

/// Gaussian source that always returns zeros; turns samplers into their
/// deterministic drift maps.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl GaussianSource for ZeroNoise {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl<G: GaussianSource + ?Sized> GaussianSource for &mut G {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        (**self).fill_standard_normal(out)
    }
}
