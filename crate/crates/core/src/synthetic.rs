//! Seeded synthetic test scenes in `[0, 1]`.

use crate::error::Result;
use crate::image::{ImageField, Shape};
use crate::rng::RngStream;

/// Piecewise-smooth scene: a gradient background, a bright disk, a dark
/// rectangle and a few seeded Gaussian blobs. Channel `c` shifts the blob
/// amplitudes so color images are not gray.
pub fn phantom(shape: Shape, seed: u64) -> Result<ImageField> {
    let mut rng = RngStream::new(seed);
    let blobs: Vec<[f64; 4]> = (0..5)
        .map(|_| {
            [
                rng.uniform(),
                rng.uniform(),
                0.04 + 0.1 * rng.uniform(),
                0.5 * rng.uniform() - 0.25,
            ]
        })
        .collect();
    let (h, w) = (shape.height as f64, shape.width as f64);
    ImageField::from_fn(shape, |i, j, c| {
        let u = (i as f64 + 0.5) / h;
        let v = (j as f64 + 0.5) / w;
        let mut val = 0.25 + 0.3 * v;
        let (du, dv) = (u - 0.38, v - 0.62);
        if du * du + dv * dv < 0.045 {
            val += 0.35;
        }
        if (0.62..0.85).contains(&u) && (0.15..0.5).contains(&v) {
            val -= 0.15;
        }
        for (k, b) in blobs.iter().enumerate() {
            let r2 = (u - b[0]).powi(2) + (v - b[1]).powi(2);
            let amp = if (k + c) % 2 == 0 { b[3] } else { -0.5 * b[3] };
            val += amp * (-r2 / (2.0 * b[2] * b[2])).exp();
        }
        val.clamp(0.02, 0.98)
    })
}
