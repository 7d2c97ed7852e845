//! Sampling of regularization-by-denoising posteriors for linear-Gaussian
//! imaging inverse problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod image;
pub mod kernel;
pub mod operator;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod samplers;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{ImageField, Shape};
