//! Centered 2D convolution kernels with odd side lengths.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "kernel sides must be odd, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::mismatch(rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Kernel::new"));
        }
        Ok(Kernel { rows, cols, data })
    }

    pub fn identity() -> Self {
        Kernel {
            rows: 1,
            cols: 1,
            data: vec![1.0],
        }
    }

    /// Uniform averaging kernel of side `size`.
    pub fn uniform(size: usize) -> Result<Self> {
        let n = size * size;
        Kernel::new(size, size, vec![1.0 / n as f64; n])
    }

    /// Sampled isotropic Gaussian of side `size`, normalized to sum 1.
    pub fn gaussian(size: usize, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gaussian std must be > 0, got {std}"
            )));
        }
        let c = (size / 2) as f64;
        let mut data = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let (di, dj) = (i as f64 - c, j as f64 - c);
                data.push((-(di * di + dj * dj) / (2.0 * std * std)).exp());
            }
        }
        let s: f64 = data.iter().sum();
        data.iter_mut().for_each(|v| *v /= s);
        Kernel::new(size, size, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Kernel at offset `(di, dj)` from the center.
    pub fn at(&self, di: isize, dj: isize) -> f64 {
        let (ci, cj) = ((self.rows / 2) as isize, (self.cols / 2) as isize);
        let (i, j) = (di + ci, dj + cj);
        if i < 0 || j < 0 || i >= self.rows as isize || j >= self.cols as isize {
            0.0
        } else {
            self.data[i as usize * self.cols + j as usize]
        }
    }

    /// The spatially reversed kernel `k(-a, -b)`.
    pub fn reversed(&self) -> Kernel {
        let mut data = self.data.clone();
        data.reverse();
        Kernel {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// True when `k(a, b) == k(-a, -b)` up to `tol`, i.e. the circulant
    /// matrix is symmetric.
    pub fn is_point_symmetric(&self, tol: f64) -> bool {
        self.data
            .iter()
            .zip(self.data.iter().rev())
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Offsets (row, col) relative to the center, with their weights.
    pub fn taps(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (ci, cj) = ((self.rows / 2) as isize, (self.cols / 2) as isize);
        self.data.iter().enumerate().map(move |(k, &v)| {
            let (i, j) = ((k / self.cols) as isize, (k % self.cols) as isize);
            (i - ci, j - cj, v)
        })
    }

    /// Places the kernel on an `h x w` torus with its center at the origin.
    /// Taps that wrap onto the same site are summed.
    pub fn embed_periodic(&self, h: usize, w: usize) -> Vec<f64> {
        let mut plane = vec![0.0; h * w];
        for (di, dj, v) in self.taps() {
            let i = di.rem_euclid(h as isize) as usize;
            let j = dj.rem_euclid(w as isize) as usize;
            plane[i * w + j] += v;
        }
        plane
    }

    /// DFT of the periodic embedding: the eigenvalues of the circulant
    /// convolution matrix on an `h x w` grid.
    pub fn transfer_function(&self, fft: &Fft2) -> Vec<Complex64> {
        let (h, w) = fft.dims();
        fft.forward_real(&self.embed_periodic(h, w))
    }
}
