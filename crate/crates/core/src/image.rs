//! Real-valued pixel grids and their on-disk formats.
//!
//! Pixels are stored row-major with interleaved channels: the sample at row
//! `i`, column `j`, channel `c` lives at `(i * width + j) * channels + c`.
//!
//! The lossless interchange format ("RFI1") is an ASCII header line
//! `RFI1 <height> <width> <channels>\n` followed by the payload as
//! little-endian IEEE-754 doubles in the same order.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Height, width and channel count of an [`ImageField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    pub fn gray(height: usize, width: usize) -> Self {
        Shape::new(height, width, 1)
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// A finite real image of shape `height x width x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageField {
    /// Wraps `data`, rejecting zero dimensions, length mismatch and
    /// non-finite samples.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.height == 0 || shape.width == 0 || shape.channels == 0 {
            return Err(Error::InvalidInput(format!("zero-sized image {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::mismatch(shape.len(), data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ImageField::new"));
        }
        Ok(ImageField { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        ImageField::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        assert!(!shape.is_empty(), "zero-sized image");
        assert!(value.is_finite());
        ImageField {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds an image from a per-pixel function `f(row, col, channel)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for i in 0..shape.height {
            for j in 0..shape.width {
                for c in 0..shape.channels {
                    data.push(f(i, j, c));
                }
            }
        }
        ImageField::new(shape, data)
    }

    /// Crate-internal constructor for buffers whose finiteness is checked
    /// by the caller (samplers check once per step).
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ImageField { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn height(&self) -> usize {
        self.shape.height
    }
    pub fn width(&self) -> usize {
        self.shape.width
    }
    pub fn channels(&self) -> usize {
        self.shape.channels
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.shape.index(row, col, ch)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ImageField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageField {
        ImageField::from_raw(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &ImageField, b: f64) -> ImageField {
        debug_assert_eq!(self.shape, other.shape);
        ImageField::from_raw(
            self.shape,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn sub(&self, other: &ImageField) -> ImageField {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> ImageField {
        self.map(|v| v * s)
    }

    pub fn max_abs_diff(&self, other: &ImageField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Extracts one channel as a contiguous single-channel plane.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        let c = self.shape.channels;
        self.data.iter().skip(ch).step_by(c).copied().collect()
    }

    /// Writes a single-channel plane back into channel `ch`.
    pub(crate) fn set_channel(&mut self, ch: usize, plane: &[f64]) {
        let c = self.shape.channels;
        for (dst, src) in self.data.iter_mut().skip(ch).step_by(c).zip(plane) {
            *dst = *src;
        }
    }

    /// Affinely rescales to `[0, 1]`; a constant image maps to zeros.
    pub fn normalized_unit(&self) -> ImageField {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        if hi - lo <= 0.0 {
            return ImageField::zeros(self.shape);
        }
        self.map(|v| (v - lo) / (hi - lo))
    }

    /// Extracts a `size x size` patch with top-left corner `(row, col)`.
    pub fn patch(&self, row: usize, col: usize, size: usize) -> Result<ImageField> {
        if row + size > self.height() || col + size > self.width() {
            return Err(Error::InvalidInput(format!(
                "patch {size}x{size} at ({row},{col}) exceeds {}",
                self.shape
            )));
        }
        let c = self.channels();
        let shape = Shape::new(size, size, c);
        let mut out = Vec::with_capacity(shape.len());
        for i in 0..size {
            let start = self.shape.index(row + i, col, 0);
            out.extend_from_slice(&self.data[start..start + size * c]);
        }
        Ok(ImageField::from_raw(shape, out))
    }

    // ----- RFI1 ---------------------------------------------------------

    pub fn write_rfi<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "RFI1 {} {} {}",
            self.height(),
            self.width(),
            self.channels()
        )?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads one RFI1 frame from a buffered reader, leaving the reader
    /// positioned right after the payload.
    pub fn read_rfi<R: BufRead>(r: &mut R) -> Result<ImageField> {
        let mut header = Vec::new();
        let n = r
            .read_until(b'\n', &mut header)
            .map_err(|e| Error::Format(format!("reading header: {e}")))?;
        if n == 0 {
            return Err(Error::Format("empty stream, expected RFI1 header".into()));
        }
        if header.last() != Some(&b'\n') {
            return Err(Error::Format("unterminated RFI1 header".into()));
        }
        let text = std::str::from_utf8(&header[..header.len() - 1])
            .map_err(|_| Error::Format("header is not ASCII".into()))?;
        let parts: Vec<&str> = text.split(' ').collect();
        if parts.len() != 4 || parts[0] != "RFI1" {
            return Err(Error::Format(format!("bad RFI1 header {text:?}")));
        }
        let dims: Vec<usize> = parts[1..]
            .iter()
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("bad RFI1 dimensions {text:?}")))?;
        let shape = Shape::new(dims[0], dims[1], dims[2]);
        if shape.is_empty() {
            return Err(Error::Format(format!("zero-sized RFI1 frame {shape}")));
        }
        let mut payload = vec![0u8; shape.len() * 8];
        r.read_exact(&mut payload)
            .map_err(|e| Error::Format(format!("truncated RFI1 payload: {e}")))?;
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        ImageField::new(shape, data)
    }

    pub fn save_rfi(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_rfi(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_rfi(path: impl AsRef<Path>) -> Result<ImageField> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ImageField::read_rfi(&mut std::io::BufReader::new(f))
    }

    // ----- PNG ----------------------------------------------------------

    /// Saves as 8-bit PNG (1 channel gray, 3 channels RGB), clamping to
    /// `[lo, hi]` before quantization.
    pub fn save_png(&self, path: impl AsRef<Path>, lo: f64, hi: f64) -> Result<()> {
        let path = path.as_ref();
        let q = |v: f64| -> u8 {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (t * 255.0).round() as u8
        };
        let bytes: Vec<u8> = self.data.iter().map(|&v| q(v)).collect();
        let (w, h) = (self.width() as u32, self.height() as u32);
        let res = match self.channels() {
            1 => image::GrayImage::from_raw(w, h, bytes).map(|im| im.save(path)),
            3 => image::RgbImage::from_raw(w, h, bytes).map(|im| im.save(path)),
            c => {
                return Err(Error::InvalidInput(format!(
                    "PNG export supports 1 or 3 channels, got {c}"
                )))
            }
        };
        match res {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(Error::Format(format!("png encode {}: {e}", path.display()))),
            None => Err(Error::Format("png buffer size mismatch".into())),
        }
    }

    /// Loads an 8-bit PNG as gray (1 channel) or RGB (3 channels), scaled
    /// to `[0, 1]`.
    pub fn load_png(path: impl AsRef<Path>) -> Result<ImageField> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Format(format!("png decode {}: {e}", path.display())))?;
        let (data, channels, w, h) = match img.color().channel_count() {
            1 | 2 => {
                let g = img.to_luma8();
                let (w, h) = g.dimensions();
                (g.into_raw(), 1, w, h)
            }
            _ => {
                let g = img.to_rgb8();
                let (w, h) = g.dimensions();
                (g.into_raw(), 3, w, h)
            }
        };
        ImageField::new(
            Shape::new(h as usize, w as usize, channels),
            data.into_iter().map(|b| b as f64 / 255.0).collect(),
        )
    }

    /// Loads RFI1 or PNG depending on the file's first bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<ImageField> {
        let path = path.as_ref();
        let mut head = [0u8; 4];
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let got = f.read(&mut head).map_err(|e| Error::io(path, e))?;
        if got == 4 && &head == b"RFI1" {
            ImageField::load_rfi(path)
        } else {
            ImageField::load_png(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(ImageField::new(Shape::gray(2, 2), vec![0.0; 3]).is_err());
        assert!(ImageField::new(Shape::gray(1, 2), vec![0.0, f64::NAN]).is_err());
        assert!(ImageField::new(Shape::gray(0, 2), vec![]).is_err());
    }

    #[test]
    fn rfi_roundtrip_is_bit_exact() {
        let im = ImageField::from_fn(Shape::new(3, 4, 2), |i, j, c| {
            (i as f64 * 0.1 - j as f64).exp() * if c == 0 { 1.0 } else { -1e-300 }
        })
        .unwrap();
        let mut buf = Vec::new();
        im.write_rfi(&mut buf).unwrap();
        assert!(buf.starts_with(b"RFI1 3 4 2\n"));
        assert_eq!(buf.len(), 11 + 24 * 8);
        let back = ImageField::read_rfi(&mut &buf[..]).unwrap();
        assert_eq!(back, im);
    }

    #[test]
    fn rfi_rejects_truncation_and_garbage() {
        let im = ImageField::zeros(Shape::gray(2, 2));
        let mut buf = Vec::new();
        im.write_rfi(&mut buf).unwrap();
        assert!(ImageField::read_rfi(&mut &buf[..buf.len() - 1]).is_err());
        assert!(ImageField::read_rfi(&mut &b"RFI2 1 1 1\n"[..]).is_err());
        assert!(ImageField::read_rfi(&mut &b""[..]).is_err());
    }

    #[test]
    fn png_roundtrip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let im = ImageField::from_fn(Shape::new(4, 5, 3), |i, j, c| {
            ((i * 5 + j) * 3 + c) as f64 / 60.0
        })
        .unwrap();
        im.save_png(&p, 0.0, 1.0).unwrap();
        let back = ImageField::load(&p).unwrap();
        assert_eq!(back.shape(), im.shape());
        assert!(back.max_abs_diff(&im) <= 0.5 / 255.0 + 1e-12);
    }

    #[test]
    fn patch_extraction() {
        let im = ImageField::from_fn(Shape::gray(4, 4), |i, j, _| (i * 4 + j) as f64).unwrap();
        let p = im.patch(1, 2, 2).unwrap();
        assert_eq!(p.data(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(im.patch(3, 3, 2).is_err());
    }

    #[test]
    fn normalization() {
        let im = ImageField::new(Shape::gray(1, 3), vec![-1.0, 0.0, 3.0]).unwrap();
        assert_eq!(im.normalized_unit().data(), &[0.0, 0.25, 1.0]);
        let z = ImageField::zeros(Shape::gray(2, 2));
        assert_eq!(z.normalized_unit(), z);
    }
}
