//! Image cubes and their matricized form.
//!
//! A [`Cube`] stores `height x width x bands` samples band-major: each band is
//! a contiguous row-major image plane. The matricized view used throughout the
//! fusion model has one row per pixel (row-major over `(row, col)`) and one
//! column per band, so column `l` of the matrix is exactly band plane `l`.

use crate::error::{Error, Result};

/// A single real image plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} needs {} samples, got {}",
                height,
                width,
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn dot(&self, other: &Image) -> f64 {
        dot(&self.data, &other.data)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// A `height x width x bands` cube of real samples, band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl Cube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * bands {
            return Err(Error::DimensionMismatch(format!(
                "cube {}x{}x{} needs {} samples, got {}",
                height,
                width,
                bands,
                height * width * bands,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample("cube data"));
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Self {
        Self {
            height,
            width,
            bands,
            data: vec![0.0; height * width * bands],
        }
    }

    /// Builds a cube from `f(row, col, band)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * bands);
        for l in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, l));
                }
            }
        }
        Self {
            height,
            width,
            bands,
            data,
        }
    }

    pub fn from_bands(bands: Vec<Image>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::DimensionMismatch("no bands".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(h * w * bands.len());
        for img in &bands {
            if img.height != h || img.width != w {
                return Err(Error::DimensionMismatch(format!(
                    "band {}x{} does not match {}x{}",
                    img.height, img.width, h, w
                )));
            }
            data.extend_from_slice(&img.data);
        }
        Ok(Self {
            height: h,
            width: w,
            bands: bands.len(),
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    /// Number of pixels, `height * width`.
    #[inline]
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, band: usize, value: f64) {
        self.data[(band * self.height + row) * self.width + col] = value;
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[band * n..(band + 1) * n]
    }

    pub fn band_image(&self, band: usize) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.band(band).to_vec(),
        }
    }

    pub fn band_planes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.pixels())
    }

    /// Pixel vector at flat pixel index `n` (row-major over `(row, col)`).
    pub fn pixel(&self, n: usize) -> Vec<f64> {
        let np = self.pixels();
        (0..self.bands).map(|l| self.data[l * np + n]).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn dot(&self, other: &Cube) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn same_dims(&self, other: &Cube) -> bool {
        self.dims() == other.dims()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Unfolds into a `(height*width) x bands` matrix.
    pub fn matricize(&self) -> Matrix {
        let n = self.pixels();
        let mut m = Matrix::zeros(n, self.bands);
        for (l, plane) in self.band_planes().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                m.data[i * self.bands + l] = v;
            }
        }
        m
    }

    /// Inverse of [`Cube::matricize`].
    pub fn from_matrix(m: &Matrix, height: usize, width: usize) -> Result<Self> {
        if m.rows != height * width {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, expected {}",
                m.rows,
                height * width
            )));
        }
        let mut cube = Cube::zeros(height, width, m.cols);
        for i in 0..m.rows {
            for l in 0..m.cols {
                cube.data[l * m.rows + i] = m.data[i * m.cols + l];
            }
        }
        Ok(cube)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
