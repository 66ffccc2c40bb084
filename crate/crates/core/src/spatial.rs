//! Spatial degradation operators: circular blur `C(K)`, kernel embedding `J`,
//! decimation `P`, and their adjoints.
//!
//! All blurs use periodic boundaries and are evaluated with 2-D FFTs. Plans
//! are cached per image shape.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Image};
use crate::error::{Error, Result};

/// A square `size x size` blur kernel, row-major. The kernel center is at
/// `(size / 2, size / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

/// Tolerance used when testing simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-12;

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidKernelSize(size));
        }
        if weights.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteSample("kernel weights"));
        }
        Ok(Self { size, weights })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            weights: vec![0.0; size * size],
        }
    }

    /// Unit mass at the center.
    pub fn delta(size: usize) -> Self {
        let mut k = Self::zeros(size);
        let c = size / 2;
        k.set(c, c, 1.0);
        k
    }

    pub fn uniform(size: usize) -> Self {
        let n = (size * size) as f64;
        Self {
            size,
            weights: vec![1.0 / n; size * size],
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn center(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * self.size + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Nonnegative with unit mass, within `tol`.
    pub fn is_feasible_within(&self, tol: f64) -> bool {
        self.weights.iter().all(|&w| w >= -tol) && (self.sum() - 1.0).abs() <= tol
    }

    pub fn is_feasible(&self) -> bool {
        self.is_feasible_within(SIMPLEX_TOL)
    }

    /// Center of mass as a `(row, col)` offset from the kernel center.
    pub fn centroid(&self) -> (f64, f64) {
        let c = self.center() as f64;
        let (mut sr, mut sc, mut m) = (0.0, 0.0, 0.0);
        for r in 0..self.size {
            for col in 0..self.size {
                let w = self.get(r, col);
                sr += w * r as f64;
                sc += w * col as f64;
                m += w;
            }
        }
        (sr / m - c, sc / m - c)
    }

    /// Re-centers the kernel inside a larger (or equal) odd support.
    pub fn padded_to(&self, size: usize) -> Result<Kernel> {
        if size < self.size || !(size - self.size).is_multiple_of(2) {
            return Err(Error::InvalidKernelSize(size));
        }
        let off = (size - self.size) / 2;
        let mut out = Kernel::zeros(size);
        for r in 0..self.size {
            for c in 0..self.size {
                out.set(r + off, c + off, self.get(r, c));
            }
        }
        Ok(out)
    }
}

/// Decimation by an integer ratio at a fixed sampling phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownsampleSpec {
    pub ratio: usize,
    /// `(row, col)` offset of the retained sample within each `ratio x ratio` block.
    #[serde(default)]
    pub phase: (usize, usize),
}

impl DownsampleSpec {
    pub fn new(ratio: usize) -> Self {
        Self {
            ratio,
            phase: (0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio == 0 {
            return Err(Error::InvalidConfig("downsampling ratio must be >= 1".into()));
        }
        if self.phase.0 >= self.ratio || self.phase.1 >= self.ratio {
            return Err(Error::InvalidConfig(format!(
                "phase {:?} outside [0, {})",
                self.phase, self.ratio
            )));
        }
        Ok(())
    }

    pub fn check_divisible(&self, height: usize, width: usize) -> Result<()> {
        self.validate()?;
        if !height.is_multiple_of(self.ratio) || !width.is_multiple_of(self.ratio) {
            return Err(Error::NotDivisible {
                height,
                width,
                ratio: self.ratio,
            });
        }
        Ok(())
    }
}

impl Default for DownsampleSpec {
    fn default() -> Self {
        Self::new(1)
    }
}

/// Cached 2-D complex FFT for one image shape.
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.height, self.width)
    }
}

impl Fft2 {
    fn build(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    /// Shared plan for a `height x width` grid.
    pub fn get(height: usize, width: usize) -> Arc<Fft2> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((height, width))
            .or_insert_with(|| Arc::new(Fft2::build(height, width)))
            .clone()
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..w {
            for r in 0..h {
                column[r] = buf[r * w + c];
            }
            col.process(&mut column);
            for r in 0..h {
                buf[r * w + c] = column[r];
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(real.len(), self.height * self.width);
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, true);
        let scale = 1.0 / (self.height * self.width) as f64;
        spectrum.into_iter().map(|z| z.re * scale).collect()
    }
}

fn check_fits(size: usize, height: usize, width: usize) -> Result<()> {
    if size > height || size > width {
        return Err(Error::KernelTooLarge {
            size,
            height,
            width,
        });
    }
    Ok(())
}

/// Zero-pads `kernel` to `height x width` and circularly shifts it so the
/// kernel center lands at `(0, 0)`.
pub fn embed_kernel(kernel: &Kernel, height: usize, width: usize) -> Result<Image> {
    check_fits(kernel.size(), height, width)?;
    let p = kernel.size();
    let c = kernel.center();
    let mut img = Image::zeros(height, width);
    for a in 0..p {
        let r = (a + height - c) % height;
        for b in 0..p {
            let col = (b + width - c) % width;
            img.set(r, col, kernel.get(a, b));
        }
    }
    Ok(img)
}

/// Adjoint of [`embed_kernel`]: reads back the `p x p` window it writes to.
pub fn embed_adjoint(image: &Image, size: usize) -> Result<Kernel> {
    if size == 0 {
        return Err(Error::InvalidKernelSize(size));
    }
    check_fits(size, image.height, image.width)?;
    let c = size / 2;
    let (h, w) = (image.height, image.width);
    let mut k = Kernel::zeros(size);
    for a in 0..size {
        let r = (a + h - c) % h;
        for b in 0..size {
            k.set(a, b, image.get(r, (b + w - c) % w));
        }
    }
    Ok(k)
}

/// Spectrum of the embedded kernel, i.e. the eigenvalues of the BCCB matrix `C(K)`.
pub fn kernel_spectrum(kernel: &Kernel, height: usize, width: usize) -> Result<Vec<Complex64>> {
    let embedded = embed_kernel(kernel, height, width)?;
    Ok(Fft2::get(height, width).forward(&embedded.data))
}

/// Circular convolution with a precomputed spectrum. `conjugate` applies the
/// adjoint (circular correlation).
pub fn apply_spectrum(
    plane: &[f64],
    spectrum: &[Complex64],
    height: usize,
    width: usize,
    conjugate: bool,
) -> Vec<f64> {
    let fft = Fft2::get(height, width);
    let mut f = fft.forward(plane);
    if conjugate {
        f.iter_mut().zip(spectrum).for_each(|(a, s)| *a *= s.conj());
    } else {
        f.iter_mut().zip(spectrum).for_each(|(a, s)| *a *= s);
    }
    fft.inverse_real(f)
}

/// `C(K) x`: periodic-boundary 2-D convolution via FFT.
pub fn convolve_circular(image: &Image, kernel: &Kernel) -> Result<Image> {
    let spec = kernel_spectrum(kernel, image.height, image.width)?;
    Image::new(
        image.height,
        image.width,
        apply_spectrum(&image.data, &spec, image.height, image.width, false),
    )
}

/// `C(K)* x`: periodic-boundary 2-D correlation (adjoint of convolution).
pub fn correlate_circular(image: &Image, kernel: &Kernel) -> Result<Image> {
    let spec = kernel_spectrum(kernel, image.height, image.width)?;
    Image::new(
        image.height,
        image.width,
        apply_spectrum(&image.data, &spec, image.height, image.width, true),
    )
}

pub(crate) fn decimate(plane: &[f64], height: usize, width: usize, spec: &DownsampleSpec) -> Vec<f64> {
    let d = spec.ratio;
    let (ph, pw) = spec.phase;
    let (oh, ow) = (height / d, width / d);
    let mut out = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        let row = (d * i + ph) * width;
        for j in 0..ow {
            out.push(plane[row + d * j + pw]);
        }
    }
    out
}

pub(crate) fn zero_fill(plane: &[f64], height: usize, width: usize, spec: &DownsampleSpec) -> Vec<f64> {
    let d = spec.ratio;
    let (ph, pw) = spec.phase;
    let (lh, lw) = (height / d, width / d);
    let mut out = vec![0.0; height * width];
    for i in 0..lh {
        for j in 0..lw {
            out[(d * i + ph) * width + d * j + pw] = plane[i * lw + j];
        }
    }
    out
}

/// `P x`: keeps sample `(d*i + phase.0, d*j + phase.1)`.
pub fn downsample(image: &Image, spec: &DownsampleSpec) -> Result<Image> {
    spec.check_divisible(image.height, image.width)?;
    Image::new(
        image.height / spec.ratio,
        image.width / spec.ratio,
        decimate(&image.data, image.height, image.width, spec),
    )
}

/// `P* y`: zero-filling upsampler onto a `height x width` grid.
pub fn upsample_zero(image: &Image, spec: &DownsampleSpec, height: usize, width: usize) -> Result<Image> {
    spec.check_divisible(height, width)?;
    if image.height * spec.ratio != height || image.width * spec.ratio != width {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} image cannot be upsampled by {} to {}x{}",
            image.height, image.width, spec.ratio, height, width
        )));
    }
    Image::new(height, width, zero_fill(&image.data, height, width, spec))
}

/// The composite `A = P C(K)` applied band-wise to cubes on a fixed grid.
#[derive(Debug, Clone)]
pub struct Degradation {
    height: usize,
    width: usize,
    spec: DownsampleSpec,
    spectrum: Vec<Complex64>,
}

impl Degradation {
    pub fn new(kernel: &Kernel, spec: DownsampleSpec, height: usize, width: usize) -> Result<Self> {
        spec.check_divisible(height, width)?;
        Ok(Self {
            height,
            width,
            spec,
            spectrum: kernel_spectrum(kernel, height, width)?,
        })
    }

    pub fn high_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn low_dims(&self) -> (usize, usize) {
        (self.height / self.spec.ratio, self.width / self.spec.ratio)
    }

    pub fn spec(&self) -> &DownsampleSpec {
        &self.spec
    }

    fn check_high(&self, x: &Cube) -> Result<()> {
        if (x.height(), x.width()) != (self.height, self.width) {
            return Err(Error::DimensionMismatch(format!(
                "cube is {}x{}, operator expects {}x{}",
                x.height(),
                x.width(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    /// `P C(K) x` for one band plane.
    pub fn forward_plane(&self, plane: &[f64]) -> Vec<f64> {
        let blurred = apply_spectrum(plane, &self.spectrum, self.height, self.width, false);
        decimate(&blurred, self.height, self.width, &self.spec)
    }

    /// `C(K)* P* y` for one low-resolution band plane.
    pub fn adjoint_plane(&self, plane: &[f64]) -> Vec<f64> {
        let filled = zero_fill(plane, self.height, self.width, &self.spec);
        apply_spectrum(&filled, &self.spectrum, self.height, self.width, true)
    }

    /// `C(K)* P* P C(K) x` for one band plane.
    pub fn normal_plane(&self, plane: &[f64]) -> Vec<f64> {
        let fft = Fft2::get(self.height, self.width);
        let mut f = fft.forward(plane);
        f.iter_mut().zip(&self.spectrum).for_each(|(a, s)| *a *= s);
        let blurred = fft.inverse_real(f);
        let mut masked = vec![0.0; blurred.len()];
        let d = self.spec.ratio;
        let (ph, pw) = self.spec.phase;
        for r in (ph..self.height).step_by(d) {
            for c in (pw..self.width).step_by(d) {
                masked[r * self.width + c] = blurred[r * self.width + c];
            }
        }
        let mut g = fft.forward(&masked);
        g.iter_mut().zip(&self.spectrum).for_each(|(a, s)| *a *= s.conj());
        fft.inverse_real(g)
    }

    pub fn forward(&self, x: &Cube) -> Result<Cube> {
        self.check_high(x)?;
        let (lh, lw) = self.low_dims();
        let planes: Vec<Vec<f64>> = x
            .band_planes()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|p| self.forward_plane(p))
            .collect();
        Cube::new(lh, lw, x.bands(), planes.concat())
    }

    pub fn adjoint(&self, y: &Cube) -> Result<Cube> {
        let (lh, lw) = self.low_dims();
        if (y.height(), y.width()) != (lh, lw) {
            return Err(Error::DimensionMismatch(format!(
                "cube is {}x{}, operator expects {}x{}",
                y.height(),
                y.width(),
                lh,
                lw
            )));
        }
        let planes: Vec<Vec<f64>> = y
            .band_planes()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|p| self.adjoint_plane(p))
            .collect();
        Cube::new(self.height, self.width, y.bands(), planes.concat())
    }
}

/// `P C(K) X`, band by band.
pub fn apply_degradation(x: &Cube, kernel: &Kernel, spec: &DownsampleSpec) -> Result<Cube> {
    Degradation::new(kernel, *spec, x.height(), x.width())?.forward(x)
}

/// `C(K)* P* Y` onto a `height x width` grid.
pub fn apply_degradation_adjoint(
    y: &Cube,
    kernel: &Kernel,
    spec: &DownsampleSpec,
    height: usize,
    width: usize,
) -> Result<Cube> {
    Degradation::new(kernel, *spec, height, width)?.adjoint(y)
}
