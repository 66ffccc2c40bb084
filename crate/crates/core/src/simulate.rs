//! Synthetic scenes and sensor degradation: Gaussian blur with FWHM equal to
//! the ratio, decimation, spectral band synthesis, and white Gaussian noise at
//! a global SNR.
//!
//! Randomness comes from ChaCha20 (`rand_chacha` 0.9), one stream per purpose
//! selected with `set_stream`, so every output is a pure function of its seed.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::io::read_csv_grid;
use crate::spatial::{apply_degradation, DownsampleSpec, Kernel};

/// Name and version of the generator, echoed into run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, set_stream substreams)";

pub const STREAM_PHANTOM: u64 = 0x5048_414e; // "PHAN"
pub const STREAM_HSI_NOISE: u64 = 0x4853_4e5a; // "HSNZ"
pub const STREAM_MSI_NOISE: u64 = 0x4d53_4e5a; // "MSNZ"

pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Row-stochastic `(msi bands) x (sri bands)` band-synthesis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    msi_bands: usize,
    sri_bands: usize,
    weights: Vec<f64>,
}

impl SpectralResponse {
    /// Normalizes each row to unit sum. Rejects negative entries and zero rows.
    pub fn from_rows(msi_bands: usize, sri_bands: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != msi_bands * sri_bands || msi_bands == 0 || sri_bands == 0 {
            return Err(Error::DimensionMismatch(format!(
                "spectral response {msi_bands}x{sri_bands} with {} entries",
                weights.len()
            )));
        }
        for row in 0..msi_bands {
            let slice = &mut weights[row * sri_bands..(row + 1) * sri_bands];
            if let Some(col) = slice.iter().position(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::NegativeEntry { row, col });
            }
            let s: f64 = slice.iter().sum();
            if s == 0.0 {
                return Err(Error::ZeroRow(row));
            }
            slice.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Self {
            msi_bands,
            sri_bands,
            weights,
        })
    }

    /// `msi_bands` Gaussian bumps evenly spaced over the SRI band indices.
    pub fn synthetic(msi_bands: usize, sri_bands: usize) -> Result<Self> {
        if msi_bands == 0 || sri_bands == 0 {
            return Err(Error::InvalidConfig("band counts must be positive".into()));
        }
        let spacing = sri_bands as f64 / msi_bands as f64;
        let width = (spacing / 2.0).max(0.5);
        let mut w = Vec::with_capacity(msi_bands * sri_bands);
        for m in 0..msi_bands {
            let center = (m as f64 + 0.5) * spacing - 0.5;
            for l in 0..sri_bands {
                let t = (l as f64 - center) / width;
                w.push((-0.5 * t * t).exp());
            }
        }
        Self::from_rows(msi_bands, sri_bands, w)
    }

    pub fn msi_bands(&self) -> usize {
        self.msi_bands
    }

    pub fn sri_bands(&self) -> usize {
        self.sri_bands
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, msi_band: usize, sri_band: usize) -> f64 {
        self.weights[msi_band * self.sri_bands + sri_band]
    }

    /// Applies the response to every pixel vector of `x`.
    pub fn apply(&self, x: &Cube) -> Result<Cube> {
        if x.bands() != self.sri_bands {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} bands, response expects {}",
                x.bands(),
                self.sri_bands
            )));
        }
        let np = x.pixels();
        let mut out = Cube::zeros(x.height(), x.width(), self.msi_bands);
        for m in 0..self.msi_bands {
            let dst = out.band_mut(m);
            for l in 0..self.sri_bands {
                let wt = self.get(m, l);
                if wt == 0.0 {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(&x.data()[l * np..(l + 1) * np]) {
                    *d += wt * s;
                }
            }
        }
        Ok(out)
    }
}

/// Reads a response CSV with one row per MSI band and one column per SRI band.
pub fn load_srf_csv(path: impl AsRef<Path>) -> Result<SpectralResponse> {
    let m = read_csv_grid(path)?;
    SpectralResponse::from_rows(m.rows, m.cols, m.data)
}

/// Gaussian standard deviation whose FWHM equals `fwhm`.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// `(2d+1) x (2d+1)` Gaussian with FWHM `d`, centered `shift` pixels away from
/// the grid center, sampled at pixel centers and normalized to unit sum.
pub fn gaussian_kernel(ratio: usize, shift: (i64, i64)) -> Result<Kernel> {
    if ratio == 0 {
        return Err(Error::InvalidConfig("ratio must be >= 1".into()));
    }
    let size = 2 * ratio + 1;
    if shift.0.unsigned_abs() as usize > ratio || shift.1.unsigned_abs() as usize > ratio {
        return Err(Error::ShiftOutOfSupport(shift.0, shift.1, size));
    }
    let sigma = fwhm_to_sigma(ratio as f64);
    let c = ratio as f64;
    let (cr, cc) = (c + shift.0 as f64, c + shift.1 as f64);
    let mut w = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let dr = r as f64 - cr;
            let dc = col as f64 - cc;
            w.push((-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    Kernel::new(size, w)
}

/// Linear-mixture phantom: `materials` smooth positive signatures painted over
/// Voronoi-like blob regions, each pixel a convex combination dominated by its
/// region's material.
pub fn make_phantom(height: usize, width: usize, bands: usize, materials: usize, seed: u64) -> Result<Cube> {
    if height == 0 || width == 0 || bands == 0 || materials == 0 {
        return Err(Error::InvalidConfig("phantom dimensions must be positive".into()));
    }
    let mut rng = rng_for(seed, STREAM_PHANTOM);

    // Signatures: offset plus a few Gaussian bumps along the band axis.
    let mut signatures = vec![vec![0.0; bands]; materials];
    for sig in signatures.iter_mut() {
        let base = rng.random_range(0.2..0.6);
        let bumps = rng.random_range(1..=3);
        let mut params = Vec::new();
        for _ in 0..bumps {
            params.push((
                rng.random_range(0.0..bands as f64),
                rng.random_range(0.1..1.0) * (bands as f64 / 3.0).max(1.0),
                rng.random_range(0.2..0.8),
            ));
        }
        for (l, v) in sig.iter_mut().enumerate() {
            *v = base
                + params
                    .iter()
                    .map(|&(c, wd, a)| {
                        let t = (l as f64 - c) / wd;
                        a * (-0.5 * t * t).exp()
                    })
                    .sum::<f64>();
        }
    }

    // Regions: nearest seed under a randomly warped distance, giving blobby
    // boundaries; seeds cycle through materials so every material appears.
    let n_seeds = (3 * materials).max(materials);
    let seeds: Vec<(f64, f64, usize, f64)> = (0..n_seeds)
        .map(|s| {
            (
                rng.random_range(0.0..height as f64),
                rng.random_range(0.0..width as f64),
                s % materials,
                rng.random_range(0.7..1.3),
            )
        })
        .collect();
    let warp: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.05..0.25),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(1.5..4.0),
            )
        })
        .collect();

    let np = height * width;
    let mut abundance = vec![vec![0.0; materials]; np];
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64, c as f64);
            let mut wy = y;
            let mut wx = x;
            for &(freq, phase, amp) in &warp {
                wy += amp * (freq * x + phase).sin();
                wx += amp * (freq * y + phase).cos();
            }
            let mut best = (f64::INFINITY, 0);
            for &(sy, sx, m, scale) in &seeds {
                let d = ((wy - sy).powi(2) + (wx - sx).powi(2)).sqrt() * scale;
                if d < best.0 {
                    best = (d, m);
                }
            }
            let a = &mut abundance[r * width + c];
            if materials == 1 {
                a[0] = 1.0;
                continue;
            }
            let dominant = rng.random_range(0.85..1.0);
            let mut rest: Vec<f64> = (0..materials - 1).map(|_| rng.random::<f64>()).collect();
            let total: f64 = rest.iter().sum();
            rest.iter_mut().for_each(|v| *v *= (1.0 - dominant) / total.max(f64::MIN_POSITIVE));
            let mut it = rest.into_iter();
            for (m, slot) in a.iter_mut().enumerate() {
                *slot = if m == best.1 {
                    dominant
                } else {
                    it.next().unwrap_or(0.0)
                };
            }
        }
    }

    Ok(Cube::from_fn(height, width, bands, |r, c, l| {
        abundance[r * width + c]
            .iter()
            .zip(&signatures)
            .map(|(a, s)| a * s[l])
            .sum()
    }))
}

/// Spatial degradation and noise settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradeSpec {
    pub downsample: DownsampleSpec,
    pub kernel: Kernel,
    /// `None` means noiseless.
    pub hsi_snr_db: Option<f64>,
    pub msi_snr_db: Option<f64>,
    pub seed: u64,
}

/// Adds white Gaussian noise with variance `||x||^2 / (count 10^(snr/10))`.
pub fn add_noise(x: &Cube, snr_db: Option<f64>, rng: &mut ChaCha20Rng) -> Result<Cube> {
    let Some(snr) = snr_db else {
        return Ok(x.clone());
    };
    if !snr.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR {snr} is not finite")));
    }
    let count = x.data().len() as f64;
    let sigma = (x.norm_sq() / (count * 10f64.powf(snr / 10.0))).sqrt();
    let data = x
        .data()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect();
    Cube::new(x.height(), x.width(), x.bands(), data)
}

/// Simulates the `(HSI, MSI)` pair seen by the two sensors.
pub fn degrade(x: &Cube, response: &SpectralResponse, spec: &DegradeSpec) -> Result<(Cube, Cube)> {
    if !spec.kernel.is_feasible() {
        return Err(Error::InvalidConfig("degradation kernel must lie on the simplex".into()));
    }
    let blurred = apply_degradation(x, &spec.kernel, &spec.downsample)?;
    let synthesized = response.apply(x)?;
    let y = add_noise(&blurred, spec.hsi_snr_db, &mut rng_for(spec.seed, STREAM_HSI_NOISE))?;
    let z = add_noise(&synthesized, spec.msi_snr_db, &mut rng_for(spec.seed, STREAM_MSI_NOISE))?;
    Ok((y, z))
}

/// Simulation settings as stored in JSON configs and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub materials: usize,
    pub msi_bands: usize,
    pub ratio: usize,
    pub phase: (usize, usize),
    /// Kernel center displacement `(rows, cols)`; negative is up/left.
    pub shift: (i64, i64),
    /// `null` for a noiseless HSI.
    pub hsi_snr_db: Option<f64>,
    pub msi_snr_db: Option<f64>,
    pub seed: u64,
    /// Optional spectral response CSV; the synthetic response is used otherwise.
    pub srf_csv: Option<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            height: 48,
            width: 48,
            bands: 16,
            materials: 6,
            msi_bands: 4,
            ratio: 4,
            phase: (0, 0),
            shift: (0, 0),
            hsi_snr_db: Some(30.0),
            msi_snr_db: Some(40.0),
            seed: 1,
            srf_csv: None,
        }
    }
}

/// Everything produced by one simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Cube,
    pub hsi: Cube,
    pub msi: Cube,
    pub kernel: Kernel,
    pub response: SpectralResponse,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let spec = DownsampleSpec {
            ratio: self.ratio,
            phase: self.phase,
        };
        spec.check_divisible(self.height, self.width)?;
        if self.materials < 1 || self.bands < 1 || self.msi_bands < 1 {
            return Err(Error::InvalidConfig("band and material counts must be positive".into()));
        }
        for snr in [self.hsi_snr_db, self.msi_snr_db].into_iter().flatten() {
            if !snr.is_finite() {
                return Err(Error::InvalidConfig("SNR must be finite or null".into()));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Simulation> {
        self.validate()?;
        let response = match &self.srf_csv {
            Some(path) => load_srf_csv(path)?,
            None => SpectralResponse::synthetic(self.msi_bands, self.bands)?,
        };
        if response.sri_bands() != self.bands {
            return Err(Error::DimensionMismatch(format!(
                "response has {} SRI bands, config has {}",
                response.sri_bands(),
                self.bands
            )));
        }
        let truth = make_phantom(self.height, self.width, self.bands, self.materials, self.seed)?;
        let kernel = gaussian_kernel(self.ratio, self.shift)?;
        let spec = DegradeSpec {
            downsample: DownsampleSpec {
                ratio: self.ratio,
                phase: self.phase,
            },
            kernel: kernel.clone(),
            hsi_snr_db: self.hsi_snr_db,
            msi_snr_db: self.msi_snr_db,
            seed: self.seed,
        };
        let (hsi, msi) = degrade(&truth, &response, &spec)?;
        Ok(Simulation {
            truth,
            hsi,
            msi,
            kernel,
            response,
        })
    }
}
