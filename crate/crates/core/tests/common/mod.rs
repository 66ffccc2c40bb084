#![allow(dead_code)]

use bglrf::{Cube, Image, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::new(h, w, random_vec(rng, h * w)).unwrap()
}

pub fn random_cube(rng: &mut ChaCha8Rng, h: usize, w: usize, b: usize) -> Cube {
    Cube::new(h, w, b, random_vec(rng, h * w * b)).unwrap()
}

pub fn random_kernel(rng: &mut ChaCha8Rng, size: usize) -> Kernel {
    Kernel::new(size, random_vec(rng, size * size)).unwrap()
}

pub fn random_simplex_kernel(rng: &mut ChaCha8Rng, size: usize) -> Kernel {
    let w: Vec<f64> = (0..size * size).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    Kernel::new(size, w.into_iter().map(|v| v / s).collect()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Direct-sum periodic convolution with the kernel center at the origin.
pub fn direct_convolution(x: &Image, k: &Kernel) -> Image {
    let (h, w) = (x.height as i64, x.width as i64);
    let p = k.size();
    let c = (p / 2) as i64;
    Image::from_fn(x.height, x.width, |r, col| {
        let mut s = 0.0;
        for a in 0..p {
            for b in 0..p {
                let rr = (r as i64 - (a as i64 - c)).rem_euclid(h) as usize;
                let cc = (col as i64 - (b as i64 - c)).rem_euclid(w) as usize;
                s += k.get(a, b) * x.get(rr, cc);
            }
        }
        s
    })
}

/// Direct decimation keeping `(d i + phase.0, d j + phase.1)`.
pub fn direct_decimate(x: &Image, d: usize, phase: (usize, usize)) -> Image {
    Image::from_fn(x.height / d, x.width / d, |i, j| x.get(d * i + phase.0, d * j + phase.1))
}

/// Dense `P C(K)` applied to every band of `x`, from the direct-sum oracles.
pub fn direct_degrade(x: &Cube, k: &Kernel, d: usize) -> Cube {
    let bands = (0..x.bands())
        .map(|l| direct_decimate(&direct_convolution(&x.band_image(l), k), d, (0, 0)))
        .collect();
    Cube::from_bands(bands).unwrap()
}

/// Isotropic TV with replicate-boundary forward differences, written out directly.
pub fn direct_tv(k: &Kernel) -> f64 {
    let p = k.size();
    let mut tv = 0.0;
    for r in 0..p {
        for c in 0..p {
            let dh = if c + 1 < p { k.get(r, c + 1) - k.get(r, c) } else { 0.0 };
            let dv = if r + 1 < p { k.get(r + 1, c) - k.get(r, c) } else { 0.0 };
            tv += (dh * dh + dv * dv).sqrt();
        }
    }
    tv
}
