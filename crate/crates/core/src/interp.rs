//! Bicubic (Keys, a = -0.5) upsampling on the decimation grid.

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::spatial::DownsampleSpec;

const KEYS_A: f64 = -0.5;

fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((KEYS_A * t - 5.0 * KEYS_A) * t + 8.0 * KEYS_A) * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Taps `(index, weight)` for output coordinate `out` along one axis.
fn taps(out: usize, ratio: usize, phase: usize, len: usize) -> [(usize, f64); 4] {
    let pos = (out as f64 - phase as f64) / ratio as f64;
    let base = pos.floor();
    let frac = pos - base;
    let base = base as i64;
    let clamp = |i: i64| i.clamp(0, len as i64 - 1) as usize;
    [
        (clamp(base - 1), keys(frac + 1.0)),
        (clamp(base), keys(frac)),
        (clamp(base + 1), keys(1.0 - frac)),
        (clamp(base + 2), keys(2.0 - frac)),
    ]
}

/// Upscales every band by `spec.ratio`. Output pixel `(d*i + phase.0,
/// d*j + phase.1)` lands exactly on input sample `(i, j)`; borders replicate.
pub fn bicubic_upsample(y: &Cube, spec: &DownsampleSpec) -> Result<Cube> {
    spec.validate()?;
    let d = spec.ratio;
    let (lh, lw, nb) = y.dims();
    if lh == 0 || lw == 0 {
        return Err(Error::DimensionMismatch("empty cube".into()));
    }
    if d == 1 {
        return Ok(y.clone());
    }
    let (h, w) = (lh * d, lw * d);
    let row_taps: Vec<_> = (0..h).map(|r| taps(r, d, spec.phase.0, lh)).collect();
    let col_taps: Vec<_> = (0..w).map(|c| taps(c, d, spec.phase.1, lw)).collect();
    let mut out = Cube::zeros(h, w, nb);
    for l in 0..nb {
        let src = y.band(l);
        // Separable: interpolate along columns first, then rows.
        let mut tmp = vec![0.0; lh * w];
        for i in 0..lh {
            for (c, ct) in col_taps.iter().enumerate() {
                tmp[i * w + c] = ct.iter().map(|&(j, wt)| wt * src[i * lw + j]).sum();
            }
        }
        let dst = out.band_mut(l);
        for (r, rt) in row_taps.iter().enumerate() {
            for c in 0..w {
                dst[r * w + c] = rt.iter().map(|&(i, wt)| wt * tmp[i * w + c]).sum();
            }
        }
    }
    Ok(out)
}
