//! Fusion quality metrics against a reference cube: ERGAS, UIQI, SAM and SNR.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cube::Cube;
use crate::error::{Error, Result};

/// Default UIQI window side.
pub const UIQI_WINDOW: usize = 32;

fn check_same(x: &Cube, truth: &Cube) -> Result<()> {
    if !x.same_dims(truth) {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, reference is {:?}",
            x.dims(),
            truth.dims()
        )));
    }
    Ok(())
}

/// `100 d sqrt( (1/(N1 N2 N3)) sum_l ||X_l - T_l||^2 / mu_l^2 )`, with `mu_l`
/// the mean of reference band `l`.
pub fn ergas(x: &Cube, truth: &Cube, ratio: usize) -> Result<f64> {
    check_same(x, truth)?;
    let n = x.pixels() as f64;
    let mut acc = 0.0;
    for l in 0..x.bands() {
        let t = truth.band(l);
        let mean = t.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return Err(Error::ZeroBandMean(l));
        }
        let err: f64 = x.band(l).iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += err / (mean * mean);
    }
    Ok(100.0 * ratio as f64 * (acc / (n * x.bands() as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamResult {
    pub mean_degrees: f64,
    /// Pixels skipped because either vector was zero.
    pub skipped: usize,
}

/// Mean spectral angle in degrees over pixels.
pub fn sam(x: &Cube, truth: &Cube) -> Result<SamResult> {
    check_same(x, truth)?;
    let np = x.pixels();
    let nb = x.bands();
    let mut total = 0.0;
    let mut counted = 0usize;
    for n in 0..np {
        let (mut xx, mut yy) = (0.0, 0.0);
        for l in 0..nb {
            xx += x.band(l)[n].powi(2);
            yy += truth.band(l)[n].powi(2);
        }
        if xx == 0.0 || yy == 0.0 {
            continue;
        }
        // Half-angle form: acos loses precision for nearly parallel vectors.
        let (nx, ny) = (xx.sqrt(), yy.sqrt());
        let (mut diff, mut sum) = (0.0, 0.0);
        for l in 0..nb {
            let u = x.band(l)[n] / nx;
            let v = truth.band(l)[n] / ny;
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        total += 2.0 * diff.sqrt().atan2(sum.sqrt());
        counted += 1;
    }
    let mean = if counted == 0 {
        0.0
    } else {
        (total / counted as f64).to_degrees()
    };
    Ok(SamResult {
        mean_degrees: mean,
        skipped: np - counted,
    })
}

/// UIQI of one window given its first and second moments.
fn uiqi_window(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let den = (vx + vy) * (mx * mx + my * my);
    if den == 0.0 {
        // Both windows flat: identical content scores 1, otherwise the
        // luminance term alone decides.
        if vx == 0.0 && vy == 0.0 {
            if mx * mx + my * my == 0.0 {
                return 1.0;
            }
            return 2.0 * mx * my / (mx * mx + my * my);
        }
        return 0.0;
    }
    4.0 * cxy * mx * my / den
}

/// Mean UIQI of one band over all fully interior `window x window` windows
/// (stride 1). A single whole-image window is used when the image is smaller
/// than `window` in either direction.
pub fn uiqi_band(x: &[f64], truth: &[f64], height: usize, width: usize, window: usize) -> f64 {
    let (wh, ww) = if height < window || width < window {
        (height, width)
    } else {
        (window, window)
    };
    // Integral images of x, y, x^2, y^2, xy.
    let stride = width + 1;
    let mut sums = vec![[0.0f64; 5]; (height + 1) * stride];
    for r in 0..height {
        let mut row = [0.0f64; 5];
        for c in 0..width {
            let a = x[r * width + c];
            let b = truth[r * width + c];
            row[0] += a;
            row[1] += b;
            row[2] += a * a;
            row[3] += b * b;
            row[4] += a * b;
            let above = sums[r * stride + c + 1];
            let cell = &mut sums[(r + 1) * stride + c + 1];
            for k in 0..5 {
                cell[k] = above[k] + row[k];
            }
        }
    }
    let n = (wh * ww) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=height - wh {
        for c in 0..=width - ww {
            let a = sums[r * stride + c];
            let b = sums[r * stride + c + ww];
            let cc = sums[(r + wh) * stride + c];
            let d = sums[(r + wh) * stride + c + ww];
            let s: [f64; 5] = std::array::from_fn(|k| d[k] - b[k] - cc[k] + a[k]);
            let mx = s[0] / n;
            let my = s[1] / n;
            let vx = (s[2] / n - mx * mx).max(0.0);
            let vy = (s[3] / n - my * my).max(0.0);
            let cxy = s[4] / n - mx * my;
            total += uiqi_window(mx, my, vx, vy, cxy);
            count += 1;
        }
    }
    total / count as f64
}

/// Per-band UIQI values.
pub fn uiqi_per_band(x: &Cube, truth: &Cube, window: usize) -> Result<Vec<f64>> {
    check_same(x, truth)?;
    if window == 0 {
        return Err(Error::InvalidConfig("UIQI window must be positive".into()));
    }
    Ok((0..x.bands())
        .map(|l| uiqi_band(x.band(l), truth.band(l), x.height(), x.width(), window))
        .collect())
}

/// Band-averaged UIQI.
pub fn uiqi(x: &Cube, truth: &Cube, window: usize) -> Result<f64> {
    let per = uiqi_per_band(x, truth, window)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// `10 log10(||T||^2 / ||X - T||^2)`; `+inf` when the cubes are identical.
pub fn snr_db(x: &Cube, truth: &Cube) -> Result<f64> {
    check_same(x, truth)?;
    let err: f64 = x
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (truth.norm_sq() / err).log10())
}

fn ser_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
        Repr::Str(s) => Err(serde::de::Error::custom(format!("bad SNR value {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    pub band: usize,
    pub uiqi: f64,
    pub rmse: f64,
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ergas: f64,
    pub uiqi: f64,
    pub sam_degrees: f64,
    pub sam_skipped_pixels: usize,
    /// `"inf"` in JSON when the estimate equals the reference.
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub snr_db: f64,
    pub ratio: usize,
    pub uiqi_window: usize,
    pub per_band: Vec<BandMetrics>,
}

impl MetricReport {
    pub fn compute(x: &Cube, truth: &Cube, ratio: usize) -> Result<Self> {
        Self::compute_with_window(x, truth, ratio, UIQI_WINDOW)
    }

    pub fn compute_with_window(x: &Cube, truth: &Cube, ratio: usize, window: usize) -> Result<Self> {
        let sam = sam(x, truth)?;
        let per_uiqi = uiqi_per_band(x, truth, window)?;
        let np = x.pixels() as f64;
        let per_band = per_uiqi
            .iter()
            .enumerate()
            .map(|(l, &q)| {
                let err: f64 = x
                    .band(l)
                    .iter()
                    .zip(truth.band(l))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let sig: f64 = truth.band(l).iter().map(|v| v * v).sum();
                BandMetrics {
                    band: l,
                    uiqi: q,
                    rmse: (err / np).sqrt(),
                    snr_db: if err == 0.0 {
                        f64::INFINITY
                    } else {
                        10.0 * (sig / err).log10()
                    },
                }
            })
            .collect();
        Ok(Self {
            ergas: ergas(x, truth, ratio)?,
            uiqi: per_uiqi.iter().sum::<f64>() / per_uiqi.len() as f64,
            sam_degrees: sam.mean_degrees,
            sam_skipped_pixels: sam.skipped,
            snr_db: snr_db(x, truth)?,
            ratio,
            uiqi_window: window,
            per_band,
        })
    }

    pub const CSV_HEADER: &'static str = "ergas,uiqi,sam_degrees,snr_db";

    /// One summary line matching [`MetricReport::CSV_HEADER`].
    pub fn csv_line(&self) -> String {
        let snr = if self.snr_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:e}", self.snr_db)
        };
        format!(
            "{:e},{:e},{:e},{}",
            self.ergas, self.uiqi, self.sam_degrees, snr
        )
    }
}
