//! Kernel update: least squares + isotropic TV + simplex constraint + inertia,
//! solved by ADMM with an inner conjugate-gradient step.
//!
//! Splitting variables are the gradient field `G = D(K)` and a simplex copy
//! `Kbar`; both consensus constraints share one penalty `mu`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cg::{cg_solve, CgConfig, DenseOperator, LinearOperator};
use crate::cube::{dot, Cube, Image};
use crate::error::{Error, Result};
use crate::spatial::{decimate, embed_adjoint, embed_kernel, zero_fill, DownsampleSpec, Fft2, Kernel};

/// Horizontal and vertical forward differences on the kernel grid, one row
/// `[dh, dv]` per kernel entry (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradient {
    pub size: usize,
    pub rows: Vec<[f64; 2]>,
}

impl KernelGradient {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            rows: vec![[0.0; 2]; size * size],
        }
    }

    pub fn dot(&self, other: &KernelGradient) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Sum of row Euclidean norms (the `l_{2,1}` norm).
    pub fn l21(&self) -> f64 {
        self.rows.iter().map(|r| r[0].hypot(r[1])).sum()
    }
}

fn diff_unchecked(k: &[f64], p: usize) -> KernelGradient {
    let mut g = KernelGradient::zeros(p);
    for a in 0..p {
        for b in 0..p {
            let v = k[a * p + b];
            let dh = if b + 1 < p { k[a * p + b + 1] - v } else { 0.0 };
            let dv = if a + 1 < p { k[(a + 1) * p + b] - v } else { 0.0 };
            g.rows[a * p + b] = [dh, dv];
        }
    }
    g
}

fn diff_adjoint_unchecked(g: &KernelGradient) -> Vec<f64> {
    let p = g.size;
    let mut out = vec![0.0; p * p];
    for a in 0..p {
        for b in 0..p {
            let mut v = 0.0;
            if b + 1 < p {
                v -= g.rows[a * p + b][0];
            }
            if b >= 1 {
                v += g.rows[a * p + b - 1][0];
            }
            if a + 1 < p {
                v -= g.rows[a * p + b][1];
            }
            if a >= 1 {
                v += g.rows[(a - 1) * p + b][1];
            }
            out[a * p + b] = v;
        }
    }
    out
}

/// `D(K)`: forward differences with the last column/row difference set to zero.
pub fn diff_forward(k: &Kernel) -> Result<KernelGradient> {
    if k.size() < 2 {
        return Err(Error::InvalidKernelSize(k.size()));
    }
    Ok(diff_unchecked(k.weights(), k.size()))
}

/// `D*(G)`, the exact adjoint of [`diff_forward`] (a negative divergence).
pub fn diff_adjoint(g: &KernelGradient) -> Result<Kernel> {
    if g.size < 2 || g.rows.len() != g.size * g.size {
        return Err(Error::InvalidKernelSize(g.size));
    }
    Kernel::new(g.size, diff_adjoint_unchecked(g))
}

/// Isotropic total variation of the kernel; zero for a 1x1 kernel.
pub fn total_variation(k: &Kernel) -> f64 {
    diff_unchecked(k.weights(), k.size()).l21()
}

/// Row-wise shrinkage `max(1 - t/||row||, 0) * row`.
pub fn group_soft_threshold(g: &KernelGradient, t: f64) -> KernelGradient {
    let rows = g
        .rows
        .iter()
        .map(|&[x, y]| {
            let n = x.hypot(y);
            if n == 0.0 {
                return [0.0, 0.0];
            }
            let s = (1.0 - t / n).max(0.0);
            [s * x, s * y]
        })
        .collect();
    KernelGradient { size: g.size, rows }
}

/// Euclidean projection onto the probability simplex by sorting.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn project_kernel(k: &Kernel) -> Kernel {
    Kernel::new(k.size(), project_simplex(k.weights())).expect("projection preserves shape")
}

/// The known-`X` data term `sum_l ||P C(X_l) J(K) - Y_l||^2` as a function of `K`.
#[derive(Debug, Clone)]
pub struct KernelDataTerm {
    height: usize,
    width: usize,
    size: usize,
    spec: DownsampleSpec,
    x: Cube,
    x_spectra: Vec<Vec<Complex64>>,
    y: Cube,
    rhs: Vec<f64>,
}

impl KernelDataTerm {
    pub fn new(x: &Cube, y: &Cube, spec: DownsampleSpec, size: usize) -> Result<Self> {
        let (h, w, nb) = x.dims();
        spec.check_divisible(h, w)?;
        if y.dims() != (h / spec.ratio, w / spec.ratio, nb) {
            return Err(Error::DimensionMismatch(format!(
                "HSI is {:?}, expected {:?}",
                y.dims(),
                (h / spec.ratio, w / spec.ratio, nb)
            )));
        }
        if size == 0 || size > h || size > w {
            return Err(Error::KernelTooLarge {
                size,
                height: h,
                width: w,
            });
        }
        let fft = Fft2::get(h, w);
        let x_spectra: Vec<Vec<Complex64>> = x
            .band_planes()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|p| fft.forward(p))
            .collect();
        let mut term = Self {
            height: h,
            width: w,
            size,
            spec,
            x: x.clone(),
            x_spectra,
            y: y.clone(),
            rhs: Vec::new(),
        };
        term.rhs = term.adjoint_data();
        Ok(term)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `sum_l J* C(X_l)* P* Y_l`.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    fn adjoint_data(&self) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let fft = Fft2::get(h, w);
        let parts: Vec<Vec<f64>> = (0..self.y.bands())
            .into_par_iter()
            .map(|l| {
                let filled = zero_fill(self.y.band(l), h, w, &self.spec);
                let mut f = fft.forward(&filled);
                f.iter_mut()
                    .zip(&self.x_spectra[l])
                    .for_each(|(a, s)| *a *= s.conj());
                let img = Image {
                    height: h,
                    width: w,
                    data: fft.inverse_real(f),
                };
                embed_adjoint(&img, self.size)
                    .expect("size checked at construction")
                    .into_weights()
            })
            .collect();
        sum_ordered(parts, self.size * self.size)
    }

    fn blurred_bands(&self, k: &[f64]) -> Vec<Vec<f64>> {
        let (h, w) = (self.height, self.width);
        let fft = Fft2::get(h, w);
        let kernel = Kernel::new(self.size, k.to_vec()).expect("shape fixed");
        let khat = fft.forward(&embed_kernel(&kernel, h, w).expect("size checked").data);
        self.x_spectra
            .par_iter()
            .map(|xs| {
                let prod: Vec<Complex64> = xs.iter().zip(&khat).map(|(a, b)| a * b).collect();
                fft.inverse_real(prod)
            })
            .collect()
    }

    /// `sum_l J* C(X_l)* P* P C(X_l) J(k)`, evaluated with FFTs.
    pub fn apply_normal(&self, k: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let fft = Fft2::get(h, w);
        let blurred = self.blurred_bands(k);
        let parts: Vec<Vec<f64>> = blurred
            .into_par_iter()
            .zip(self.x_spectra.par_iter())
            .map(|(b, xs)| {
                let masked = zero_fill(&decimate(&b, h, w, &self.spec), h, w, &self.spec);
                let mut f = fft.forward(&masked);
                f.iter_mut().zip(xs).for_each(|(a, s)| *a *= s.conj());
                let img = Image {
                    height: h,
                    width: w,
                    data: fft.inverse_real(f),
                };
                embed_adjoint(&img, self.size)
                    .expect("size checked at construction")
                    .into_weights()
            })
            .collect();
        sum_ordered(parts, self.size * self.size)
    }

    /// `sum_l ||P C(X_l) J(k) - Y_l||^2`.
    pub fn value(&self, k: &[f64]) -> f64 {
        let (h, w) = (self.height, self.width);
        self.blurred_bands(k)
            .iter()
            .enumerate()
            .map(|(l, b)| {
                decimate(b, h, w, &self.spec)
                    .iter()
                    .zip(self.y.band(l))
                    .map(|(a, y)| (a - y) * (a - y))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Dense Gram matrix of the data term, built from shifted samples of `X`
    /// rather than FFTs: entry `(s, t)` is `sum_l sum_n X_l(n - s) X_l(n - t)`
    /// over retained sample positions `n`.
    pub fn gram(&self) -> DenseOperator {
        let (h, w) = (self.height, self.width);
        let p = self.size;
        let c = p / 2;
        let np = p * p;
        let d = self.spec.ratio;
        let (ph, pw) = self.spec.phase;
        let samples: Vec<(usize, usize)> = (ph..h)
            .step_by(d)
            .flat_map(|r| (pw..w).step_by(d).map(move |col| (r, col)))
            .collect();
        let parts: Vec<Vec<f64>> = (0..self.x.bands())
            .into_par_iter()
            .map(|l| {
                let band = self.x.band(l);
                // Row n of the design matrix holds X_l(n - s) for every offset s.
                let mut design = vec![0.0; samples.len() * np];
                for (i, &(r, col)) in samples.iter().enumerate() {
                    for a in 0..p {
                        let rr = (r + h + c - a) % h;
                        for b in 0..p {
                            let cc = (col + w + c - b) % w;
                            design[i * np + a * p + b] = band[rr * w + cc];
                        }
                    }
                }
                let mut g = vec![0.0; np * np];
                for row in design.chunks_exact(np) {
                    for s in 0..np {
                        let v = row[s];
                        if v == 0.0 {
                            continue;
                        }
                        for t in s..np {
                            g[s * np + t] += v * row[t];
                        }
                    }
                }
                for s in 0..np {
                    for t in 0..s {
                        g[s * np + t] = g[t * np + s];
                    }
                }
                g
            })
            .collect();
        DenseOperator {
            n: np,
            data: sum_ordered(parts, np * np),
        }
    }
}

fn sum_ordered(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for part in parts {
        acc.iter_mut().zip(&part).for_each(|(a, v)| *a += v);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScale {
    /// `mu` is used as given.
    Absolute,
    /// `mu` multiplies the mean diagonal of the data Gram matrix.
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub mu: f64,
    pub mu_scale: PenaltyScale,
    pub max_sweeps: usize,
    /// Early stop once both primal residuals and the dual residual fall below
    /// `tol * p`.
    pub tol: f64,
    pub cg: CgConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            mu_scale: PenaltyScale::Absolute,
            max_sweeps: 100,
            tol: 1e-6,
            cg: CgConfig::new(1e-8, 200),
        }
    }
}

/// Inputs of one kernel subproblem besides the data.
#[derive(Debug, Clone, Copy)]
pub struct KernelStepParams {
    pub beta: f64,
    /// Inertia weight; `None` selects it from the data-term value at entry.
    pub tau: Option<f64>,
    pub admm: AdmmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmReport {
    pub sweeps: usize,
    pub cg_iterations: usize,
    pub tau: f64,
    pub mu: f64,
    /// `(||G - D K||, ||Kbar - K||)` after each sweep.
    pub primal_residuals: Vec<(f64, f64)>,
    /// `mu ||D*(G - G_old) + (Kbar - Kbar_old)||` after each sweep.
    pub dual_residuals: Vec<f64>,
    pub objective_at_entry: Option<f64>,
    pub objective_at_exit: f64,
    /// True when the ADMM output scored worse than `K_prev` and was discarded.
    pub kept_previous: bool,
}

/// Automatic inertia weight: `1e-3 * data / (||K_prev||^2 + 1)`, clamped.
pub fn auto_tau(data_value: f64, prev_norm_sq: f64) -> f64 {
    (1e-3 * data_value / (prev_norm_sq + 1.0)).clamp(1e-8, 1.0)
}

/// The kernel-step system `Gram + mu D*D + (tau + mu) I`.
struct KernelStepOperator<'a> {
    data: DataOperator<'a>,
    p: usize,
    mu: f64,
    shift: f64,
}

enum DataOperator<'a> {
    Dense(DenseOperator),
    Fft(&'a KernelDataTerm),
}

impl LinearOperator for KernelStepOperator<'_> {
    fn dim(&self) -> usize {
        self.p * self.p
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.data {
            DataOperator::Dense(g) => g.apply(x, y),
            DataOperator::Fft(t) => y.copy_from_slice(&t.apply_normal(x)),
        }
        let dtd = diff_adjoint_unchecked(&diff_unchecked(x, self.p));
        for i in 0..y.len() {
            y[i] += self.mu * dtd[i] + self.shift * x[i];
        }
    }
}

/// Largest kernel size for which the data Gram matrix is materialized.
const DENSE_GRAM_MAX_SIZE: usize = 31;

/// Objective of the kernel subproblem at a feasible `k`:
/// `data(k) + beta TV(k) + tau ||k - k_prev||^2`. Infeasible kernels score `+inf`.
pub fn kernel_objective(
    term: &KernelDataTerm,
    k: &Kernel,
    beta: f64,
    tau: f64,
    k_prev: Option<&Kernel>,
) -> f64 {
    if !k.is_feasible_within(1e-10) {
        return f64::INFINITY;
    }
    let mut v = term.value(k.weights()) + beta * total_variation(k);
    if let Some(prev) = k_prev {
        v += tau
            * k.weights()
                .iter()
                .zip(prev.weights())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
    }
    v
}

/// Solves the kernel subproblem for fixed `X` and returns the simplex copy.
pub fn solve_kernel_subproblem(
    x: &Cube,
    y: &Cube,
    spec: DownsampleSpec,
    size: usize,
    k_prev: Option<&Kernel>,
    params: &KernelStepParams,
) -> Result<(Kernel, AdmmReport)> {
    let term = KernelDataTerm::new(x, y, spec, size)?;
    solve_with_term(&term, k_prev, params)
}

/// As [`solve_kernel_subproblem`], reusing a prepared data term.
pub fn solve_with_term(
    term: &KernelDataTerm,
    k_prev: Option<&Kernel>,
    params: &KernelStepParams,
) -> Result<(Kernel, AdmmReport)> {
    let p = term.size();
    let np = p * p;
    let cfg = &params.admm;
    if !(params.beta >= 0.0 && params.beta.is_finite()) {
        return Err(Error::InvalidConfig("beta must be finite and >= 0".into()));
    }
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) {
        return Err(Error::InvalidConfig("ADMM penalty mu must be > 0".into()));
    }
    if let Some(prev) = k_prev {
        if prev.size() != p {
            return Err(Error::DimensionMismatch(format!(
                "previous kernel has size {}, expected {p}",
                prev.size()
            )));
        }
    }

    let tau = match (k_prev, params.tau) {
        (None, _) => 0.0,
        (Some(_), Some(t)) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig("tau must be > 0".into()));
            }
            t
        }
        (Some(prev), None) => auto_tau(term.value(prev.weights()), prev.norm_sq()),
    };

    let dense = (p <= DENSE_GRAM_MAX_SIZE).then(|| term.gram());
    let mu = match cfg.mu_scale {
        PenaltyScale::Absolute => cfg.mu,
        PenaltyScale::Data => {
            let diag_mean = match &dense {
                Some(g) => (0..np).map(|i| g.data[i * np + i]).sum::<f64>() / np as f64,
                None => {
                    let mut e = vec![0.0; np];
                    e[(p / 2) * p + p / 2] = 1.0;
                    term.apply_normal(&e)[(p / 2) * p + p / 2]
                }
            };
            cfg.mu * diag_mean.max(f64::MIN_POSITIVE)
        }
    };
    let op = KernelStepOperator {
        data: match dense {
            Some(g) => DataOperator::Dense(g),
            None => DataOperator::Fft(term),
        },
        p,
        mu,
        shift: tau + mu,
    };

    let start = match k_prev {
        Some(prev) => prev.clone(),
        None => Kernel::uniform(p),
    };
    let mut k = start.weights().to_vec();
    let mut g = diff_unchecked(&k, p);
    let mut kbar = project_simplex(&k);
    let mut lam1 = KernelGradient::zeros(p);
    let mut lam2 = vec![0.0; np];
    let threshold = params.beta / (2.0 * mu);
    let mut residuals = Vec::new();
    let mut dual_residuals = Vec::new();
    let mut cg_iterations = 0;
    let mut sweeps = 0;

    while sweeps < cfg.max_sweeps {
        // K-step.
        let mut g_plus = g.clone();
        g_plus
            .rows
            .iter_mut()
            .zip(&lam1.rows)
            .for_each(|(a, b)| {
                a[0] += b[0];
                a[1] += b[1];
            });
        let dt = diff_adjoint_unchecked(&g_plus);
        let mut rhs = term.rhs().to_vec();
        for i in 0..np {
            rhs[i] += mu * dt[i] + mu * (kbar[i] + lam2[i]);
            if let Some(prev) = k_prev {
                rhs[i] += tau * prev.weights()[i];
            }
        }
        let (k_new, rep) = cg_solve(&op, &rhs, &k, &cfg.cg)?;
        cg_iterations += rep.iterations;
        k = k_new;

        // G-step and simplex step.
        let dk = diff_unchecked(&k, p);
        let mut shifted = dk.clone();
        shifted
            .rows
            .iter_mut()
            .zip(&lam1.rows)
            .for_each(|(a, b)| {
                a[0] -= b[0];
                a[1] -= b[1];
            });
        let g_old = std::mem::replace(&mut g, group_soft_threshold(&shifted, threshold));
        let k_minus: Vec<f64> = k.iter().zip(&lam2).map(|(a, b)| a - b).collect();
        let kbar_old = std::mem::replace(&mut kbar, project_simplex(&k_minus));

        // Dual residual mu (D*(G - G_old) + (Kbar - Kbar_old)).
        let mut dg = g.clone();
        dg.rows.iter_mut().zip(&g_old.rows).for_each(|(a, b)| {
            a[0] -= b[0];
            a[1] -= b[1];
        });
        let dual: f64 = diff_adjoint_unchecked(&dg)
            .iter()
            .zip(kbar.iter().zip(&kbar_old))
            .map(|(d, (a, b))| (mu * (d + a - b)).powi(2))
            .sum::<f64>()
            .sqrt();

        // Multipliers.
        let mut r1 = 0.0;
        for ((l, gi), di) in lam1.rows.iter_mut().zip(&g.rows).zip(&dk.rows) {
            let e = [gi[0] - di[0], gi[1] - di[1]];
            l[0] += e[0];
            l[1] += e[1];
            r1 += e[0] * e[0] + e[1] * e[1];
        }
        let mut r2 = 0.0;
        for i in 0..np {
            let e = kbar[i] - k[i];
            lam2[i] += e;
            r2 += e * e;
        }
        let (r1, r2) = (r1.sqrt(), r2.sqrt());
        if !(r1.is_finite() && r2.is_finite()) {
            return Err(Error::Numerical("non-finite ADMM residual".into()));
        }
        residuals.push((r1, r2));
        dual_residuals.push(dual);
        sweeps += 1;
        let bound = cfg.tol * p as f64;
        if r1 < bound && r2 < bound && dual < bound {
            break;
        }
    }

    let candidate = Kernel::new(p, kbar)?;
    let obj_new = kernel_objective(term, &candidate, params.beta, tau, k_prev);
    let obj_prev = k_prev
        .filter(|prev| prev.is_feasible_within(1e-10))
        .map(|prev| kernel_objective(term, prev, params.beta, tau, k_prev));
    let (kernel, objective_at_exit, kept_previous) = match (obj_prev, k_prev) {
        (Some(before), Some(prev)) if obj_new > before => (prev.clone(), before, true),
        _ => (candidate, obj_new, false),
    };
    Ok((
        kernel,
        AdmmReport {
            sweeps,
            cg_iterations,
            tau,
            mu,
            primal_residuals: residuals,
            dual_residuals,
            objective_at_entry: obj_prev,
            objective_at_exit,
            kept_previous,
        },
    ))
}

/// Inner product on kernels, exposed for adjoint checks.
pub fn kernel_dot(a: &Kernel, b: &Kernel) -> f64 {
    dot(a.weights(), b.weights())
}
