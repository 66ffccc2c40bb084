//! The fusion driver: blind alternating minimization over `(K, X)`, the
//! non-blind solve with a fixed kernel, and the no-Laplacian ablation.
//!
//! Each outer iteration first updates the kernel with `X` fixed (ADMM), then
//! the SRI with `K` fixed (CG on the normal equations with an inertia shift).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{auto_tau, solve_with_term, total_variation, AdmmConfig, AdmmReport, KernelDataTerm, KernelStepParams};
use crate::cg::{cg_solve, CgConfig, CgReport, LinearOperator};
use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::interp::bicubic_upsample;
use crate::laplacian::{build_matting_laplacian, quadratic_form, LaplacianConfig, SparseSymMatrix};
use crate::spatial::{Degradation, DownsampleSpec, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    Blind,
    Nonblind,
    NoGlr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelInit {
    /// The first kernel update runs without an inertia term.
    None,
    /// Seed the previous kernel with a centered delta.
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Graph Laplacian weight.
    pub alpha: f64,
    /// Kernel TV weight.
    pub beta: f64,
    /// Kernel inertia; `null` picks it automatically each iteration.
    pub tau_k: Option<f64>,
    /// SRI inertia; `null` picks it automatically each iteration.
    pub tau_x: Option<f64>,
    /// Kernel support bound `p` (odd).
    pub kernel_size: usize,
    pub ratio: usize,
    pub phase: (usize, usize),
    pub outer_iters: usize,
    /// Stop when the relative objective change drops below this.
    pub outer_tol: f64,
    pub init_kernel: KernelInit,
    pub admm: AdmmConfig,
    pub cg: CgConfig,
    pub laplacian: LaplacianConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::Blind,
            alpha: 10.0,
            beta: 10.0,
            tau_k: None,
            tau_x: None,
            kernel_size: 13,
            ratio: 4,
            phase: (0, 0),
            outer_iters: 30,
            outer_tol: 1e-5,
            init_kernel: KernelInit::None,
            admm: AdmmConfig::default(),
            cg: CgConfig::new(1e-8, 500),
            laplacian: LaplacianConfig::default(),
        }
    }
}

impl FusionConfig {
    pub fn downsample(&self) -> DownsampleSpec {
        DownsampleSpec {
            ratio: self.ratio,
            phase: self.phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.downsample().validate()?;
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        for (name, v) in [("tau_k", self.tau_k), ("tau_x", self.tau_x)] {
            if let Some(t) = v {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{name} must be > 0")));
                }
            }
        }
        if self.outer_iters == 0 {
            return Err(Error::InvalidConfig("outer_iters must be >= 1".into()));
        }
        if !(self.admm.mu > 0.0) {
            return Err(Error::InvalidConfig("admm.mu must be > 0".into()));
        }
        if !(self.cg.tol > 0.0) {
            return Err(Error::InvalidConfig("cg.tol must be > 0".into()));
        }
        self.laplacian.validate()
    }

    /// Weight actually applied to the Laplacian in this mode.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            FusionMode::NoGlr => 0.0,
            _ => self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub objective: f64,
    pub kernel_centroid: (f64, f64),
    pub admm: Option<AdmmReport>,
    pub cg: CgReport,
    pub tau_x: f64,
    pub kernel_seconds: f64,
    pub sri_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub laplacian_seconds: f64,
    pub init_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub sri: Cube,
    pub kernel: Kernel,
    pub objective_trace: Vec<f64>,
    pub iterations: Vec<IterationReport>,
    pub laplacian_nnz: usize,
    pub timings: StageTimings,
}

fn check_pair(y: &Cube, z: &Cube, spec: &DownsampleSpec) -> Result<()> {
    let d = spec.ratio;
    if z.height() != d * y.height() || z.width() != d * y.width() {
        return Err(Error::DimensionMismatch(format!(
            "MSI is {}x{}, expected {}x{} for an {}x{} HSI at ratio {d}",
            z.height(),
            z.width(),
            d * y.height(),
            d * y.width(),
            y.height(),
            y.width()
        )));
    }
    Ok(())
}

/// `(C(K)* P* P C(K) + alpha L + shift I)` acting on band-major flattened cubes.
struct SriSystem<'a> {
    degradation: &'a Degradation,
    laplacian: Option<&'a SparseSymMatrix>,
    alpha: f64,
    shift: f64,
    pixels: usize,
    bands: usize,
}

impl LinearOperator for SriSystem<'_> {
    fn dim(&self) -> usize {
        self.pixels * self.bands
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_exact_mut(self.pixels)
            .zip(x.par_chunks_exact(self.pixels))
            .for_each(|(dst, src)| {
                let normal = self.degradation.normal_plane(src);
                dst.copy_from_slice(&normal);
                if let (Some(l), true) = (self.laplacian, self.alpha != 0.0) {
                    let mut lx = vec![0.0; self.pixels];
                    l.apply(src, &mut lx);
                    dst.iter_mut().zip(&lx).for_each(|(d, v)| *d += self.alpha * v);
                }
                if self.shift != 0.0 {
                    dst.iter_mut().zip(src).for_each(|(d, v)| *d += self.shift * v);
                }
            });
    }
}

fn data_misfit(degradation: &Degradation, x: &Cube, y: &Cube) -> Result<f64> {
    let ax = degradation.forward(x)?;
    Ok(ax
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `||P C(K) X - Y||^2 + alpha Tr(X^T L X) + beta TV(K)`, or `+inf` when `K`
/// is off the simplex.
pub fn objective_value(
    kernel: &Kernel,
    x: &Cube,
    y: &Cube,
    laplacian: Option<&SparseSymMatrix>,
    alpha: f64,
    beta: f64,
    spec: &DownsampleSpec,
) -> Result<f64> {
    if !kernel.is_feasible_within(1e-10) {
        return Ok(f64::INFINITY);
    }
    let degradation = Degradation::new(kernel, *spec, x.height(), x.width())?;
    let mut value = data_misfit(&degradation, x, y)?;
    if alpha != 0.0 {
        if let Some(l) = laplacian {
            value += alpha * quadratic_form(l, x)?;
        }
    }
    Ok(value + beta * total_variation(kernel))
}

/// Solves `(A*A + alpha L + tau I) X = A* Y + tau X_prev` from `x0`.
fn solve_sri(
    degradation: &Degradation,
    y: &Cube,
    laplacian: Option<&SparseSymMatrix>,
    alpha: f64,
    tau: f64,
    x_prev: Option<&Cube>,
    x0: &Cube,
    cg: &CgConfig,
) -> Result<(Cube, CgReport)> {
    let mut rhs = degradation.adjoint(y)?;
    if let Some(prev) = x_prev {
        rhs.data_mut()
            .iter_mut()
            .zip(prev.data())
            .for_each(|(r, p)| *r += tau * p);
    }
    let op = SriSystem {
        degradation,
        laplacian,
        alpha,
        shift: tau,
        pixels: x0.pixels(),
        bands: x0.bands(),
    };
    let (x, report) = cg_solve(&op, rhs.data(), x0.data(), cg)?;
    let cube = Cube::new(x0.height(), x0.width(), x0.bands(), x)
        .map_err(|_| Error::Numerical("SRI update produced non-finite samples".into()))?;
    Ok((cube, report))
}

/// Non-blind fusion with a known kernel: `(A*A + alpha L) X = A* Y`, started
/// from the bicubic upsampling of `Y`. CG non-convergence is reported, not
/// raised.
pub fn fuse_nonblind(
    y: &Cube,
    laplacian: Option<&SparseSymMatrix>,
    kernel: &Kernel,
    cfg: &FusionConfig,
) -> Result<(Cube, CgReport)> {
    let spec = cfg.downsample();
    let x0 = bicubic_upsample(y, &spec)?;
    if let Some(l) = laplacian {
        if l.dim() != x0.pixels() {
            return Err(Error::DimensionMismatch(format!(
                "Laplacian of order {} for {} pixels",
                l.dim(),
                x0.pixels()
            )));
        }
    }
    let degradation = Degradation::new(kernel, spec, x0.height(), x0.width())?;
    solve_sri(&degradation, y, laplacian, cfg.alpha, 0.0, None, &x0, &cfg.cg)
}

/// Runs the configured mode. `known_kernel` is required for the non-blind mode.
pub fn fuse(y: &Cube, z: &Cube, cfg: &FusionConfig, known_kernel: Option<&Kernel>) -> Result<FusionResult> {
    cfg.validate()?;
    let spec = cfg.downsample();
    check_pair(y, z, &spec)?;
    let started = Instant::now();
    let alpha = cfg.effective_alpha();

    let t0 = Instant::now();
    let laplacian = if alpha > 0.0 {
        Some(build_matting_laplacian(z, &cfg.laplacian)?)
    } else {
        None
    };
    let laplacian_seconds = t0.elapsed().as_secs_f64();
    let laplacian_nnz = laplacian.as_ref().map_or(0, |l| l.nnz());

    if cfg.mode == FusionMode::Nonblind {
        let kernel = known_kernel
            .ok_or_else(|| Error::InvalidConfig("non-blind mode needs a kernel".into()))?;
        if !kernel.is_feasible_within(1e-9) {
            return Err(Error::InvalidConfig("supplied kernel is not on the simplex".into()));
        }
        let t = Instant::now();
        let (sri, cg) = fuse_nonblind(y, laplacian.as_ref(), kernel, cfg)?;
        let objective = objective_value(kernel, &sri, y, laplacian.as_ref(), alpha, cfg.beta, &spec)?;
        return Ok(FusionResult {
            sri,
            kernel: kernel.clone(),
            objective_trace: vec![objective],
            iterations: vec![IterationReport {
                iteration: 0,
                objective,
                kernel_centroid: kernel.centroid(),
                admm: None,
                cg,
                tau_x: 0.0,
                kernel_seconds: 0.0,
                sri_seconds: t.elapsed().as_secs_f64(),
            }],
            laplacian_nnz,
            timings: StageTimings {
                laplacian_seconds,
                init_seconds: 0.0,
                total_seconds: started.elapsed().as_secs_f64(),
            },
        });
    }

    let p = cfg.kernel_size;
    let t0 = Instant::now();
    let mut x = bicubic_upsample(y, &spec)?;
    let init_seconds = t0.elapsed().as_secs_f64();
    if p > x.height() || p > x.width() {
        return Err(Error::KernelTooLarge {
            size: p,
            height: x.height(),
            width: x.width(),
        });
    }

    let mut k_prev = match cfg.init_kernel {
        KernelInit::None => None,
        KernelInit::Centered => Some(Kernel::delta(p)),
    };
    let params = KernelStepParams {
        beta: cfg.beta,
        tau: cfg.tau_k,
        admm: cfg.admm,
    };
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = Vec::new();
    let mut kernel = Kernel::delta(p);

    for it in 0..cfg.outer_iters {
        let tk = Instant::now();
        let term = KernelDataTerm::new(&x, y, spec, p)?;
        let (k_new, admm) = solve_with_term(&term, k_prev.as_ref(), &params)?;
        let kernel_seconds = tk.elapsed().as_secs_f64();
        kernel = k_new;

        let tx = Instant::now();
        let degradation = Degradation::new(&kernel, spec, x.height(), x.width())?;
        let tau_x = match cfg.tau_x {
            Some(t) => t,
            None => auto_tau(data_misfit(&degradation, &x, y)?, x.norm_sq()),
        };
        let (x_new, cg) = solve_sri(
            &degradation,
            y,
            laplacian.as_ref(),
            alpha,
            tau_x,
            Some(&x),
            &x,
            &cfg.cg,
        )?;
        x = x_new;
        let sri_seconds = tx.elapsed().as_secs_f64();

        let objective = objective_value(&kernel, &x, y, laplacian.as_ref(), alpha, cfg.beta, &spec)?;
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite at outer iteration {it}"
            )));
        }
        iterations.push(IterationReport {
            iteration: it,
            objective,
            kernel_centroid: kernel.centroid(),
            admm: Some(admm),
            cg,
            tau_x,
            kernel_seconds,
            sri_seconds,
        });
        let previous = trace.last().copied();
        trace.push(objective);
        k_prev = Some(kernel.clone());
        if let Some(prev) = previous {
            let change = (prev - objective).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if change < cfg.outer_tol {
                break;
            }
        }
    }

    Ok(FusionResult {
        sri: x,
        kernel,
        objective_trace: trace,
        iterations,
        laplacian_nnz,
        timings: StageTimings {
            laplacian_seconds,
            init_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

/// Blind fusion with the configured settings (mode is forced to blind).
pub fn bglrf(y: &Cube, z: &Cube, cfg: &FusionConfig) -> Result<FusionResult> {
    let cfg = FusionConfig {
        mode: FusionMode::Blind,
        ..cfg.clone()
    };
    fuse(y, z, &cfg, None)
}

/// True when every step of `trace` rises by at most `slack` relative to the
/// previous value.
pub fn is_non_increasing(trace: &[f64], slack: f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] <= w[0] + slack * w[0].abs())
}
