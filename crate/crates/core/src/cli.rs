//! Command-line front end: `simulate`, `fuse`, `metrics`, `ablation` and
//! `rerun`.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 I/O, 4 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, ErrorKind, Result};
use crate::fusion::{fuse, FusionConfig, FusionMode, FusionResult, IterationReport, StageTimings};
use crate::interp::bicubic_upsample;
use crate::io::{format_csv_grid, read_csv_grid, read_cube, write_cube, write_text, Dtype};
use crate::metrics::{MetricReport, UIQI_WINDOW};
use crate::simulate::{SimulationConfig, RNG_ALGORITHM};
use crate::spatial::Kernel;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "bglrf", version, about = "Blind graph-Laplacian-regularized HSI/MSI fusion")]
pub struct Cli {
    /// Cap on worker threads (1 gives the reference ordering).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom SRI and its degraded HSI/MSI pair.
    Simulate(SimulateArgs),
    /// Fuse an HSI with an MSI.
    Fuse(FuseArgs),
    /// Compare an estimate against a reference cube.
    Metrics(MetricsArgs),
    /// Run bicubic, blind, no-GLR and non-blind fusion on one instance.
    Ablation(AblationArgs),
    /// Re-execute the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON simulation config; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// RNG seed for phantom and noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// SRI height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// SRI width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// SRI band count.
    #[arg(long)]
    pub bands: Option<usize>,
    /// Number of endmember materials in the phantom.
    #[arg(long)]
    pub materials: Option<usize>,
    /// MSI band count.
    #[arg(long)]
    pub msi_bands: Option<usize>,
    /// Spatial downsampling ratio d.
    #[arg(long)]
    pub ratio: Option<usize>,
    /// Kernel shift in rows (negative moves content up).
    #[arg(long, allow_hyphen_values = true)]
    pub shift_row: Option<i64>,
    /// Kernel shift in columns (negative moves content left).
    #[arg(long, allow_hyphen_values = true)]
    pub shift_col: Option<i64>,
    /// HSI noise level in dB; set `null` in the config file for none.
    #[arg(long)]
    pub hsi_snr_db: Option<f64>,
    /// MSI noise level in dB; set `null` in the config file for none.
    #[arg(long)]
    pub msi_snr_db: Option<f64>,
    /// Spectral response CSV (MSI bands x SRI bands); synthetic if absent.
    #[arg(long)]
    pub srf_csv: Option<String>,
    /// Echo the merged config to stdout (it is always stored in the manifest).
    #[arg(long)]
    pub print_effective_config: bool,
}

/// Flags mirroring the top-level keys of [`FusionConfig`].
#[derive(Debug, Args, Default)]
pub struct FusionOverrides {
    /// blind, nonblind or no-glr.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<FusionMode>,
    /// Graph Laplacian weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Kernel TV weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Kernel inertia weight (automatic if unset).
    #[arg(long)]
    pub tau_k: Option<f64>,
    /// SRI inertia weight (automatic if unset).
    #[arg(long)]
    pub tau_x: Option<f64>,
    /// Odd kernel side length p.
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Spatial downsampling ratio d.
    #[arg(long)]
    pub ratio: Option<usize>,
    /// Maximum outer iterations.
    #[arg(long)]
    pub outer_iters: Option<usize>,
    /// Relative objective change that stops the outer loop.
    #[arg(long)]
    pub outer_tol: Option<f64>,
    /// `none` or `centered`.
    #[arg(long)]
    pub init_kernel: Option<String>,
}

fn parse_mode(s: &str) -> std::result::Result<FusionMode, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("unknown mode {s:?}; expected blind, nonblind or no-glr"))
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Low-resolution hyperspectral cube (HXC1).
    #[arg(long)]
    pub hsi: PathBuf,
    /// High-resolution multispectral cube (HXC1).
    #[arg(long)]
    pub msi: PathBuf,
    /// JSON fusion config; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel CSV, required in non-blind mode.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: FusionOverrides,
    /// Echo the merged config to stdout.
    #[arg(long)]
    pub print_effective_config: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Cube under test (HXC1).
    #[arg(long)]
    pub estimate: PathBuf,
    /// Reference cube (HXC1).
    #[arg(long)]
    pub truth: PathBuf,
    /// Spatial downsampling ratio d.
    #[arg(long)]
    pub ratio: usize,
    /// UIQI sliding window side.
    #[arg(long, default_value_t = UIQI_WINDOW)]
    pub window: usize,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Also write a header plus one-line CSV summary here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    /// Low-resolution hyperspectral cube (HXC1).
    #[arg(long)]
    pub hsi: PathBuf,
    /// High-resolution multispectral cube (HXC1).
    #[arg(long)]
    pub msi: PathBuf,
    /// Reference cube (HXC1).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel for the non-blind run; a centered delta of `kernel_size` otherwise.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: FusionOverrides,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// manifest.json written by simulate or fuse.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the replay; the recorded one is used otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub rng: Option<String>,
}

impl RunManifest {
    fn new(subcommand: &str, config: Value) -> Self {
        Self {
            tool: "bglrf".into(),
            tool_version: TOOL_VERSION.into(),
            subcommand: subcommand.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config,
            seed: None,
            rng: None,
        }
    }
}

/// Machine-readable summary of one fusion run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: FusionConfig,
    pub objective_trace: Vec<f64>,
    pub kernel_size: usize,
    pub kernel_centroid: (f64, f64),
    pub outer_iterations: usize,
    pub cg_iterations: Vec<usize>,
    pub admm_sweeps: Vec<usize>,
    pub admm_cg_iterations: Vec<usize>,
    pub laplacian_nnz: usize,
    pub timings: StageTimings,
    pub iterations: Vec<IterationReport>,
}

impl RunReport {
    pub fn new(cfg: &FusionConfig, result: &FusionResult) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            config: cfg.clone(),
            objective_trace: result.objective_trace.clone(),
            kernel_size: result.kernel.size(),
            kernel_centroid: result.kernel.centroid(),
            outer_iterations: result.iterations.len(),
            cg_iterations: result.iterations.iter().map(|i| i.cg.iterations).collect(),
            admm_sweeps: result
                .iterations
                .iter()
                .map(|i| i.admm.as_ref().map_or(0, |a| a.sweeps))
                .collect(),
            admm_cg_iterations: result
                .iterations
                .iter()
                .map(|i| i.admm.as_ref().map_or(0, |a| a.cg_iterations))
                .collect(),
            laplacian_nnz: result.laplacian_nnz,
            timings: result.timings.clone(),
            iterations: result.iterations.clone(),
        }
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be >= 1".into()));
        }
        // A pool may already exist when called in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Ablation(a) => cmd_ablation(&a),
        Command::Rerun(a) => cmd_rerun(&a),
    }
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn write_kernel_csv(kernel: &Kernel, path: &Path) -> Result<()> {
    write_text(path, &format_csv_grid(kernel.size(), kernel.size(), kernel.weights()))
}

pub fn read_kernel_csv(path: &Path) -> Result<Kernel> {
    let m = read_csv_grid(path)?;
    if m.rows != m.cols {
        return Err(Error::DimensionMismatch(format!(
            "kernel CSV is {}x{}, expected square",
            m.rows, m.cols
        )));
    }
    Kernel::new(m.rows, m.data)
}

fn simulation_config(a: &SimulateArgs) -> Result<SimulationConfig> {
    let mut cfg: SimulationConfig = match &a.config {
        Some(p) => serde_json::from_value(read_json(p)?)?,
        None => SimulationConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = &a.$field { cfg.$field = v.clone(); })*};
    }
    set!(seed, height, width, bands, materials, msi_bands, ratio);
    if let Some(v) = a.shift_row {
        cfg.shift.0 = v;
    }
    if let Some(v) = a.shift_col {
        cfg.shift.1 = v;
    }
    if let Some(v) = a.hsi_snr_db {
        cfg.hsi_snr_db = Some(v);
    }
    if let Some(v) = a.msi_snr_db {
        cfg.msi_snr_db = Some(v);
    }
    if let Some(v) = &a.srf_csv {
        cfg.srf_csv = Some(v.clone());
    }
    Ok(cfg)
}

pub fn run_simulation(cfg: &SimulationConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let sim = cfg.run()?;
    ensure_dir(out)?;
    let files = [
        ("hsi", "Y.hxc"),
        ("msi", "Z.hxc"),
        ("truth", "X.hxc"),
        ("kernel", "K.csv"),
        ("srf", "srf.csv"),
    ];
    write_cube(&sim.hsi, out.join("Y.hxc"), Dtype::F64)?;
    write_cube(&sim.msi, out.join("Z.hxc"), Dtype::F64)?;
    write_cube(&sim.truth, out.join("X.hxc"), Dtype::F64)?;
    write_kernel_csv(&sim.kernel, &out.join("K.csv"))?;
    write_text(
        out.join("srf.csv"),
        &format_csv_grid(
            sim.response.msi_bands(),
            sim.response.sri_bands(),
            sim.response.weights(),
        ),
    )?;
    let mut manifest = RunManifest::new("simulate", serde_json::to_value(cfg)?);
    for (key, name) in files {
        manifest.outputs.insert(key.into(), path_string(&out.join(name)));
    }
    manifest.seed = Some(cfg.seed);
    manifest.rng = Some(RNG_ALGORITHM.into());
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = simulation_config(a)?;
    if a.print_effective_config {
        emit(&serde_json::to_string_pretty(&cfg)?);
    }
    run_simulation(&cfg, &a.out)?;
    Ok(())
}

fn fusion_config(config: Option<&Path>, o: &FusionOverrides) -> Result<FusionConfig> {
    let mut cfg: FusionConfig = match config {
        Some(p) => serde_json::from_value(read_json(p)?)?,
        None => FusionConfig::default(),
    };
    if let Some(m) = o.mode {
        cfg.mode = m;
    }
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = o.$field { cfg.$field = v; })*};
    }
    set!(alpha, beta, kernel_size, ratio, outer_iters, outer_tol);
    if o.tau_k.is_some() {
        cfg.tau_k = o.tau_k;
    }
    if o.tau_x.is_some() {
        cfg.tau_x = o.tau_x;
    }
    if let Some(init) = &o.init_kernel {
        cfg.init_kernel = serde_json::from_value(Value::String(init.clone()))
            .map_err(|_| Error::InvalidConfig(format!("unknown init_kernel {init:?}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_fusion(
    hsi: &Path,
    msi: &Path,
    kernel: Option<&Path>,
    cfg: &FusionConfig,
    out: &Path,
) -> Result<(RunManifest, RunReport)> {
    let y = read_cube(hsi)?;
    let z = read_cube(msi)?;
    let known = match (cfg.mode, kernel) {
        (FusionMode::Nonblind, None) => {
            return Err(Error::InvalidConfig("non-blind mode requires --kernel".into()))
        }
        (FusionMode::Nonblind, Some(p)) => Some(read_kernel_csv(p)?),
        _ => None,
    };
    let result = fuse(&y, &z, cfg, known.as_ref())?;
    ensure_dir(out)?;
    write_cube(&result.sri, out.join("X.hxc"), Dtype::F64)?;
    write_kernel_csv(&result.kernel, &out.join("K_est.csv"))?;
    let report = RunReport::new(cfg, &result);
    write_json(&out.join("report.json"), &report)?;

    let mut manifest = RunManifest::new("fuse", serde_json::to_value(cfg)?);
    manifest.inputs.insert("hsi".into(), path_string(hsi));
    manifest.inputs.insert("msi".into(), path_string(msi));
    if let Some(k) = kernel {
        manifest.inputs.insert("kernel".into(), path_string(k));
    }
    for (key, name) in [("sri", "X.hxc"), ("kernel", "K_est.csv"), ("report", "report.json")] {
        manifest.outputs.insert(key.into(), path_string(&out.join(name)));
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok((manifest, report))
}

fn cmd_fuse(a: &FuseArgs) -> Result<()> {
    let cfg = fusion_config(a.config.as_deref(), &a.overrides)?;
    if a.print_effective_config {
        emit(&serde_json::to_string_pretty(&cfg)?);
    }
    if cfg.mode == FusionMode::Nonblind {
        match &a.kernel {
            None => return Err(Error::InvalidConfig("non-blind mode requires --kernel".into())),
            Some(p) if !p.exists() => {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "kernel file not found"),
                ))
            }
            _ => {}
        }
    }
    run_fusion(&a.hsi, &a.msi, a.kernel.as_deref(), &cfg, &a.out)?;
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let x = read_cube(&a.estimate)?;
    let t = read_cube(&a.truth)?;
    let report = MetricReport::compute_with_window(&x, &t, a.ratio, a.window)?;
    let json = serde_json::to_string_pretty(&report)?;
    emit(&json);
    if let Some(p) = &a.json {
        write_text(p, &(json + "\n"))?;
    }
    if let Some(p) = &a.csv {
        write_text(p, &format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_line()))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AblationEntry {
    method: &'static str,
    kernel_centroid: Option<(f64, f64)>,
    metrics: MetricReport,
}

fn cmd_ablation(a: &AblationArgs) -> Result<()> {
    let base = fusion_config(a.config.as_deref(), &a.overrides)?;
    let y = read_cube(&a.hsi)?;
    let z = read_cube(&a.msi)?;
    let truth = read_cube(&a.truth)?;
    let wrong = match &a.kernel {
        Some(p) => read_kernel_csv(p)?,
        None => Kernel::delta(base.kernel_size),
    };
    let d = base.ratio;
    let mut entries = Vec::new();
    let bicubic = bicubic_upsample(&y, &base.downsample())?;
    entries.push(AblationEntry {
        method: "bicubic",
        kernel_centroid: None,
        metrics: MetricReport::compute(&bicubic, &truth, d)?,
    });
    for (method, mode) in [
        ("bglrf", FusionMode::Blind),
        ("no-glr", FusionMode::NoGlr),
        ("non-blind", FusionMode::Nonblind),
    ] {
        let cfg = FusionConfig {
            mode,
            ..base.clone()
        };
        let r = fuse(&y, &z, &cfg, Some(&wrong))?;
        entries.push(AblationEntry {
            method,
            kernel_centroid: Some(r.kernel.centroid()),
            metrics: MetricReport::compute(&r.sri, &truth, d)?,
        });
    }
    ensure_dir(&a.out)?;
    let json = serde_json::to_string_pretty(&entries)?;
    write_text(a.out.join("ablation.json"), &(json.clone() + "\n"))?;
    emit(&json);
    Ok(())
}

fn cmd_rerun(a: &RerunArgs) -> Result<()> {
    let manifest: RunManifest = serde_json::from_value(read_json(&a.manifest)?)?;
    let recorded_dir = |key: &str| {
        manifest
            .outputs
            .get(key)
            .and_then(|p| Path::new(p).parent().map(Path::to_path_buf))
    };
    match manifest.subcommand.as_str() {
        "simulate" => {
            let cfg: SimulationConfig = serde_json::from_value(manifest.config.clone())?;
            let out = a
                .out
                .clone()
                .or_else(|| recorded_dir("truth"))
                .ok_or_else(|| Error::InvalidConfig("manifest has no output directory".into()))?;
            run_simulation(&cfg, &out)?;
        }
        "fuse" => {
            let cfg: FusionConfig = serde_json::from_value(manifest.config.clone())?;
            cfg.validate()?;
            let input = |key: &str| {
                manifest
                    .inputs
                    .get(key)
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::InvalidConfig(format!("manifest lacks input {key:?}")))
            };
            let out = a
                .out
                .clone()
                .or_else(|| recorded_dir("sri"))
                .ok_or_else(|| Error::InvalidConfig("manifest has no output directory".into()))?;
            let kernel = manifest.inputs.get("kernel").map(PathBuf::from);
            run_fusion(&input("hsi")?, &input("msi")?, kernel.as_deref(), &cfg, &out)?;
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "cannot rerun subcommand {other:?}"
            )))
        }
    }
    Ok(())
}
