//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary is always shown.
//! Exit status is non-zero if any criterion fails; skipped criteria do not fail.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use bglrf::admm::{diff_adjoint, diff_forward, project_simplex, solve_kernel_subproblem, AdmmConfig, KernelGradient, KernelStepParams};
use bglrf::cg::{cg_solve, CgConfig, DenseOperator};
use bglrf::fusion::{fuse, is_non_increasing, FusionConfig, FusionMode, FusionResult};
use bglrf::interp::bicubic_upsample;
use bglrf::io::read_cube;
use bglrf::laplacian::{apply_laplacian, build_matting_laplacian, quadratic_form, LaplacianConfig};
use bglrf::metrics::{sam, snr_db, MetricReport};
use bglrf::simulate::{gaussian_kernel, make_phantom, Simulation, SimulationConfig, SpectralResponse, load_srf_csv, DegradeSpec, degrade};
use bglrf::spatial::{apply_degradation, convolve_circular, correlate_circular, downsample, embed_adjoint, embed_kernel, upsample_zero};
use bglrf::{Cube, DownsampleSpec, Image, Kernel};
use common::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

// Criterion 1.
const C1_CONV_TOL: f64 = 1e-12;
const C1_ADJOINT_TOL: f64 = 1e-10;
const C1_ADJOINT_TRIALS: usize = 100;
const C1_LIMIT: Duration = Duration::from_secs(10);
// Criterion 2.
const C2_TOL: f64 = 1e-12;
const C2_INSTANCES: usize = 20;
const C2_LIMIT: Duration = Duration::from_secs(5);
// Criterion 3.
const C3_ONES_TOL: f64 = 1e-9;
const C3_EIG_TOL: f64 = 1e-8;
const C3_PAIRWISE_TOL: f64 = 1e-10;
const C3_LIMIT: Duration = Duration::from_secs(30);
// Criterion 4.
const C4_SIMPLEX_TOL: f64 = 1e-10;
const C4_CG_TOL: f64 = 1e-8;
const C4_LIMIT: Duration = Duration::from_secs(10);
// Criterion 5.
const C5_KERNEL_TOL: f64 = 1e-3;
const C5_MAX_SWEEPS: usize = 50;
const C5_LIMIT: Duration = Duration::from_secs(60);
// Criterion 6.
const C6_CENTROID_TOL: f64 = 0.75;
const C6_SNR_GAIN_DB: f64 = 2.0;
const C6_TRACE_SLACK: f64 = 1e-6;
const C6_LIMIT: Duration = Duration::from_secs(300);
/// "Top left by 2": negative row and column displacement.
const C6_SHIFT: (i64, i64) = (-2, -2);
// Criterion 8.
const C8_REL_TOL: f64 = 0.20;
const C8_SAM: f64 = 1.2686;
const C8_SNR_DB: f64 = 32.4036;
const C8_ENV: &str = "BGLRF_INDIAN_PINES";
const C8_SRF_ENV: &str = "BGLRF_INDIAN_PINES_SRF";

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        out.status = Status::Fail;
    }
    out.detail = format!("{}; {:.2} s (limit {} s)", out.detail, elapsed.as_secs_f64(), limit.as_secs());
    out
}

fn gap(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0)
}

fn criterion_1() -> Outcome {
    timed(C1_LIMIT, || {
        let mut rng = rng(101);
        let mut conv_worst = 0.0f64;
        let mut shapes = 0;
        for h in 1..=8 {
            for w in 1..=8 {
                for p in [1usize, 3, 5] {
                    if p > h || p > w {
                        continue;
                    }
                    for _ in 0..3 {
                        let x = random_image(&mut rng, h, w);
                        let k = random_kernel(&mut rng, p);
                        let fast = convolve_circular(&x, &k).unwrap();
                        conv_worst = conv_worst.max(rel_err(&fast.data, &direct_convolution(&x, &k).data));
                        shapes += 1;
                    }
                }
            }
        }
        let mut worst = [0.0f64; 4];
        for _ in 0..C1_ADJOINT_TRIALS {
            let h = rng.random_range(5..=8);
            let w = rng.random_range(5..=8);
            let p = [1, 3, 5][rng.random_range(0..3)];
            let k = random_kernel(&mut rng, p);
            let x = random_image(&mut rng, h, w);
            let y = random_image(&mut rng, h, w);
            worst[0] = worst[0].max(gap(
                convolve_circular(&x, &k).unwrap().dot(&y),
                x.dot(&correlate_circular(&y, &k).unwrap()),
            ));
            worst[1] = worst[1].max(gap(
                embed_kernel(&k, h, w).unwrap().dot(&y),
                dot(k.weights(), embed_adjoint(&y, p).unwrap().weights()),
            ));
            let d = rng.random_range(1..=3);
            let spec = DownsampleSpec::new(d);
            let big = random_image(&mut rng, 2 * d, 3 * d);
            let small = random_image(&mut rng, 2, 3);
            worst[2] = worst[2].max(gap(
                downsample(&big, &spec).unwrap().dot(&small),
                big.dot(&upsample_zero(&small, &spec, 2 * d, 3 * d).unwrap()),
            ));
            let q = rng.random_range(2..=9);
            let kq = random_kernel(&mut rng, q);
            let mut g = KernelGradient::zeros(q);
            g.rows.iter_mut().for_each(|r| *r = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            worst[3] = worst[3].max(gap(
                diff_forward(&kq).unwrap().dot(&g),
                dot(kq.weights(), diff_adjoint(&g).unwrap().weights()),
            ));
        }
        let ok = conv_worst <= C1_CONV_TOL && worst.iter().all(|&v| v <= C1_ADJOINT_TOL);
        verdict(
            ok,
            format!(
                "conv vs direct sum on {shapes} instances: worst rel {conv_worst:.1e} (tol {C1_CONV_TOL:.0e}); \
                 adjoint gaps C {:.1e}, J {:.1e}, P {:.1e}, D {:.1e} over {C1_ADJOINT_TRIALS} trials each (tol {C1_ADJOINT_TOL:.0e})",
                worst[0], worst[1], worst[2], worst[3]
            ),
        )
    })
}

fn criterion_2() -> Outcome {
    timed(C2_LIMIT, || {
        let mut rng = rng(102);
        let mut worst = 0.0f64;
        for _ in 0..C2_INSTANCES {
            let h = rng.random_range(5..=12);
            let w = rng.random_range(5..=12);
            let p = [1, 3, 5][rng.random_range(0..3)];
            let k = random_kernel(&mut rng, p);
            let x = random_image(&mut rng, h, w);
            let lhs = convolve_circular(&x, &k).unwrap();
            let jk = embed_kernel(&k, h, w).unwrap();
            let rhs = Image::from_fn(h, w, |r, c| {
                let mut s = 0.0;
                for a in 0..h {
                    for b in 0..w {
                        s += x.get(a, b) * jk.get((r + h - a) % h, (c + w - b) % w);
                    }
                }
                s
            });
            worst = worst.max(rel_err(&lhs.data, &rhs.data));
        }
        verdict(
            worst <= C2_TOL,
            format!("{C2_INSTANCES} instances: worst rel {worst:.1e} (tol {C2_TOL:.0e})"),
        )
    })
}

fn criterion_3() -> Outcome {
    timed(C3_LIMIT, || {
        let mut rng = rng(103);
        let cfg = LaplacianConfig::default();
        let (mut ones_worst, mut eig_min, mut pair_worst, mut sym_ok) = (0.0f64, f64::INFINITY, 0.0f64, true);
        let mut count = 0;
        for &b in &[1usize, 3, 4] {
            for _ in 0..6 {
                let h = rng.random_range(3..=8);
                let w = rng.random_range(3..=8);
                let z = Cube::from_fn(h, w, b, |_, _, _| rng.random_range(0.0..1.0));
                let l = build_matting_laplacian(&z, &cfg).unwrap();
                let n = h * w;
                let dense = DMatrix::from_fn(n, n, |i, j| l.get(i, j));
                let scale = dense.amax();
                sym_ok &= dense == dense.transpose();
                let ones = Cube::from_fn(h, w, 1, |_, _, _| 1.0);
                let l1 = apply_laplacian(&l, &ones).unwrap();
                ones_worst = ones_worst.max(l1.data().iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
                eig_min = eig_min.min(SymmetricEigen::new(dense).eigenvalues.min() / scale.max(1.0));
                let x = random_cube(&mut rng, h, w, 3);
                let q = quadratic_form(&l, &x).unwrap();
                let mut pairwise = 0.0;
                for (i, j, v) in l.triplets() {
                    if i != j {
                        let d2: f64 = (0..3).map(|c| (x.band(c)[i] - x.band(c)[j]).powi(2)).sum();
                        pairwise += 0.5 * (-v) * d2;
                    }
                }
                pair_worst = pair_worst.max((q - pairwise).abs() / q.abs().max(1.0));
                count += 1;
            }
        }
        let ok = sym_ok && ones_worst <= C3_ONES_TOL && eig_min >= -C3_EIG_TOL && pair_worst <= C3_PAIRWISE_TOL;
        verdict(
            ok,
            format!(
                "{count} MSIs (1/3/4 bands): symmetric {sym_ok}; |L1|/max|L| {ones_worst:.1e} (tol {C3_ONES_TOL:.0e}); \
                 min eig {eig_min:.1e} (>= -{C3_EIG_TOL:.0e}); pairwise identity rel {pair_worst:.1e} (tol {C3_PAIRWISE_TOL:.0e})"
            ),
        )
    })
}

fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        support.iter().for_each(|&i| x[i] = v[i] - shift);
        if x.iter().any(|&xi| xi < -1e-15) {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.unwrap().1
}

fn criterion_4() -> Outcome {
    timed(C4_LIMIT, || {
        let grid = [-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0];
        let mut simplex_worst = 0.0f64;
        let mut vectors = 0;
        for len in 1..=4u32 {
            for code in 0..grid.len().pow(len) {
                let mut c = code;
                let v: Vec<f64> = (0..len)
                    .map(|_| {
                        let g = grid[c % grid.len()];
                        c /= grid.len();
                        g
                    })
                    .collect();
                let got = project_simplex(&v);
                let want = brute_force_simplex(&v);
                simplex_worst = got.iter().zip(&want).fold(simplex_worst, |m, (a, b)| m.max((a - b).abs()));
                vectors += 1;
            }
        }
        let mut rng = rng(104);
        let mut cg_worst = 0.0f64;
        let mut systems = 0;
        for n in 1..=20 {
            for _ in 0..3 {
                let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let a = m.transpose() * &m + DMatrix::identity(n, n);
                let b = random_vec(&mut rng, n);
                let direct = a.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
                let op = DenseOperator::new(n, (0..n * n).map(|k| a[(k / n, k % n)]).collect()).unwrap();
                let (x, _) = cg_solve(&op, &b, &vec![0.0; n], &CgConfig::new(1e-13, 10 * n)).unwrap();
                cg_worst = cg_worst.max(rel_err(&x, direct.as_slice()));
                systems += 1;
            }
        }
        verdict(
            simplex_worst <= C4_SIMPLEX_TOL && cg_worst <= C4_CG_TOL,
            format!(
                "simplex vs active-set enumeration on {vectors} vectors: worst {simplex_worst:.1e} (tol {C4_SIMPLEX_TOL:.0e}); \
                 CG vs LU on {systems} SPD systems: worst rel {cg_worst:.1e} (tol {C4_CG_TOL:.0e})"
            ),
        )
    })
}

fn criterion_5() -> Outcome {
    timed(C5_LIMIT, || {
        let x = make_phantom(48, 48, 8, 6, 5).unwrap();
        let truth = gaussian_kernel(4, (0, 0)).unwrap();
        let spec = DownsampleSpec::new(4);
        let y = apply_degradation(&x, &truth, &spec).unwrap();
        let params = KernelStepParams {
            beta: 0.0,
            tau: None,
            admm: AdmmConfig {
                max_sweeps: C5_MAX_SWEEPS,
                ..AdmmConfig::default()
            },
        };
        let (k, rep) = solve_kernel_subproblem(&x, &y, spec, 9, None, &params).unwrap();
        let err = rel_err(k.weights(), truth.weights()) * truth.norm_sq().sqrt();
        verdict(
            err <= C5_KERNEL_TOL && rep.sweeps <= C5_MAX_SWEEPS,
            format!(
                "48x48x8 noiseless, 9x9 Gaussian, beta 0, p 9: ||K - K*||_F {err:.2e} (tol {C5_KERNEL_TOL:.0e}) after {} sweeps (max {C5_MAX_SWEEPS})",
                rep.sweeps
            ),
        )
    })
}

fn desk_scale_simulation() -> SimulationConfig {
    SimulationConfig {
        height: 48,
        width: 48,
        bands: 16,
        materials: 6,
        ratio: 4,
        shift: C6_SHIFT,
        hsi_snr_db: Some(30.0),
        msi_snr_db: Some(40.0),
        ..SimulationConfig::default()
    }
}

fn desk_scale_fusion() -> FusionConfig {
    FusionConfig {
        alpha: 10.0,
        beta: 10.0,
        kernel_size: 13,
        ratio: 4,
        ..FusionConfig::default()
    }
}

fn centroid_error(a: &Kernel, b: &Kernel) -> f64 {
    let (ar, ac) = a.centroid();
    let (br, bc) = b.centroid();
    (ar - br).hypot(ac - bc)
}

struct DeskScale {
    sim: Simulation,
    blind: FusionResult,
    elapsed: Duration,
}

fn run_desk_scale() -> DeskScale {
    let sim = desk_scale_simulation().run().unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let blind = pool.install(|| fuse(&sim.hsi, &sim.msi, &desk_scale_fusion(), None).unwrap());
    DeskScale {
        sim,
        blind,
        elapsed: start.elapsed(),
    }
}

fn criterion_6(ds: &DeskScale) -> Outcome {
    let truth = &ds.sim.truth;
    let bicubic = bicubic_upsample(&ds.sim.hsi, &DownsampleSpec::new(4)).unwrap();
    let cerr = centroid_error(&ds.blind.kernel, &ds.sim.kernel);
    let sam_b = sam(&ds.blind.sri, truth).unwrap().mean_degrees;
    let sam_bic = sam(&bicubic, truth).unwrap().mean_degrees;
    let snr_b = snr_db(&ds.blind.sri, truth).unwrap();
    let snr_bic = snr_db(&bicubic, truth).unwrap();
    let mono = is_non_increasing(&ds.blind.objective_trace, C6_TRACE_SLACK);
    let ok = cerr <= C6_CENTROID_TOL
        && sam_b < sam_bic
        && snr_b >= snr_bic + C6_SNR_GAIN_DB
        && mono
        && ds.elapsed <= C6_LIMIT;
    verdict(
        ok,
        format!(
            "(a) centroid error {cerr:.3} px (tol {C6_CENTROID_TOL}); (b) SAM {sam_b:.3} vs bicubic {sam_bic:.3} deg; \
             (c) SNR {snr_b:.2} vs bicubic {snr_bic:.2} dB (need +{C6_SNR_GAIN_DB}); (d) trace of {} values non-increasing \
             within {C6_TRACE_SLACK:.0e}: {mono}; {:.1} s single-threaded (limit {} s)",
            ds.blind.objective_trace.len(),
            ds.elapsed.as_secs_f64(),
            C6_LIMIT.as_secs()
        ),
    )
}

fn criterion_7(ds: &DeskScale) -> Outcome {
    let sim = &ds.sim;
    let no_glr = fuse(
        &sim.hsi,
        &sim.msi,
        &FusionConfig {
            mode: FusionMode::NoGlr,
            ..desk_scale_fusion()
        },
        None,
    )
    .unwrap();
    let wrong = Kernel::delta(13);
    let nonblind = fuse(
        &sim.hsi,
        &sim.msi,
        &FusionConfig {
            mode: FusionMode::Nonblind,
            ..desk_scale_fusion()
        },
        Some(&wrong),
    )
    .unwrap();
    let err_blind = centroid_error(&ds.blind.kernel, &sim.kernel);
    let err_noglr = centroid_error(&no_glr.kernel, &sim.kernel);
    let sam_blind = sam(&ds.blind.sri, &sim.truth).unwrap().mean_degrees;
    let sam_nb = sam(&nonblind.sri, &sim.truth).unwrap().mean_degrees;
    verdict(
        err_noglr > err_blind && sam_nb > sam_blind,
        format!(
            "centroid error no-GLR {err_noglr:.3} > blind {err_blind:.3}; SAM non-blind (centered kernel) {sam_nb:.3} > blind {sam_blind:.3}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let Some(path) = std::env::var_os(C8_ENV) else {
        return Outcome {
            status: Status::Skip,
            detail: format!("set {C8_ENV} to an HXC Indian Pines cube (and optionally {C8_SRF_ENV}) to run"),
        };
    };
    let start = Instant::now();
    let full = read_cube(&path).unwrap();
    // Crop to a multiple of the ratio.
    let (h, w, b) = full.dims();
    let (h4, w4) = (h / 4 * 4, w / 4 * 4);
    let truth = Cube::from_fn(h4, w4, b, |r, c, l| full.get(r, c, l));
    let response = match std::env::var_os(C8_SRF_ENV) {
        Some(p) => load_srf_csv(p).unwrap(),
        None => SpectralResponse::synthetic(6, b).unwrap(),
    };
    let spec = DegradeSpec {
        downsample: DownsampleSpec::new(4),
        kernel: gaussian_kernel(4, (0, 0)).unwrap(),
        hsi_snr_db: Some(30.0),
        msi_snr_db: Some(40.0),
        seed: 1,
    };
    let (y, z) = degrade(&truth, &response, &spec).unwrap();
    let r = fuse(&y, &z, &desk_scale_fusion(), None).unwrap();
    let m = MetricReport::compute(&r.sri, &truth, 4).unwrap();
    let sam_ok = (m.sam_degrees - C8_SAM).abs() <= C8_REL_TOL * C8_SAM;
    let snr_ok = (m.snr_db - C8_SNR_DB).abs() <= C8_REL_TOL * C8_SNR_DB;
    verdict(
        sam_ok && snr_ok,
        format!(
            "SAM {:.4} vs {C8_SAM} and SNR {:.2} vs {C8_SNR_DB} dB (each within {:.0}%); {:.0} s",
            m.sam_degrees,
            m.snr_db,
            C8_REL_TOL * 100.0,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bglrf")).args(args).output().unwrap()
}

fn pipeline(root: &Path, tag: &str, rerun_from: Option<(&Path, &Path)>) -> Result<(PathBuf, Vec<u8>), String> {
    let sim_dir = root.join(format!("sim_{tag}"));
    let fuse_dir = root.join(format!("fuse_{tag}"));
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let check = |out: std::process::Output, what: &str| -> Result<(), String> {
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{what} failed: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    match rerun_from {
        None => {
            let cfg = root.join("sim.json");
            std::fs::write(&cfg, serde_json::to_string(&desk_scale_simulation()).unwrap()).unwrap();
            check(run_cli(&["--threads", "1", "simulate", "--config", &s(&cfg), "--out", &s(&sim_dir)]), "simulate")?;
            let fcfg = root.join("fuse.json");
            std::fs::write(&fcfg, serde_json::to_string(&desk_scale_fusion()).unwrap()).unwrap();
            check(
                run_cli(&[
                    "--threads", "1", "fuse", "--hsi", &s(&sim_dir.join("Y.hxc")), "--msi", &s(&sim_dir.join("Z.hxc")),
                    "--config", &s(&fcfg), "--out", &s(&fuse_dir),
                ]),
                "fuse",
            )?;
        }
        Some((sim_manifest, fuse_manifest)) => {
            check(
                run_cli(&["--threads", "1", "rerun", "--manifest", &s(sim_manifest), "--out", &s(&sim_dir)]),
                "rerun simulate",
            )?;
            check(
                run_cli(&["--threads", "1", "rerun", "--manifest", &s(fuse_manifest), "--out", &s(&fuse_dir)]),
                "rerun fuse",
            )?;
        }
    }
    let json = fuse_dir.join("metrics.json");
    check(
        run_cli(&[
            "--threads", "1", "metrics", "--estimate", &s(&fuse_dir.join("X.hxc")), "--truth", &s(&sim_dir.join("X.hxc")),
            "--ratio", "4", "--json", &s(&json),
        ]),
        "metrics",
    )?;
    Ok((sim_dir, std::fs::read(&json).unwrap()))
}

fn strip_timings(report: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(report).unwrap();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings");
        if let Some(its) = obj.get_mut("iterations").and_then(|i| i.as_array_mut()) {
            for it in its {
                let o = it.as_object_mut().unwrap();
                o.remove("kernel_seconds");
                o.remove("sri_seconds");
            }
        }
    }
    v
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let first = pipeline(root, "a", None);
    let (sim_a, json_a) = match first {
        Ok(v) => v,
        Err(e) => return verdict(false, e),
    };
    let sim_manifest = sim_a.join("manifest.json");
    let fuse_manifest = root.join("fuse_a").join("manifest.json");
    let (sim_b, json_b) = match pipeline(root, "b", Some((&sim_manifest, &fuse_manifest))) {
        Ok(v) => v,
        Err(e) => return verdict(false, e),
    };
    let same_inputs = ["Y.hxc", "Z.hxc", "X.hxc"]
        .iter()
        .all(|f| std::fs::read(sim_a.join(f)).unwrap() == std::fs::read(sim_b.join(f)).unwrap());
    let report = |t: &str| std::fs::read(root.join(format!("fuse_{t}")).join("report.json")).unwrap();
    let same_report = strip_timings(&report("a")) == strip_timings(&report("b"));
    verdict(
        json_a == json_b && same_inputs && same_report,
        format!(
            "metric JSON bit-identical: {}; simulated cubes identical: {same_inputs}; reports identical up to timings: {same_report}",
            json_a == json_b
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters are accepted but ignored.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id: u32, name: &'static str, o: Outcome| {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("criterion {id} [{tag}] {name}: {}", o.detail);
        results.push((id, name, o));
    };
    record(1, "operator oracles", criterion_1());
    record(2, "commutation identity", criterion_2());
    record(3, "Laplacian suite", criterion_3());
    record(4, "simplex projection and CG", criterion_4());
    record(5, "kernel identifiability", criterion_5());
    let ds = run_desk_scale();
    record(6, "desk-scale end-to-end", criterion_6(&ds));
    record(7, "ablation ordering", criterion_7(&ds));
    record(8, "Indian Pines table values", criterion_8());
    record(9, "determinism", criterion_9());

    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, _, o)| matches!(o.status, Status::Fail))
        .map(|(id, _, _)| *id)
        .collect();
    let passed = results.iter().filter(|(_, _, o)| matches!(o.status, Status::Pass)).count();
    let skipped = results.iter().filter(|(_, _, o)| matches!(o.status, Status::Skip)).count();
    println!("acceptance: {passed} passed, {} failed, {skipped} skipped", failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
