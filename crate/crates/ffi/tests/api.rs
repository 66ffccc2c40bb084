use std::ffi::{CStr, CString};
use std::ptr;

use bglrf_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bglrf_last_error()) }.to_string_lossy().into_owned()
}

fn take_string(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let text = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { bglrf_string_free(s) };
    text
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(bglrf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn cube_round_trip_through_handles_and_files() {
    let data: Vec<f64> = (0..2 * 3 * 4).map(|i| i as f64 * 0.5).collect();
    let mut cube = ptr::null_mut();
    unsafe {
        assert_eq!(bglrf_cube_new(2, 3, 4, data.as_ptr(), &mut cube), BglrfStatus::Ok);
        let (mut h, mut w, mut b) = (0, 0, 0);
        assert_eq!(bglrf_cube_dims(cube, &mut h, &mut w, &mut b), BglrfStatus::Ok);
        assert_eq!((h, w, b), (2, 3, 4));

        let mut back = vec![0.0; 24];
        assert_eq!(bglrf_cube_copy_data(cube, back.as_mut_ptr(), 24), BglrfStatus::Ok);
        assert_eq!(back, data);
        assert_eq!(bglrf_cube_copy_data(cube, back.as_mut_ptr(), 23), BglrfStatus::Validation);
        assert!(last_error().contains("23"));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("c.hxc").to_str().unwrap()).unwrap();
        assert_eq!(bglrf_cube_write(cube, path.as_ptr(), 1), BglrfStatus::Ok);
        let mut read = ptr::null_mut();
        assert_eq!(bglrf_cube_read(path.as_ptr(), &mut read), BglrfStatus::Ok);
        let mut again = vec![0.0; 24];
        assert_eq!(bglrf_cube_copy_data(read, again.as_mut_ptr(), 24), BglrfStatus::Ok);
        assert_eq!(again, data);
        assert_eq!(bglrf_cube_write(cube, path.as_ptr(), 9), BglrfStatus::Io);

        bglrf_cube_free(read);
        bglrf_cube_free(cube);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut cube = ptr::null_mut();
        assert_eq!(bglrf_cube_new(2, 2, 1, ptr::null(), ptr::null_mut()), BglrfStatus::InvalidArgument);
        assert_eq!(bglrf_cube_read(ptr::null(), &mut cube), BglrfStatus::InvalidArgument);
        assert!(cube.is_null());
        let missing = CString::new("/nonexistent/dir/cube.hxc").unwrap();
        assert_eq!(bglrf_cube_read(missing.as_ptr(), &mut cube), BglrfStatus::Io);
        assert!(!last_error().is_empty());
        assert!(cube.is_null());
        let nan = [f64::NAN];
        assert_eq!(bglrf_cube_new(1, 1, 1, nan.as_ptr(), &mut cube), BglrfStatus::Validation);
        assert!(cube.is_null());
        assert_eq!(bglrf_cube_new(1, 1, 1, ptr::null(), &mut cube), BglrfStatus::Ok);
        assert!(last_error().is_empty());
        bglrf_cube_free(cube);
        bglrf_cube_free(ptr::null_mut());
        bglrf_result_free(ptr::null_mut());
        bglrf_string_free(ptr::null_mut());
    }
}

#[test]
fn simulate_fuse_and_score() {
    let sim_cfg = CString::new(
        r#"{"height": 16, "width": 16, "bands": 5, "materials": 3, "msi_bands": 3, "ratio": 2, "shift": [-1, -1], "seed": 3}"#,
    )
    .unwrap();
    let fuse_cfg = CString::new(r#"{"ratio": 2, "kernel_size": 5, "outer_iters": 3}"#).unwrap();
    unsafe {
        let (mut x, mut y, mut z) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(bglrf_simulate(sim_cfg.as_ptr(), &mut x, &mut y, &mut z), BglrfStatus::Ok, "{}", last_error());

        let mut result = ptr::null_mut();
        assert_eq!(
            bglrf_fuse(y, z, fuse_cfg.as_ptr(), ptr::null(), 0, &mut result),
            BglrfStatus::Ok,
            "{}",
            last_error()
        );

        let mut size = 0;
        assert_eq!(bglrf_result_kernel_size(result, &mut size), BglrfStatus::Ok);
        assert_eq!(size, 5);
        let mut k = vec![0.0; 25];
        assert_eq!(bglrf_result_kernel_copy(result, k.as_mut_ptr(), 25), BglrfStatus::Ok);
        assert!(k.iter().all(|&v| v >= 0.0));
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let mut report = ptr::null_mut();
        assert_eq!(bglrf_result_report_json(result, &mut report), BglrfStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert_eq!(report["kernel_size"], 5);
        assert!(!report["objective_trace"].as_array().unwrap().is_empty());

        let mut sri = ptr::null_mut();
        assert_eq!(bglrf_result_sri(result, &mut sri), BglrfStatus::Ok);
        let (mut h, mut w, mut b) = (0, 0, 0);
        assert_eq!(bglrf_cube_dims(sri, &mut h, &mut w, &mut b), BglrfStatus::Ok);
        assert_eq!((h, w, b), (16, 16, 5));

        let mut metrics = ptr::null_mut();
        assert_eq!(bglrf_metrics_json(sri, x, 2, &mut metrics), BglrfStatus::Ok);
        let metrics: serde_json::Value = serde_json::from_str(&take_string(metrics)).unwrap();
        assert!(metrics["sam_degrees"].as_f64().unwrap() >= 0.0);

        // Mismatched shapes are a validation failure, not a crash.
        let mut none = ptr::null_mut();
        assert_eq!(bglrf_metrics_json(y, x, 2, &mut none), BglrfStatus::Validation);
        assert!(none.is_null());

        bglrf_cube_free(sri);
        bglrf_result_free(result);
        for c in [x, y, z] {
            bglrf_cube_free(c);
        }
    }
}

#[test]
fn bad_json_and_nonblind_kernels() {
    unsafe {
        let (mut x, mut y, mut z) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        let bad = CString::new(r#"{"height": "tall"}"#).unwrap();
        assert_eq!(bglrf_simulate(bad.as_ptr(), &mut x, &mut y, &mut z), BglrfStatus::Validation);
        assert!(x.is_null() && y.is_null() && z.is_null());

        let sim_cfg = CString::new(
            r#"{"height": 16, "width": 16, "bands": 4, "materials": 3, "msi_bands": 3, "ratio": 2, "seed": 1}"#,
        )
        .unwrap();
        assert_eq!(bglrf_simulate(sim_cfg.as_ptr(), &mut x, &mut y, &mut z), BglrfStatus::Ok, "{}", last_error());

        let nonblind = CString::new(r#"{"mode": "nonblind", "ratio": 2, "kernel_size": 3, "outer_iters": 2}"#).unwrap();
        let mut result = ptr::null_mut();
        assert_eq!(bglrf_fuse(y, z, nonblind.as_ptr(), ptr::null(), 0, &mut result), BglrfStatus::Validation);
        assert!(result.is_null());

        let mut delta = [0.0; 9];
        delta[4] = 1.0;
        assert_eq!(
            bglrf_fuse(y, z, nonblind.as_ptr(), delta.as_ptr(), 3, &mut result),
            BglrfStatus::Ok,
            "{}",
            last_error()
        );
        let mut k = [0.0; 9];
        assert_eq!(bglrf_result_kernel_copy(result, k.as_mut_ptr(), 9), BglrfStatus::Ok);
        assert_eq!(k, delta);
        bglrf_result_free(result);
        for c in [x, y, z] {
            bglrf_cube_free(c);
        }
    }
}
