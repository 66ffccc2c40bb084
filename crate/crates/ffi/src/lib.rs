//! C ABI over the `bglrf` library.
//!
//! Every fallible function returns a [`BglrfStatus`]; on failure a message is
//! available from [`bglrf_last_error`] on the same thread. Handles are opaque
//! and owned by the caller, who releases them with the matching `*_free`
//! function. Strings returned through out-parameters are freed with
//! [`bglrf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bglrf::cli::RunReport;
use bglrf::io::{read_cube, write_cube, Dtype};
use bglrf::metrics::MetricReport;
use bglrf::simulate::SimulationConfig;
use bglrf::{fuse, Cube, Error, ErrorKind, FusionConfig, FusionResult, Kernel};

/// Result codes; the non-zero values match the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BglrfStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or malformed JSON argument.
    InvalidArgument = 1,
    Validation = 2,
    Io = 3,
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// An H x W x B cube of `double` samples, band-major.
pub struct BglrfCube {
    inner: Cube,
}

/// Output of one fusion run.
pub struct BglrfFusionResult {
    config: FusionConfig,
    result: FusionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

struct Failure(BglrfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Validation => BglrfStatus::Validation,
            ErrorKind::Io => BglrfStatus::Io,
            ErrorKind::Numerical => BglrfStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(BglrfStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BglrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BglrfStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            BglrfStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn out_slot<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(BglrfStatus::Internal, "string contains NUL".into()))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(json: *const c_char) -> Result<T, Failure> {
    if json.is_null() {
        return Ok(T::default());
    }
    let s = unsafe { text(json, "config") }?;
    serde_json::from_str(s).map_err(|e| Failure(BglrfStatus::Validation, format!("config: {e}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bglrf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn bglrf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn bglrf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a cube from `height * width * bands` band-major samples, or zeros
/// when `data` is null.
///
/// # Safety
/// `data`, when non-null, must point to that many readable doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_new(
    height: usize,
    width: usize,
    bands: usize,
    data: *const f64,
    out: *mut *mut BglrfCube,
) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let len = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(bands))
            .ok_or_else(|| Failure(BglrfStatus::Validation, "cube dimensions overflow".into()))?;
        let samples = if data.is_null() {
            vec![0.0; len]
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let cube = Cube::new(height, width, bands, samples)?;
        *slot = Box::into_raw(Box::new(BglrfCube { inner: cube }));
        Ok(())
    })
}

/// Releases a cube. Null is ignored.
///
/// # Safety
/// `cube` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_free(cube: *mut BglrfCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Reads an HXC1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_read(path: *const c_char, out: *mut *mut BglrfCube) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let cube = read_cube(text(path, "path")?)?;
        *slot = Box::into_raw(Box::new(BglrfCube { inner: cube }));
        Ok(())
    })
}

/// Writes an HXC1 file; `dtype` is 0 for float32 and 1 for float64.
///
/// # Safety
/// `cube` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_write(cube: *const BglrfCube, path: *const c_char, dtype: u8) -> BglrfStatus {
    guard(|| {
        let cube = borrow(cube, "cube")?;
        let dtype = Dtype::from_code(dtype)?;
        write_cube(&cube.inner, text(path, "path")?, dtype)?;
        Ok(())
    })
}

/// Reports the cube's height, width and band count.
///
/// # Safety
/// `cube` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_dims(
    cube: *const BglrfCube,
    height: *mut usize,
    width: *mut usize,
    bands: *mut usize,
) -> BglrfStatus {
    guard(|| {
        let cube = borrow(cube, "cube")?;
        let (h, w, b) = cube.inner.dims();
        *out_slot(height, "height")? = h;
        *out_slot(width, "width")? = w;
        *out_slot(bands, "bands")? = b;
        Ok(())
    })
}

/// Copies the band-major samples into `buffer`, whose length must be exactly
/// `height * width * bands`.
///
/// # Safety
/// `cube` must be a live handle and `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bglrf_cube_copy_data(cube: *const BglrfCube, buffer: *mut f64, len: usize) -> BglrfStatus {
    guard(|| {
        let cube = borrow(cube, "cube")?;
        if buffer.is_null() {
            return Err(invalid("buffer is null"));
        }
        let data = cube.inner.data();
        if len != data.len() {
            return Err(Failure(
                BglrfStatus::Validation,
                format!("buffer holds {len} values, cube has {}", data.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(data);
        Ok(())
    })
}

/// Runs the phantom simulator. `config_json` may be null for defaults.
///
/// # Safety
/// `config_json`, when non-null, must be NUL-terminated; the out-pointers must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_simulate(
    config_json: *const c_char,
    truth: *mut *mut BglrfCube,
    hsi: *mut *mut BglrfCube,
    msi: *mut *mut BglrfCube,
) -> BglrfStatus {
    guard(|| {
        let (t, h, m) = (out_slot(truth, "truth")?, out_slot(hsi, "hsi")?, out_slot(msi, "msi")?);
        *t = ptr::null_mut();
        *h = ptr::null_mut();
        *m = ptr::null_mut();
        let cfg: SimulationConfig = parse_json(config_json)?;
        let sim = cfg.run()?;
        *t = Box::into_raw(Box::new(BglrfCube { inner: sim.truth }));
        *h = Box::into_raw(Box::new(BglrfCube { inner: sim.hsi }));
        *m = Box::into_raw(Box::new(BglrfCube { inner: sim.msi }));
        Ok(())
    })
}

/// Fuses `hsi` with `msi`. `config_json` (nullable) uses the library's JSON
/// config schema. A known kernel of `kernel_size x kernel_size` row-major
/// weights is passed for the non-blind mode; use null and 0 otherwise.
///
/// # Safety
/// Handles must be live; `kernel`, when non-null, must hold
/// `kernel_size * kernel_size` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_fuse(
    hsi: *const BglrfCube,
    msi: *const BglrfCube,
    config_json: *const c_char,
    kernel: *const f64,
    kernel_size: usize,
    out: *mut *mut BglrfFusionResult,
) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let (y, z) = (borrow(hsi, "hsi")?, borrow(msi, "msi")?);
        let config: FusionConfig = parse_json(config_json)?;
        let known = if kernel.is_null() {
            None
        } else {
            let n = kernel_size * kernel_size;
            Some(Kernel::new(kernel_size, std::slice::from_raw_parts(kernel, n).to_vec())?)
        };
        let result = fuse(&y.inner, &z.inner, &config, known.as_ref())?;
        *slot = Box::into_raw(Box::new(BglrfFusionResult { config, result }));
        Ok(())
    })
}

/// Releases a fusion result. Null is ignored.
///
/// # Safety
/// `result` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn bglrf_result_free(result: *mut BglrfFusionResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Copies the super-resolved cube into a new handle.
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_result_sri(result: *const BglrfFusionResult, out: *mut *mut BglrfCube) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        let r = borrow(result, "result")?;
        *slot = Box::into_raw(Box::new(BglrfCube {
            inner: r.result.sri.clone(),
        }));
        Ok(())
    })
}

/// Side length of the estimated kernel.
///
/// # Safety
/// `result` must be a live handle; `size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_result_kernel_size(result: *const BglrfFusionResult, size: *mut usize) -> BglrfStatus {
    guard(|| {
        *out_slot(size, "size")? = borrow(result, "result")?.result.kernel.size();
        Ok(())
    })
}

/// Copies the row-major kernel weights; `len` must equal `size * size`.
///
/// # Safety
/// `result` must be a live handle and `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bglrf_result_kernel_copy(
    result: *const BglrfFusionResult,
    buffer: *mut f64,
    len: usize,
) -> BglrfStatus {
    guard(|| {
        let w = borrow(result, "result")?.result.kernel.weights();
        if buffer.is_null() {
            return Err(invalid("buffer is null"));
        }
        if len != w.len() {
            return Err(Failure(
                BglrfStatus::Validation,
                format!("buffer holds {len} values, kernel has {}", w.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(w);
        Ok(())
    })
}

/// Run report (config echo, objective trace, iteration counts, timings) as
/// JSON. Free with [`bglrf_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_result_report_json(
    result: *const BglrfFusionResult,
    out: *mut *mut c_char,
) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let r = borrow(result, "result")?;
        let json = serde_json::to_string(&RunReport::new(&r.config, &r.result))
            .map_err(|e| Failure(BglrfStatus::Internal, e.to_string()))?;
        *slot = to_c_string(json)?;
        Ok(())
    })
}

/// Quality metrics of `estimate` against `truth` as JSON. Free with
/// [`bglrf_string_free`].
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bglrf_metrics_json(
    estimate: *const BglrfCube,
    truth: *const BglrfCube,
    ratio: usize,
    out: *mut *mut c_char,
) -> BglrfStatus {
    guard(|| {
        let slot = out_slot(out, "out")?;
        *slot = ptr::null_mut();
        let report = MetricReport::compute(&borrow(estimate, "estimate")?.inner, &borrow(truth, "truth")?.inner, ratio)?;
        let json = serde_json::to_string(&report).map_err(|e| Failure(BglrfStatus::Internal, e.to_string()))?;
        *slot = to_c_string(json)?;
        Ok(())
    })
}
