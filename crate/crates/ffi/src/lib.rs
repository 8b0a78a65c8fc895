//! C ABI over the `lpsquare` toolkit.
//!
//! Objects cross the boundary as opaque handles created by `lp_*_new`-style
//! constructors and released by the matching `lp_*_free`. Every fallible call
//! returns an [`LpStatus`]; on failure `lp_last_error` describes the problem
//! for the calling thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lpsquare::czd::jn_blo_verify;
use lpsquare::error::Error;
use lpsquare::family::CubeFamily;
use lpsquare::grid::{DyadicCell, GridFunction, GridSpec};
use lpsquare::kernels::{CertifyOptions, Kernel};
use lpsquare::operators::{OpKind, ScaleFields, ScaleGrid};
use lpsquare::oscillation::{blo_constant, bmo_norm};
use lpsquare::weights::{a1_constant, Weight};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownName = 3,
    Uncertified = 4,
    LengthMismatch = 5,
    Internal = 6,
}

/// Grid geometry: dimension, box side and samples per axis.
pub struct LpGrid(GridSpec);

/// A positive weight sampled on a grid.
pub struct LpWeight(Weight);

/// A finite family of cubes over which constants are maximised.
pub struct LpFamily(CubeFamily);

/// A kernel, optionally carrying its certification.
pub struct LpKernel(Kernel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

struct Failure(LpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Unknown { .. } => LpStatus::UnknownName,
            Error::Uncertified(_) => LpStatus::Uncertified,
            Error::RegionMismatch => LpStatus::LengthMismatch,
            Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::UnsupportedDimension(_)
            | Error::EmptyRegion => LpStatus::InvalidArgument,
            _ => LpStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LpStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn grid_function(grid: &LpGrid, values: *const f64, len: usize) -> Result<GridFunction, Failure> {
    if len != grid.0.len() {
        return Err(Failure(
            LpStatus::LengthMismatch,
            format!("expected {} samples, got {len}", grid.0.len()),
        ));
    }
    Ok(GridFunction::new(grid.0, slice(values, len, "values")?.to_vec())?)
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn lp_grid_new(dim: usize, side: f64, res: usize, out: *mut *mut LpGrid) -> LpStatus {
    guard(|| {
        let spec = GridSpec::new(dim, side, res)?;
        write_out(out, boxed(LpGrid(spec)), "out")
    })
}

/// Total number of samples, `N^n`; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lp_grid_len(grid: *const LpGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn lp_grid_free(grid: *mut LpGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// A weight from `len = N^n` positive samples in row-major order.
#[no_mangle]
pub unsafe extern "C" fn lp_weight_new(
    grid: *const LpGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut LpWeight,
) -> LpStatus {
    guard(|| {
        let grid = as_ref(grid, "grid")?;
        let f = grid_function(grid, values, len)?;
        if f.values().iter().any(|v| !(*v > 0.0)) {
            return Err(Failure(LpStatus::InvalidArgument, "weights must be positive".into()));
        }
        write_out(out, boxed(LpWeight(Weight::new(f))), "out")
    })
}

/// `max(|x - c|, h)^{-alpha}` with `c = (cx, cy)`.
#[no_mangle]
pub unsafe extern "C" fn lp_weight_power(
    grid: *const LpGrid,
    cx: f64,
    cy: f64,
    alpha: f64,
    out: *mut *mut LpWeight,
) -> LpStatus {
    guard(|| {
        let grid = as_ref(grid, "grid")?;
        let w = Weight::power_regularized(grid.0, [cx, cy], alpha)?;
        write_out(out, boxed(LpWeight(w)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_weight_free(weight: *mut LpWeight) {
    if !weight.is_null() {
        drop(Box::from_raw(weight));
    }
}

/// Every dyadic cube of levels `0..=max_level`.
#[no_mangle]
pub unsafe extern "C" fn lp_family_dyadic(grid: *const LpGrid, max_level: u32, out: *mut *mut LpFamily) -> LpStatus {
    guard(|| {
        let grid = as_ref(grid, "grid")?;
        let fam = CubeFamily::dyadic(grid.0, max_level)?;
        write_out(out, boxed(LpFamily(fam)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_family_len(family: *const LpFamily) -> usize {
    family.as_ref().map_or(0, |f| f.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn lp_family_free(family: *mut LpFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Looks up a registered kernel such as `"poisson-derivative"`.
#[no_mangle]
pub unsafe extern "C" fn lp_kernel_by_name(name: *const c_char, dim: usize, out: *mut *mut LpKernel) -> LpStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(LpStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let k = Kernel::by_name(name, dim)?;
        write_out(out, boxed(LpKernel(k)), "out")
    })
}

/// Certifies the kernel in place. `passed` receives 1 or 0 and `residual`
/// the vanishing-mean residual; either may be null.
#[no_mangle]
pub unsafe extern "C" fn lp_kernel_certify(
    kernel: *mut LpKernel,
    probe_budget: usize,
    passed: *mut c_int,
    residual: *mut f64,
) -> LpStatus {
    guard(|| {
        let k = kernel.as_mut().ok_or_else(|| null("kernel"))?;
        let opts = CertifyOptions {
            probe_budget,
            ..CertifyOptions::default()
        };
        let certified = k.0.clone().certified(&opts)?;
        let cert = certified.certification().cloned().expect("certified kernels carry a report");
        k.0 = certified;
        if !passed.is_null() {
            passed.write(c_int::from(cert.passed));
        }
        if !residual.is_null() {
            residual.write(cert.residual);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_kernel_free(kernel: *mut LpKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lp_a1_constant(weight: *const LpWeight, family: *const LpFamily, out: *mut f64) -> LpStatus {
    guard(|| {
        let w = as_ref(weight, "weight")?;
        let fam = as_ref(family, "family")?;
        write_out(out, a1_constant(&w.0, &fam.0)?, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_bmo_norm(
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    weight: *const LpWeight,
    family: *const LpFamily,
    out: *mut f64,
) -> LpStatus {
    guard(|| {
        let f = grid_function(as_ref(grid, "grid")?, f, len)?;
        let v = bmo_norm(&f, &as_ref(weight, "weight")?.0, &as_ref(family, "family")?.0)?.value;
        write_out(out, v, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_blo_constant(
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    weight: *const LpWeight,
    family: *const LpFamily,
    out: *mut f64,
) -> LpStatus {
    guard(|| {
        let f = grid_function(as_ref(grid, "grid")?, f, len)?;
        let v = blo_constant(&f, &as_ref(weight, "weight")?.0, &as_ref(family, "family")?.0)?.value;
        write_out(out, v, "out")
    })
}

#[allow(clippy::too_many_arguments)]
unsafe fn square_function(
    op: OpKind,
    kernel: *const LpKernel,
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    t_min: f64,
    t_max: f64,
    scales: usize,
    out: *mut f64,
) -> LpStatus {
    guard(|| {
        let k = as_ref(kernel, "kernel")?;
        let grid = as_ref(grid, "grid")?;
        let f = grid_function(grid, f, len)?;
        let lo = if t_min > 0.0 { t_min } else { 2.0 * grid.0.spacing() };
        let hi = if t_max > 0.0 { t_max } else { grid.0.side() / 4.0 };
        let sg = ScaleGrid::log(lo, hi, scales)?;
        let result = ScaleFields::compute(&k.0, &f, &sg)?.evaluate(op)?;
        slice_mut(out, len, "out")?.copy_from_slice(result.values.values());
        Ok(())
    })
}

/// Writes `𝒢f` at every sample into `out` (length `len`). Non-positive
/// `t_min`/`t_max` select `2h` and `L/4`. The kernel must be certified.
#[no_mangle]
pub unsafe extern "C" fn lp_g_function(
    kernel: *const LpKernel,
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    t_min: f64,
    t_max: f64,
    scales: usize,
    out: *mut f64,
) -> LpStatus {
    square_function(OpKind::G, kernel, grid, f, len, t_min, t_max, scales, out)
}

/// The area integral `𝒮f`, with the conventions of [`lp_g_function`].
#[no_mangle]
pub unsafe extern "C" fn lp_area_integral(
    kernel: *const LpKernel,
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    t_min: f64,
    t_max: f64,
    scales: usize,
    out: *mut f64,
) -> LpStatus {
    square_function(OpKind::S, kernel, grid, f, len, t_min, t_max, scales, out)
}

/// `𝒢*_λ f`, with the conventions of [`lp_g_function`].
#[no_mangle]
pub unsafe extern "C" fn lp_g_star(
    kernel: *const LpKernel,
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    lambda: f64,
    t_min: f64,
    t_max: f64,
    scales: usize,
    out: *mut f64,
) -> LpStatus {
    square_function(OpKind::GStar { lambda }, kernel, grid, f, len, t_min, t_max, scales, out)
}

/// Checks the BLO tail bound on the dyadic root cube `(level, pos0, pos1)`.
/// `measured` and `bound` receive one value per threshold; `passed`
/// receives 1 when every measured tail lies under its bound.
#[no_mangle]
pub unsafe extern "C" fn lp_jn_blo_verify(
    grid: *const LpGrid,
    f: *const f64,
    len: usize,
    weight: *const LpWeight,
    root_level: u32,
    root_pos0: usize,
    root_pos1: usize,
    lambdas: *const f64,
    n_lambdas: usize,
    measured: *mut f64,
    bound: *mut f64,
    passed: *mut c_int,
) -> LpStatus {
    guard(|| {
        let grid = as_ref(grid, "grid")?;
        let f = grid_function(grid, f, len)?;
        let w = as_ref(weight, "weight")?;
        let per_axis = 1usize << root_level.min(63);
        let pos1 = if grid.0.dim() == 1 { 0 } else { root_pos1 };
        if root_pos0 >= per_axis || pos1 >= per_axis {
            return Err(Failure(LpStatus::InvalidArgument, "root position outside its level".into()));
        }
        let root = DyadicCell {
            level: root_level,
            pos: [root_pos0, pos1],
        };
        let lams = slice(lambdas, n_lambdas, "lambdas")?;
        let report = jn_blo_verify(&f, &w.0, root, lams)?;
        let m = slice_mut(measured, n_lambdas, "measured")?;
        for (dst, r) in m.iter_mut().zip(&report.rows) {
            *dst = r.measured;
        }
        let b = slice_mut(bound, n_lambdas, "bound")?;
        for (dst, r) in b.iter_mut().zip(&report.rows) {
            *dst = r.bound;
        }
        write_out(passed, c_int::from(report.passed()), "passed")
    })
}
