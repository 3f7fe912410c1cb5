//! C ABI over `csc-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`, `*_load`
//! or an operation's out-parameter and released with the matching `*_free`.
//! Every fallible call returns a [`CscStatus`]; on failure the message is
//! kept per thread and read with [`csc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use csc_core::cli::formats::{read_dictionary, read_image, write_image, ImageFormat};
use csc_core::error::CscError;
use csc_core::pipeline::{self, DenoiseParams, Method, DEFAULT_LAMBDA_L};
use csc_core::solvers::SolverConfig;
use csc_core::spectral::{Dictionary, Image};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CscMethod {
    Bpdn = 0,
    Cbpdn = 1,
    Grd = 2,
    Stv = 3,
    Vtv = 4,
    Rtv = 5,
}

impl From<CscMethod> for Method {
    fn from(m: CscMethod) -> Self {
        match m {
            CscMethod::Bpdn => Method::Bpdn,
            CscMethod::Cbpdn => Method::Cbpdn,
            CscMethod::Grd => Method::Grd,
            CscMethod::Stv => Method::Stv,
            CscMethod::Vtv => Method::Vtv,
            CscMethod::Rtv => Method::Rtv,
        }
    }
}

/// Denoising parameters. `rho <= 0` selects the default penalty.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CscParams {
    pub method: CscMethod,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub max_iter: u32,
    pub tol: f64,
    pub lambda_l: f64,
    pub stride: u32,
}

/// Opaque single-channel image.
pub struct CscImage(Image);

/// Opaque filter dictionary.
pub struct CscDictionary(Dictionary);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &CscError) -> CscStatus {
    match e {
        CscError::Io { .. } => CscStatus::Io,
        CscError::Format { .. } => CscStatus::Format,
        CscError::BadLength { .. }
        | CscError::FilterTooLarge { .. }
        | CscError::ShapeMismatch(_)
        | CscError::DimensionMismatch(_)
        | CscError::PatchTooLarge { .. }
        | CscError::CoverageZero { .. } => CscStatus::ShapeMismatch,
        CscError::NonSymmetricSpectrum { .. } | CscError::NonpositiveDiagonal { .. } => CscStatus::Numerical,
        CscError::NonFinite(_)
        | CscError::NegativeThreshold(_)
        | CscError::ConfigInvalid(_)
        | CscError::NonpositiveParameter { .. } => CscStatus::InvalidArgument,
    }
}

struct Fail(CscStatus, String);

impl From<CscError> for Fail {
    fn from(e: CscError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CscStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records its error and turns panics into `CscStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CscStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CscStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CscStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL when the last
/// call succeeded. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn csc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a `height × width` image from `height * width` row-major values,
/// or a zero image when `data` is NULL.
///
/// # Safety
/// `data` is NULL or points to `height * width` readable doubles; `out` is
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_image_new(height: usize, width: usize, data: *const f64, out: *mut *mut CscImage) -> CscStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Fail(CscStatus::InvalidArgument, "image size overflows".into()))?;
        if n == 0 {
            return Err(Fail(CscStatus::InvalidArgument, "image must be non-empty".into()));
        }
        let values = if data.is_null() {
            vec![0.0; n]
        } else {
            std::slice::from_raw_parts(data, n).to_vec()
        };
        put(out, CscImage(Image::new(height, width, values)?))
    })
}

/// # Safety
/// `image` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csc_image_free(image: *mut CscImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// # Safety
/// `image` is a live handle; `height` and `width` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn csc_image_dims(image: *const CscImage, height: *mut usize, width: *mut usize) -> CscStatus {
    guard(|| {
        let img = deref(image, "image")?;
        if height.is_null() || width.is_null() {
            return Err(null("dims output"));
        }
        (*height, *width) = img.0.dims();
        Ok(())
    })
}

/// Copies the row-major pixels into `buffer`, which holds `len` doubles;
/// `len` must equal `height * width`.
///
/// # Safety
/// `image` is a live handle; `buffer` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn csc_image_copy_data(image: *const CscImage, buffer: *mut f64, len: usize) -> CscStatus {
    guard(|| {
        let img = deref(image, "image")?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        if len != img.0.len() {
            return Err(Fail(
                CscStatus::ShapeMismatch,
                format!("buffer holds {len} values, image has {}", img.0.len()),
            ));
        }
        ptr::copy_nonoverlapping(img.0.data().as_ptr(), buffer, len);
        Ok(())
    })
}

/// Reads a PGM or tensor image.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_image_read(path: *const c_char, out: *mut *mut CscImage) -> CscStatus {
    guard(|| {
        let (img, _) = read_image(&path_arg(path)?)?;
        put(out, CscImage(img))
    })
}

/// Writes a tensor file when `path` ends in `.csct`, 8-bit PGM otherwise.
///
/// # Safety
/// `image` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csc_image_write(image: *const CscImage, path: *const c_char) -> CscStatus {
    guard(|| {
        let img = deref(image, "image")?;
        let path = path_arg(path)?;
        write_image(&path, &img.0, ImageFormat::from_extension(&path))?;
        Ok(())
    })
}

/// Loads a dictionary tensor with dims M × P × P.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_dictionary_load(path: *const c_char, out: *mut *mut CscDictionary) -> CscStatus {
    guard(|| put(out, CscDictionary(read_dictionary(&path_arg(path)?)?)))
}

/// The seeded random fallback dictionary of zero-mean unit-norm filters.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_dictionary_fallback(
    num_filters: usize,
    size: usize,
    seed: u64,
    out: *mut *mut CscDictionary,
) -> CscStatus {
    guard(|| put(out, CscDictionary(pipeline::fallback_dictionary(num_filters, size, seed)?)))
}

/// # Safety
/// `dict` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csc_dictionary_free(dict: *mut CscDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// # Safety
/// `dict` is a live handle; `num_filters` and `filter_size` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn csc_dictionary_dims(
    dict: *const CscDictionary,
    num_filters: *mut usize,
    filter_size: *mut usize,
) -> CscStatus {
    guard(|| {
        let d = deref(dict, "dictionary")?;
        if num_filters.is_null() || filter_size.is_null() {
            return Err(null("dims output"));
        }
        *num_filters = d.0.num_filters();
        *filter_size = d.0.filter_dims().0;
        Ok(())
    })
}

/// Adds seeded Gaussian noise of standard deviation `sigma`.
///
/// # Safety
/// `image` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_add_noise(image: *const CscImage, sigma: f64, seed: u64, out: *mut *mut CscImage) -> CscStatus {
    guard(|| {
        let img = deref(image, "image")?;
        put(out, CscImage(pipeline::add_noise(&img.0, sigma, seed)?))
    })
}

/// PSNR in dB for peak 1; infinite for identical images.
///
/// # Safety
/// Both images are live handles; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csc_psnr(reference: *const CscImage, image: *const CscImage, out: *mut f64) -> CscStatus {
    guard(|| {
        let (r, i) = (deref(reference, "reference")?, deref(image, "image")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pipeline::psnr(&r.0, &i.0)?;
        Ok(())
    })
}

/// Default parameters for `method`.
#[no_mangle]
pub extern "C" fn csc_params_default(method: CscMethod) -> CscParams {
    let d = DenoiseParams::default();
    CscParams {
        method,
        lambda: d.lambda,
        mu: if method == CscMethod::Bpdn || method == CscMethod::Cbpdn { 0.0 } else { 0.02 },
        rho: 0.0,
        max_iter: d.max_iter as u32,
        tol: d.tol,
        lambda_l: DEFAULT_LAMBDA_L,
        stride: d.stride as u32,
    }
}

/// Tikhonov split, sparse coding of the highpass and recombination.
///
/// # Safety
/// `image` and `dict` are live handles; `params` and `out` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn csc_denoise(
    image: *const CscImage,
    dict: *const CscDictionary,
    params: *const CscParams,
    out: *mut *mut CscImage,
) -> CscStatus {
    guard(|| {
        let (img, d, p) = (deref(image, "image")?, deref(dict, "dictionary")?, *deref(params, "params")?);
        let method = Method::from(p.method);
        if !method.uses_mu() && p.mu != 0.0 {
            return Err(Fail(CscStatus::InvalidArgument, format!("mu not applicable to method {method}")));
        }
        let dp = DenoiseParams {
            lambda: p.lambda,
            mu: p.mu,
            rho: (p.rho > 0.0).then_some(p.rho),
            max_iter: p.max_iter as usize,
            tol: p.tol,
            lambda_l: p.lambda_l,
            stride: p.stride as usize,
        };
        SolverConfig::validate(&dp.solver_config())?;
        if dp.stride == 0 {
            return Err(Fail(CscStatus::InvalidArgument, "stride must be at least 1".into()));
        }
        put(out, CscImage(pipeline::denoise(&img.0, method, &d.0, &dp)?))
    })
}
