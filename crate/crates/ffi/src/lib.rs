//! C ABI over the core library.
//!
//! Every fallible function returns a status code (`KQA_OK` on success) and
//! records a message retrievable with [`kqa_last_error`] on the calling
//! thread. Handles are opaque and must be released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Mutex;

use kspace_qa::artifacts::{
    apply_severity, sample_severity, ArtifactClass, ArtifactParams, CineSequence, SeverityRanges, SeverityRecord,
    NUM_CLASSES,
};
use kspace_qa::models::{preprocess, Model};
use kspace_qa::numerics::{dft2, Complex64, ComplexGrid2D, RealGrid2D};
use kspace_qa::Error;

pub const KQA_OK: i32 = 0;
/// A required pointer argument was null.
pub const KQA_ERR_NULL: i32 = 1;
/// Invalid argument, shape mismatch or inconsistent parameters.
pub const KQA_ERR_INVALID: i32 = 2;
pub const KQA_ERR_IO: i32 = 3;
/// Malformed file or checkpoint.
pub const KQA_ERR_FORMAT: i32 = 4;
/// Output buffer length does not match.
pub const KQA_ERR_BUFFER: i32 = 5;
/// Internal panic caught at the boundary.
pub const KQA_ERR_PANIC: i32 = 6;

/// Number of artifact classes; probability buffers hold this many values.
pub const KQA_NUM_CLASSES: usize = 5;
const _: () = assert!(KQA_NUM_CLASSES == NUM_CLASSES);

/// Real 2D image.
pub struct KqaGrid(RealGrid2D);

/// Trained classifier loaded from a checkpoint.
pub struct KqaModel(Mutex<Model>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Io(_) => KQA_ERR_IO,
        Error::Format { .. } | Error::Checkpoint(_) | Error::Manifest { .. } => KQA_ERR_FORMAT,
        _ => KQA_ERR_INVALID,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            KQA_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            KQA_ERR_PANIC
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(KQA_ERR_NULL, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn grid_ref<'a>(g: *const KqaGrid) -> Result<&'a RealGrid2D, Fail> {
    non_null(g, "grid")?;
    Ok(&(*g).0)
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(s, what)?;
    CStr::from_ptr(s).to_str().map_err(|_| Fail(KQA_ERR_INVALID, format!("{what} is not UTF-8")))
}

unsafe fn put_grid(out: *mut *mut KqaGrid, g: RealGrid2D) {
    *out = Box::into_raw(Box::new(KqaGrid(g)));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn kqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated name of a class id, or null when out of range.
#[no_mangle]
pub extern "C" fn kqa_class_name(class_id: u8) -> *const c_char {
    const NAMES: [&CStr; NUM_CLASSES] = [c"clean", c"respiratory", c"cardiac", c"gibbs", c"aliasing"];
    NAMES.get(class_id as usize).map_or(ptr::null(), |n| n.as_ptr())
}

/// Copies `height * width` row-major values into a new grid.
///
/// # Safety
/// `data` must point to `height * width` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kqa_grid_new(height: usize, width: usize, data: *const f64, out: *mut *mut KqaGrid) -> i32 {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let n = height.checked_mul(width).ok_or_else(|| Fail(KQA_ERR_INVALID, "grid size overflows".into()))?;
        let g = RealGrid2D::new(height, width, std::slice::from_raw_parts(data, n).to_vec())?;
        g.ensure_finite()?;
        put_grid(out, g);
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kqa_grid_dims(grid: *const KqaGrid, height: *mut usize, width: *mut usize) -> i32 {
    guard(|| {
        let g = grid_ref(grid)?;
        non_null(height, "height")?;
        non_null(width, "width")?;
        *height = g.height();
        *width = g.width();
        Ok(())
    })
}

/// Copies the grid values (row-major) into `out`, which holds `len` doubles.
///
/// # Safety
/// `grid` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kqa_grid_read(grid: *const KqaGrid, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let g = grid_ref(grid)?;
        non_null(out, "out")?;
        if len != g.len() {
            return Err(Fail(KQA_ERR_BUFFER, format!("buffer holds {len} values, grid has {}", g.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(g.data());
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kqa_grid_free(grid: *mut KqaGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Unnormalized forward 2D DFT into separate real and imaginary buffers.
///
/// # Safety
/// `grid` must be a live handle; `re` and `im` must each hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kqa_dft2(grid: *const KqaGrid, re: *mut f64, im: *mut f64, len: usize) -> i32 {
    guard(|| {
        let g = grid_ref(grid)?;
        non_null(re, "re")?;
        non_null(im, "im")?;
        if len != g.len() {
            return Err(Fail(KQA_ERR_BUFFER, format!("buffers hold {len} values, grid has {}", g.len())));
        }
        let k = dft2(g)?;
        let (re, im) = (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len));
        for (i, z) in k.data().iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

fn corrupt_single(g: &RealGrid2D, record: &SeverityRecord) -> Result<RealGrid2D, Fail> {
    record.validate()?;
    if record.class_id == ArtifactClass::Cardiac {
        return Err(Fail(KQA_ERR_INVALID, "cardiac corruption needs a cine sequence".into()));
    }
    Ok(apply_severity(&CineSequence::single(g.clone()), 0, record)?)
}

/// Corrupts `grid` with severity drawn from `seed` for the given class
/// (0 clean, 1 respiratory, 3 gibbs, 4 aliasing; cardiac needs a sequence
/// and is rejected).
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kqa_corrupt(grid: *const KqaGrid, class_id: u8, seed: u64, out: *mut *mut KqaGrid) -> i32 {
    guard(|| {
        let g = grid_ref(grid)?;
        non_null(out, "out")?;
        let class = ArtifactClass::from_id(class_id)?;
        let record = sample_severity(class, seed, &SeverityRanges::for_dims(g.height(), g.width()));
        put_grid(out, corrupt_single(g, &record)?);
        Ok(())
    })
}

/// Corrupts `grid` with explicit parameters given as JSON, for example
/// `{"kind":"aliasing","factor":2,"axis":"rows"}`.
///
/// # Safety
/// `grid` must be a live handle, `params_json` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kqa_corrupt_with_params(
    grid: *const KqaGrid,
    params_json: *const c_char,
    out: *mut *mut KqaGrid,
) -> i32 {
    guard(|| {
        let g = grid_ref(grid)?;
        non_null(out, "out")?;
        let params: ArtifactParams = serde_json::from_str(str_arg(params_json, "params_json")?)
            .map_err(|e| Fail(KQA_ERR_INVALID, format!("params: {e}")))?;
        let record = SeverityRecord { class_id: params.class(), params: Some(params), rng_seed: 0 };
        put_grid(out, corrupt_single(g, &record)?);
        Ok(())
    })
}

/// Loads a checkpoint written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kqa_model_load(path: *const c_char, out: *mut *mut KqaModel) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let m = Model::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(KqaModel(Mutex::new(m))));
        Ok(())
    })
}

unsafe fn write_probs(m: &mut Model, inputs: &kspace_qa::models::Inputs, probs: *mut f64) -> Result<(), Fail> {
    let p = m.predict_proba(inputs)?[0];
    std::slice::from_raw_parts_mut(probs, NUM_CLASSES).copy_from_slice(&p);
    Ok(())
}

fn lock(model: &KqaModel) -> std::sync::MutexGuard<'_, Model> {
    model.0.lock().unwrap_or_else(|p| p.into_inner())
}

/// Class probabilities of an image (resized and normalized as in training).
///
/// # Safety
/// `model` and `grid` must be live handles; `probs` must hold `KQA_NUM_CLASSES` doubles.
#[no_mangle]
pub unsafe extern "C" fn kqa_model_predict(model: *const KqaModel, grid: *const KqaGrid, probs: *mut f64) -> i32 {
    guard(|| {
        non_null(model, "model")?;
        let g = grid_ref(grid)?;
        non_null(probs, "probs")?;
        let mut m = lock(&*model);
        let img = preprocess(g, m.config.input())?;
        let inputs = m.ingest_images(&[img])?;
        write_probs(&mut m, &inputs, probs)
    })
}

/// Class probabilities of raw k-space (frequency models only); `re` and
/// `im` hold `height * width` row-major values.
///
/// # Safety
/// `model` must be a live handle, `re`/`im` readable for `height * width`
/// doubles and `probs` writable for `KQA_NUM_CLASSES` doubles.
#[no_mangle]
pub unsafe extern "C" fn kqa_model_predict_kspace(
    model: *const KqaModel,
    height: usize,
    width: usize,
    re: *const f64,
    im: *const f64,
    probs: *mut f64,
) -> i32 {
    guard(|| {
        non_null(model, "model")?;
        non_null(re, "re")?;
        non_null(im, "im")?;
        non_null(probs, "probs")?;
        let n = height.checked_mul(width).ok_or_else(|| Fail(KQA_ERR_INVALID, "grid size overflows".into()))?;
        let (re, im) = (std::slice::from_raw_parts(re, n), std::slice::from_raw_parts(im, n));
        let k = ComplexGrid2D::new(height, width, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())?;
        let mut m = lock(&*model);
        let inputs = m.ingest_kspace(&[k])?;
        write_probs(&mut m, &inputs, probs)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kqa_model_free(model: *mut KqaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
