//! C ABI over the spherepose library.
//!
//! Objects cross the boundary as opaque handles created by `sp_*_new` or
//! `sp_*_load` and released by the matching `sp_*_free`. Every fallible
//! function returns an [`SpStatus`]; the message of the most recent failure
//! on the calling thread is available from [`sp_last_error`].
//! Rotations are passed as `[w, x, y, z]` unit quaternions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use spherepose::evalviz;
use spherepose::grids::{healpix_so3, SO3Grid};
use spherepose::harmonics::wigner_D;
use spherepose::rotation::geodesic_distance;
use spherepose::symsol::{generate, Dataset, RenderConfig, Shape, Split};
use spherepose::trainer::{load_checkpoint, Model};
use spherepose::{Error, Rotation};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or configuration failed validation.
    InvalidArgument = 2,
    /// Reading or writing a file failed.
    Io = 3,
    /// A file had the wrong magic, version or layout.
    Format = 4,
    /// The output buffer is too small; the required length was stored.
    BufferTooSmall = 5,
    /// Any other runtime failure.
    Runtime = 6,
    /// The library panicked; this is a bug.
    Panic = 7,
}

/// Opaque SO(3) grid.
pub struct SpGrid(Arc<SO3Grid>);

/// Opaque dataset.
pub struct SpDataset(Dataset);

/// Opaque trained model.
pub struct SpModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpStatus {
    match e {
        Error::Io(_) => SpStatus::Io,
        Error::Format(_) | Error::Json(_) => SpStatus::Format,
        e if e.is_validation() => SpStatus::InvalidArgument,
        _ => SpStatus::Runtime,
    }
}

enum Failure {
    Null(&'static str),
    Small(usize),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SpStatus::NullPointer
        }
        Ok(Err(Failure::Small(need))) => {
            set_error(format!("buffer too small: {need} elements required"));
            SpStatus::BufferTooSmall
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn quat(p: *const f64, what: &'static str) -> Result<Rotation, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let q = std::slice::from_raw_parts(p, 4);
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !n.is_finite() || n < 1e-12 {
        return Err(Failure::Lib(Error::InvalidArgument(format!(
            "{what} is not a valid quaternion"
        ))));
    }
    Ok(Rotation::from_quaternion(q[0], q[1], q[2], q[3]))
}

/// Copy `src` into a caller buffer of `cap` elements, storing the needed
/// length in `len_out` when it is non-null.
unsafe fn fill(src: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> FfiResult {
    if let Some(l) = len_out.as_mut() {
        *l = src.len();
    }
    if cap < src.len() {
        return Err(Failure::Small(src.len()));
    }
    if buf.is_null() {
        return Err(Failure::Null("buffer"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Geodesic distance in radians between two rotations.
///
/// # Safety
/// `q1` and `q2` must point to 4 doubles; `out_rad` to one.
#[no_mangle]
pub unsafe extern "C" fn sp_geodesic_distance(q1: *const f64, q2: *const f64, out_rad: *mut f64) -> SpStatus {
    guard(|| {
        let (a, b) = (quat(q1, "q1")?, quat(q2, "q2")?);
        *out(out_rad, "out_rad")? = geodesic_distance(&a, &b);
        Ok(())
    })
}

/// Real-basis Wigner matrix of degree `l` (row-major, `(2l+1)^2` values).
///
/// # Safety
/// `q` must point to 4 doubles and `buf` to `cap` doubles; `len_out` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn sp_wigner_matrix(
    l: usize,
    q: *const f64,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpStatus {
    guard(|| {
        let d = wigner_D(l, &quat(q, "q")?)?;
        fill(&d, buf, cap, len_out)
    })
}

/// Build the HEALPix SO(3) grid of the given recursion level
/// (`72 * 8^recursion` rotations).
///
/// # Safety
/// `grid_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_grid_new(recursion: u32, grid_out: *mut *mut SpGrid) -> SpStatus {
    guard(|| {
        let slot = out(grid_out, "grid_out")?;
        let grid = healpix_so3(recursion)?;
        *slot = Box::into_raw(Box::new(SpGrid(Arc::new(grid))));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`sp_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sp_grid_free(grid: *mut SpGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of rotations in a grid, 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_grid_len(grid: *const SpGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Quaternion of grid rotation `index`.
///
/// # Safety
/// `grid` must be a live handle and `q_out` point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_grid_rotation(grid: *const SpGrid, index: usize, q_out: *mut f64) -> SpStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let r = g.0.rotations.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("index {index} out of range ({} rotations)", g.0.len()))
        })?;
        fill(&r.quaternion(), q_out, 4, std::ptr::null_mut())
    })
}

/// Index of the grid rotation closest to `q`.
///
/// # Safety
/// `grid` must be a live handle, `q` point to 4 doubles and `index_out` to
/// one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn sp_grid_nearest(grid: *const SpGrid, q: *const f64, index_out: *mut usize) -> SpStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        *out(index_out, "index_out")? = g.0.nearest_index(&quat(q, "q")?);
        Ok(())
    })
}

/// Render `n` samples of the named shape (`tet`, `cube`, `ico`, `cone`,
/// `cyl`, `tetX`, `cylO`, `sphX`). `test_split` nonzero stores the full
/// equivalent set of each pose.
///
/// # Safety
/// `shape` must be a NUL-terminated string and `dataset_out` valid.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_generate(
    shape: *const c_char,
    n: usize,
    seed: u64,
    test_split: i32,
    dataset_out: *mut *mut SpDataset,
) -> SpStatus {
    guard(|| {
        let slot = out(dataset_out, "dataset_out")?;
        let shape: Shape = c_str(shape, "shape")?.parse()?;
        let split = if test_split != 0 { Split::Test } else { Split::Train };
        let data = generate(shape, n, seed, split, &RenderConfig::default())?;
        *slot = Box::into_raw(Box::new(SpDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `dataset_out` valid.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_load(path: *const c_char, dataset_out: *mut *mut SpDataset) -> SpStatus {
    guard(|| {
        let slot = out(dataset_out, "dataset_out")?;
        let data = Dataset::load(&PathBuf::from(c_str(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SpDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_save(dataset: *const SpDataset, path: *const c_char) -> SpStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        d.0.save(&PathBuf::from(c_str(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_free(dataset: *mut SpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_len(dataset: *const SpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Pixels of sample `index` as channel, row, column.
///
/// # Safety
/// `dataset` must be a live handle and `buf` point to `cap` doubles;
/// `len_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_image(
    dataset: *const SpDataset,
    index: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        if index >= d.0.len() {
            return Err(Error::InvalidArgument(format!("index {index} out of range")).into());
        }
        fill(&d.0.image(index).values, buf, cap, len_out)
    })
}

/// Label quaternion of sample `index`.
///
/// # Safety
/// `dataset` must be a live handle and `q_out` point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_label(dataset: *const SpDataset, index: usize, q_out: *mut f64) -> SpStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        let s = d.0.samples.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("index {index} out of range"))
        })?;
        fill(&s.label.quaternion(), q_out, 4, std::ptr::null_mut())
    })
}

/// Load a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `model_out` valid.
#[no_mangle]
pub unsafe extern "C" fn sp_model_load(path: *const c_char, model_out: *mut *mut SpModel) -> SpStatus {
    guard(|| {
        let slot = out(model_out, "model_out")?;
        let model = load_checkpoint(&PathBuf::from(c_str(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SpModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_model_free(model: *mut SpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Probability of every rotation of `grid` for sample `index` of
/// `dataset`. `buf` receives `sp_grid_len(grid)` values summing to one.
///
/// # Safety
/// All handles must be live and `buf` point to `cap` doubles; `len_out`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn sp_model_predict(
    model: *const SpModel,
    grid: *const SpGrid,
    dataset: *const SpDataset,
    index: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let g = deref(grid, "grid")?;
        let d = deref(dataset, "dataset")?;
        let c = &m.0.config;
        if (c.image_height, c.image_width, c.image_channels) != (d.0.height, d.0.width, d.0.channels) {
            return Err(Error::ShapeMismatch("dataset images do not match the model".into()).into());
        }
        let dist = evalviz::predict(&m.0, &g.0, &d.0, index)?;
        fill(&dist.probs, buf, cap, len_out)
    })
}
