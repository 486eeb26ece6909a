//! C ABI over the xaidrop library.
//!
//! Every function returns an [`XaidropStatus`]; on failure the message is
//! available from [`xaidrop_last_error_message`] on the same thread. Panics
//! never cross the boundary. Datasets are opaque handles owned by the caller
//! and released with [`xaidrop_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use xaidrop::dataset::{load_dataset, Dataset};
use xaidrop::drop::{yeo_johnson, Mapping, MappingParams};
use xaidrop::harness::{self, ExperimentConfig};
use xaidrop::synthetic::{generate_ba_house, SyntheticSpec};
use xaidrop::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XaidropStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Load = 5,
    Numeric = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XaidropMapping {
    GaussianYeoJohnson = 0,
    EmpiricalCdf = 1,
    Uniform = 2,
}

impl From<XaidropMapping> for Mapping {
    fn from(m: XaidropMapping) -> Self {
        match m {
            XaidropMapping::GaussianYeoJohnson => Mapping::GaussianYeoJohnson,
            XaidropMapping::EmpiricalCdf => Mapping::EmpiricalCdf,
            XaidropMapping::Uniform => Mapping::Uniform,
        }
    }
}

/// Clamp range and spread of the probability mapping.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XaidropMappingParams {
    pub floor: f64,
    pub ceiling: f64,
    pub spread_divisor: f64,
}

impl From<XaidropMappingParams> for MappingParams {
    fn from(p: XaidropMappingParams) -> Self {
        MappingParams {
            floor: p.floor,
            ceiling: p.ceiling,
            spread_divisor: p.spread_divisor,
        }
    }
}

/// Opaque dataset handle.
pub struct XaidropDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // interior NULs would truncate the message; replace them
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> XaidropStatus {
    match e {
        Error::Config(_) => XaidropStatus::Config,
        Error::InvalidArgument(_) | Error::Shape { .. } => XaidropStatus::InvalidArgument,
        Error::Io { .. } => XaidropStatus::Io,
        Error::Load { .. } => XaidropStatus::Load,
        Error::NonFinite { .. } => XaidropStatus::Numeric,
        Error::Epoch { source, .. } => status_of(source),
    }
}

struct Failure(XaidropStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(XaidropStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(XaidropStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> XaidropStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => XaidropStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            XaidropStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn out_arg<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn xaidrop_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn xaidrop_mapping_params_default() -> XaidropMappingParams {
    let d = MappingParams::default();
    XaidropMappingParams {
        floor: d.floor,
        ceiling: d.ceiling,
        spread_divisor: d.spread_divisor,
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_dataset_load(path: *const c_char, out: *mut *mut XaidropDataset) -> XaidropStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = load_dataset(path)?;
        *out = Box::into_raw(Box::new(XaidropDataset { inner }));
        Ok(())
    })
}

/// Barabási–Albert base graph with attached house motifs.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_dataset_ba_house(
    base_nodes: usize,
    attach_edges_per_node: usize,
    num_houses: usize,
    seed: u64,
    out: *mut *mut XaidropDataset,
) -> XaidropStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = generate_ba_house(&SyntheticSpec {
            base_nodes,
            attach_edges_per_node,
            num_houses,
            seed,
        })?;
        *out = Box::into_raw(Box::new(XaidropDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_dataset_free(ds: *mut XaidropDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Writes node, undirected edge, feature and class counts.
///
/// # Safety
/// `ds` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_dataset_sizes(
    ds: *const XaidropDataset,
    num_nodes: *mut usize,
    num_edges: *mut usize,
    num_features: *mut usize,
    num_classes: *mut usize,
) -> XaidropStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.inner;
        *out_arg(num_nodes, "num_nodes")? = ds.num_nodes();
        *out_arg(num_edges, "num_edges")? = ds.graph.num_edges();
        *out_arg(num_features, "num_features")? = ds.features.dim();
        *out_arg(num_classes, "num_classes")? = ds.labels.num_classes();
        Ok(())
    })
}

/// Runs the experiment described by a TOML config on `ds` (or, if `ds` is
/// null, on the config's own data source) and writes the result files to
/// `out_dir`.
///
/// # Safety
/// `config_toml` and `out_dir` must be NUL-terminated strings; `ds` must be
/// null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_run(
    ds: *const XaidropDataset,
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> XaidropStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml_str(str_arg(config_toml, "config_toml")?)?;
        let out = PathBuf::from(str_arg(out_dir, "out_dir")?);
        let result = match ds.as_ref() {
            Some(ds) => harness::run_on(&ds.inner, &cfg)?,
            None => harness::run(&cfg)?,
        };
        harness::emit_results(&result, &cfg, &out)?;
        Ok(())
    })
}

/// Yeo-Johnson transform of one value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_yeo_johnson(x: f64, lambda: f64, out: *mut f64) -> XaidropStatus {
    guard(|| {
        *out_arg(out, "out")? = yeo_johnson::yeo_johnson(x, lambda)?;
        Ok(())
    })
}

/// Maximum-likelihood Yeo-Johnson λ. `degenerate` is set to 1 when the input
/// has fewer than two distinct values, in which case λ is 1.
///
/// # Safety
/// `xs` must point to `len` doubles; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_fit_lambda(
    xs: *const f64,
    len: usize,
    lambda: *mut f64,
    degenerate: *mut i32,
) -> XaidropStatus {
    guard(|| {
        let xs = slice_arg(xs, len, "xs")?;
        let lambda = out_arg(lambda, "lambda")?;
        let degenerate = out_arg(degenerate, "degenerate")?;
        let fit = yeo_johnson::fit_lambda(xs);
        *lambda = fit.lambda;
        *degenerate = i32::from(fit.degenerate);
        Ok(())
    })
}

/// Maps fidelity-sufficiency scores to dropping probabilities with mean `p`.
/// `params` may be null for the defaults.
///
/// # Safety
/// `fsuf` and `out` must each point to `len` doubles; `params` must be null
/// or valid.
#[no_mangle]
pub unsafe extern "C" fn xaidrop_map_to_probabilities(
    fsuf: *const f64,
    len: usize,
    p: f64,
    mapping: XaidropMapping,
    params: *const XaidropMappingParams,
    out: *mut f64,
) -> XaidropStatus {
    guard(|| {
        let fsuf = slice_arg(fsuf, len, "fsuf")?;
        if len > 0 && out.is_null() {
            return Err(null("out"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("p must lie in (0, 1), got {p}")));
        }
        if fsuf.iter().any(|f| !f.is_finite()) {
            return Err(invalid("fsuf contains non-finite values"));
        }
        let params: MappingParams = params.as_ref().map_or_else(MappingParams::default, |p| (*p).into());
        params.validate()?;
        let probs = xaidrop::drop::map_to_probabilities(fsuf, p, mapping.into(), &params);
        if len > 0 {
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(&probs);
        }
        Ok(())
    })
}
