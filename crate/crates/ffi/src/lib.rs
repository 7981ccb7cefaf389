//! C ABI for the deep-GP inverse problem laboratory.
//!
//! Conventions:
//!
//! - Handles (`DgpinvField`, `DgpinvModel`) are opaque; free them with the
//!   matching `*_free` function exactly once.
//! - Fallible functions return a [`DgpinvStatus`] and write their result
//!   through an out-pointer, which is set to null on entry and filled only
//!   on `Ok`.
//! - On failure, [`dgpinv_last_error`] returns a message for the calling
//!   thread, valid until that thread's next call into this library.
//! - Strings returned through out-pointers are NUL-terminated UTF-8 owned
//!   by the caller; release them with `dgpinv_string_free`.
//! - Panics never unwind across the boundary; they surface as
//!   [`DgpinvStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dgp_inverse::dgp::{DgpPriorConfig, DgpSampler};
use dgp_inverse::error::Error;
use dgp_inverse::experiment::{run_contraction_experiment, ExperimentPlan, ProblemSetup};
use dgp_inverse::exponents::{parse_rational, theoretical_exponents};
use dgp_inverse::grid::{Field, Grid};
use dgp_inverse::io::{field_from_json, field_to_json};
use dgp_inverse::mcmc::{baseline_prior_sample, BaselineConfig, BaselineScaling};
use dgp_inverse::pde::{ForwardModel, Problem};
use dgp_inverse::rng::{module_ids, StreamKey};
use dgp_inverse::structure::HyperpriorConfig;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgpinvStatus {
    Ok = 0,
    /// Invalid configuration, argument, or document.
    Config = 2,
    /// Numerical failure (solver divergence, rejection budget, non-finite).
    Numeric = 3,
    /// A required pointer argument was null.
    NullArgument = 4,
    /// A string argument was not valid UTF-8.
    Utf8 = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Forward problem selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgpinvProblem {
    /// Linear debug mode: the forward map is the identity.
    Identity = 0,
    /// Divergence-form diffusion with unit interior source.
    Darcy = 1,
    /// Stationary Schrodinger equation with unit boundary data.
    Schrodinger = 2,
}

/// Opaque handle to a scalar field sampled on a tensor grid.
pub struct DgpinvField {
    inner: Field,
}

/// Opaque handle to a configured forward model.
pub struct DgpinvModel {
    inner: ForwardModel,
    grid: Grid,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty message"));
}

fn set_last_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("nul bytes stripped");
    });
}

fn fail(e: &Error) -> DgpinvStatus {
    set_last_error(&e.to_string());
    if e.exit_code() == 2 {
        DgpinvStatus::Config
    } else {
        DgpinvStatus::Numeric
    }
}

fn null_arg(name: &str) -> DgpinvStatus {
    set_last_error(&format!("null pointer argument: {name}"));
    DgpinvStatus::NullArgument
}

/// Runs a body with a cleared error slot and a panic guard.
fn guarded(f: impl FnOnce() -> DgpinvStatus) -> DgpinvStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            DgpinvStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, DgpinvStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("argument {name} is not valid UTF-8"));
        DgpinvStatus::Utf8
    })
}

fn give_string(text: String, out: *mut *mut c_char) -> DgpinvStatus {
    let c = CString::new(text.replace('\0', " ")).expect("nul bytes stripped");
    unsafe { *out = c.into_raw() };
    DgpinvStatus::Ok
}

fn problem_of(problem: DgpinvProblem) -> Option<Problem> {
    match problem {
        DgpinvProblem::Identity => None,
        DgpinvProblem::Darcy => Some(Problem::Darcy),
        DgpinvProblem::Schrodinger => Some(Problem::Schrodinger),
    }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn dgpinv_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message describing the calling thread's most recent failure, or an empty
/// string after a success. The pointer is owned by the library and is valid
/// until the same thread's next call.
#[no_mangle]
pub extern "C" fn dgpinv_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be a pointer previously returned through a string out-parameter
/// of this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a field on the centered hypercube grid from a dense value block
/// (axis 0 fastest). `len` must equal `points_per_axis^dim`.
///
/// # Safety
/// `values` must point to `len` readable f64s; `out` must be a valid
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_new(
    dim: usize,
    points_per_axis: usize,
    margin: f64,
    values: *const f64,
    len: usize,
    out: *mut *mut DgpinvField,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        if values.is_null() {
            return null_arg("values");
        }
        let grid = match Grid::ambient(dim, points_per_axis, margin) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        if len != grid.n_nodes() {
            set_last_error(&format!(
                "value block has {len} entries but the grid has {} nodes",
                grid.n_nodes()
            ));
            return DgpinvStatus::Config;
        }
        let slice = std::slice::from_raw_parts(values, len);
        match Field::new(grid, slice.to_vec(), "ffi value block") {
            Ok(f) => {
                *out = Box::into_raw(Box::new(DgpinvField { inner: f }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Parses a field document (the same JSON format the CLI reads and writes).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_from_json(
    json: *const c_char,
    out: *mut *mut DgpinvField,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let doc: serde_json::Value = match serde_json::from_str(text) {
            Ok(d) => d,
            Err(e) => return fail(&Error::from(e)),
        };
        match field_from_json(&doc) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(DgpinvField { inner: f }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serializes a field to its bit-exact JSON document.
///
/// # Safety
/// `field` must be a live field handle; `out` must be writable. The
/// returned string is released with `dgpinv_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_to_json(
    field: *const DgpinvField,
    out: *mut *mut c_char,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(field) = field.as_ref() else {
            return null_arg("field");
        };
        match serde_json::to_string(&field_to_json(&field.inner)) {
            Ok(text) => give_string(text, out),
            Err(e) => fail(&Error::from(e)),
        }
    })
}

/// Number of grid nodes (0 for a null handle).
///
/// # Safety
/// `field`, when non-null, must be a live field handle.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_len(field: *const DgpinvField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.values().len())
}

/// Grid dimension (0 for a null handle).
///
/// # Safety
/// `field`, when non-null, must be a live field handle.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_dim(field: *const DgpinvField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.grid().dim())
}

/// Copies all nodal values (axis 0 fastest) into `out`, which must hold
/// exactly `dgpinv_field_len(field)` doubles.
///
/// # Safety
/// `field` must be a live field handle; `out` must point to `len` writable
/// f64s.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_values(
    field: *const DgpinvField,
    out: *mut f64,
    len: usize,
) -> DgpinvStatus {
    guarded(|| {
        let Some(field) = field.as_ref() else {
            return null_arg("field");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let values = field.inner.values();
        if len != values.len() {
            set_last_error(&format!(
                "buffer holds {len} entries but the field has {}",
                values.len()
            ));
            return DgpinvStatus::Config;
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(values);
        DgpinvStatus::Ok
    })
}

/// Releases a field handle. Null is ignored.
///
/// # Safety
/// `field` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_field_free(field: *mut DgpinvField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Configures a forward model on the centered hypercube grid. `k_min` is
/// the diffusivity floor and is ignored unless `problem` is `Darcy`.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_model_new(
    problem: DgpinvProblem,
    dim: usize,
    points_per_axis: usize,
    margin: f64,
    k_min: f64,
    out: *mut *mut DgpinvModel,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let grid = match Grid::ambient(dim, points_per_axis, margin) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        let setup = match problem {
            DgpinvProblem::Identity => ProblemSetup::Identity,
            DgpinvProblem::Darcy => ProblemSetup::Darcy { k_min },
            DgpinvProblem::Schrodinger => ProblemSetup::Schrodinger,
        };
        match setup.model(&grid) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(DgpinvModel { inner: model, grid }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Applies the forward map to a parameter field sampled on the model grid.
///
/// # Safety
/// `model` and `theta` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_model_apply(
    model: *const DgpinvModel,
    theta: *const DgpinvField,
    out: *mut *mut DgpinvField,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(model) = model.as_ref() else {
            return null_arg("model");
        };
        let Some(theta) = theta.as_ref() else {
            return null_arg("theta");
        };
        if theta.inner.grid() != &model.grid {
            set_last_error("theta is sampled on a different grid than the model");
            return DgpinvStatus::Config;
        }
        match model.inner.apply(&theta.inner) {
            Ok(u) => {
                *out = Box::into_raw(Box::new(DgpinvField { inner: u }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_model_free(model: *mut DgpinvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Draws the composed field of one conditioned deep-GP prior sample.
/// Draws are deterministic in `(seed, replicate)` and match the CLI's
/// `prior-sample` command.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dgpinv_dgp_sample(
    ambient_d: usize,
    beta: u32,
    alpha_plus: f64,
    q_max: usize,
    m0: f64,
    points_per_axis: usize,
    margin: f64,
    n: u64,
    seed: u64,
    replicate: u32,
    out: *mut *mut DgpinvField,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let attempt = || -> Result<Field, Error> {
            let hyper = HyperpriorConfig::with_default_table(ambient_d, beta, alpha_plus, q_max)?;
            let cfg = DgpPriorConfig::new(hyper, m0, points_per_axis, margin)?;
            let sampler = DgpSampler::new(cfg, n)?;
            let mut rng = StreamKey::new(seed, module_ids::ELEMENTARY)
                .with_replicate(replicate)
                .rng();
            Ok(sampler.sample(&mut rng)?.composed().clone())
        };
        match attempt() {
            Ok(f) => {
                *out = Box::into_raw(Box::new(DgpinvField { inner: f }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Draws one canonically rescaled series-prior sample at sample size `n`.
/// Draws are deterministic in `(seed, replicate)` and match the CLI.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dgpinv_baseline_sample(
    ambient_d: usize,
    tau: f64,
    beta: u32,
    truncation: usize,
    points_per_axis: usize,
    margin: f64,
    n: u64,
    seed: u64,
    replicate: u32,
    out: *mut *mut DgpinvField,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let attempt = || -> Result<Field, Error> {
            let cfg = BaselineConfig::new(
                tau,
                BaselineScaling::Canonical,
                beta,
                ambient_d,
                points_per_axis,
                margin,
                truncation,
            )?;
            let mut rng = StreamKey::new(seed, module_ids::BASELINE)
                .with_replicate(replicate)
                .rng();
            baseline_prior_sample(&cfg, n, &mut rng)
        };
        match attempt() {
            Ok(f) => {
                *out = Box::into_raw(Box::new(DgpinvField { inner: f }));
                DgpinvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Computes the exact rate-exponent table as a JSON document. `alpha` and
/// the optional `tau` (may be null) accept integers, fractions like `7/2`,
/// or short decimals. `problem` must be a PDE.
///
/// # Safety
/// `alpha` must be NUL-terminated; `tau` may be null; `out` must be
/// writable. The returned string is released with `dgpinv_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_exponents_json(
    problem: DgpinvProblem,
    alpha: *const c_char,
    beta: u32,
    d: u32,
    tau: *const c_char,
    out: *mut *mut c_char,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(problem) = problem_of(problem) else {
            set_last_error("exponent tables are defined for the PDE problems only");
            return DgpinvStatus::Config;
        };
        let alpha = match read_str(alpha, "alpha") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let attempt = || -> Result<String, Error> {
            let alpha = parse_rational(alpha)?;
            let tau = if tau.is_null() {
                None
            } else {
                let text = CStr::from_ptr(tau)
                    .to_str()
                    .map_err(|_| Error::config("argument tau is not valid UTF-8"))?;
                Some(parse_rational(text)?)
            };
            let report = theoretical_exponents(problem, alpha, beta, d, tau)?;
            Ok(serde_json::to_string_pretty(&report)?)
        };
        match attempt() {
            Ok(text) => give_string(text, out),
            Err(e) => fail(&e),
        }
    })
}

/// Runs a full contraction-rate experiment from a plan document (the same
/// JSON schema the CLI's `contract` command reads) and returns the report
/// as JSON. `jobs` bounds the worker threads; 0 means one per core. The
/// report is deterministic given the plan, independent of `jobs`.
///
/// # Safety
/// `plan_json` must be NUL-terminated; `out` must be writable. The
/// returned string is released with `dgpinv_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dgpinv_contract_json(
    plan_json: *const c_char,
    jobs: usize,
    out: *mut *mut c_char,
) -> DgpinvStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let text = match read_str(plan_json, "plan_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let attempt = || -> Result<String, Error> {
            let plan: ExperimentPlan = serde_json::from_str(text)?;
            let report = if jobs == 0 {
                run_contraction_experiment(&plan)?
            } else {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .map_err(|e| Error::config(format!("worker pool: {e}")))?;
                pool.install(|| run_contraction_experiment(&plan))?
            };
            Ok(serde_json::to_string_pretty(&report)?)
        };
        match attempt() {
            Ok(text) => give_string(text, out),
            Err(e) => fail(&e),
        }
    })
}
