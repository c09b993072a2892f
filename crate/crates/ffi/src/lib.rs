//! C ABI over `splayer`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`, `spl_train` or `*_load` call and released by the matching
//! `*_free`. Fallible calls return an [`SplStatus`]; the message of the most
//! recent failure on the calling thread is available through
//! [`spl_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use splayer::autodiff::eval_jet;
use splayer::loss::Variant;
use splayer::network::{checkpoint, CompositeModel};
use splayer::optim::LrSchedule;
use splayer::problems::{analytic_solution, ProblemId, ProblemSpec};
use splayer::trainer::{train, TrainedRun, TrainingConfig};
use splayer::Error;

/// Result of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplStatus {
    Ok = 0,
    /// Invalid configuration or argument.
    Config = 1,
    /// Training produced a non-finite loss or gradient.
    Divergence = 2,
    /// File, checkpoint or serialization failure.
    Io = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// An output buffer is too small.
    BufferTooSmall = 5,
    /// The library panicked; the handle involved should be freed.
    Panic = 6,
}

/// Training configuration handle.
pub struct SplConfig(TrainingConfig);

/// Finished training run handle.
pub struct SplRun(TrainedRun);

/// Trained composite model handle.
pub struct SplModel(CompositeModel);

/// One logged epoch.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplLossRecord {
    pub epoch: u64,
    pub total: f64,
    pub residual: f64,
    pub boundary: f64,
    pub lr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SplStatus {
    match err {
        Error::Config(_) => SplStatus::Config,
        Error::Divergence { .. } => SplStatus::Divergence,
        Error::Checkpoint(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => SplStatus::Io,
    }
}

struct Failure(SplStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: SplStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SplStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SplStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            SplStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(SplStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SplStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SplStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SplStatus::Config, format!("{what} is not UTF-8")))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SplStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() && need > 0 {
        return Err(fail(SplStatus::NullPointer, format!("{what} is null")));
    }
    if len < need {
        return Err(fail(SplStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed")));
    }
    Ok(if need == 0 { &mut [] } else { slice::from_raw_parts_mut(p, need) })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length
/// excluding the NUL. Returns 0 when no error has been recorded.
#[no_mangle]
pub unsafe extern "C" fn spl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spl_version() -> *const c_char {
    static VERSION: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    VERSION.get_or_init(|| CString::new(splayer::cli::VERSION).expect("no NUL in version")).as_ptr()
}

/// Creates the default configuration for `problem` (for example `"cd1d"`)
/// and `variant` (`"pinn"`, `"pipinn"` or `"cpinn"`).
#[no_mangle]
pub unsafe extern "C" fn spl_config_new(
    problem: *const c_char,
    variant: *const c_char,
    out: *mut *mut SplConfig,
) -> SplStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let problem: ProblemId = string(problem, "problem")?.parse()?;
        let variant: Variant = string(variant, "variant")?.parse()?;
        *out = Box::into_raw(Box::new(SplConfig(TrainingConfig::new(problem, variant))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_free(config: *mut SplConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut SplConfig, f: impl FnOnce(&mut TrainingConfig)) -> SplStatus {
    guard(|| {
        let c = deref_mut(config, "config")?;
        let mut next = c.0.clone();
        f(&mut next);
        next.validate()?;
        c.0 = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_epsilon(config: *mut SplConfig, epsilon: f64) -> SplStatus {
    with_config(config, |c| c.epsilon = epsilon)
}

/// Sets the second perturbation parameter of the coupled problems.
#[no_mangle]
pub unsafe extern "C" fn spl_config_set_mu(config: *mut SplConfig, mu: f64) -> SplStatus {
    with_config(config, |c| c.mu = Some(mu))
}

/// Sets the epoch count. The logging interval is clamped to it.
#[no_mangle]
pub unsafe extern "C" fn spl_config_set_epochs(config: *mut SplConfig, epochs: usize) -> SplStatus {
    with_config(config, |c| {
        c.epochs = epochs;
        c.log_every = c.log_every.min(epochs.max(1));
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_lr(config: *mut SplConfig, lr: f64) -> SplStatus {
    with_config(config, |c| c.lr = lr)
}

/// Multiplies the learning rate by `factor` every `every` epochs.
#[no_mangle]
pub unsafe extern "C" fn spl_config_set_lr_decay(config: *mut SplConfig, factor: f64, every: usize) -> SplStatus {
    with_config(config, |c| c.schedule = LrSchedule::StepDecay { factor, every })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_seed(config: *mut SplConfig, seed: u64) -> SplStatus {
    with_config(config, |c| c.seed = seed)
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_points(
    config: *mut SplConfig,
    collocation: usize,
    per_face: usize,
) -> SplStatus {
    with_config(config, |c| {
        c.n_collocation = collocation;
        c.n_boundary_per_face = per_face;
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_log_every(config: *mut SplConfig, every: usize) -> SplStatus {
    with_config(config, |c| c.log_every = every)
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_widths(config: *mut SplConfig, outer: usize, inner: usize) -> SplStatus {
    with_config(config, |c| {
        c.outer_width = outer;
        c.inner_width = inner;
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_config_set_resample(config: *mut SplConfig, every_epoch: bool) -> SplStatus {
    with_config(config, |c| c.resample_every_epoch = every_epoch)
}

/// Trains a model. On success `*out` receives a run handle.
#[no_mangle]
pub unsafe extern "C" fn spl_train(config: *const SplConfig, out: *mut *mut SplRun) -> SplStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        let run = train(&c.0)?;
        *out = Box::into_raw(Box::new(SplRun(run)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_run_free(run: *mut SplRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of logged epochs; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn spl_run_record_count(run: *const SplRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.records.len())
}

/// Copies the logged epochs into `out`, which must hold at least
/// [`spl_run_record_count`] entries.
#[no_mangle]
pub unsafe extern "C" fn spl_run_records(run: *const SplRun, out: *mut SplLossRecord, len: usize) -> SplStatus {
    guard(|| {
        let records = &deref(run, "run")?.0.records;
        if len < records.len() {
            return Err(fail(
                SplStatus::BufferTooSmall,
                format!("record buffer holds {len} entries, {} needed", records.len()),
            ));
        }
        if records.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(fail(SplStatus::NullPointer, "out is null"));
        }
        let dst = slice::from_raw_parts_mut(out, records.len());
        for (d, r) in dst.iter_mut().zip(records) {
            *d = SplLossRecord {
                epoch: r.epoch as u64,
                total: r.total,
                residual: r.residual_term,
                boundary: r.boundary_term,
                lr: r.lr_used,
            };
        }
        Ok(())
    })
}

/// Metrics of a run. `l2_rel_error` and `max_abs_error` receive one value
/// per solution component and must hold at least `len` values; either may
/// be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn spl_run_metrics(
    run: *const SplRun,
    final_loss: *mut f64,
    l2_rel_error: *mut f64,
    max_abs_error: *mut f64,
    len: usize,
    wall_time_seconds: *mut f64,
) -> SplStatus {
    guard(|| {
        let m = &deref(run, "run")?.0.metrics;
        let n = m.l2_rel_error.len();
        if let Some(p) = final_loss.as_mut() {
            *p = m.final_loss;
        }
        if let Some(p) = wall_time_seconds.as_mut() {
            *p = m.wall_time_seconds;
        }
        if !l2_rel_error.is_null() {
            output(l2_rel_error, len, n, "l2_rel_error")?.copy_from_slice(&m.l2_rel_error);
        }
        if !max_abs_error.is_null() {
            output(max_abs_error, len, n, "max_abs_error")?.copy_from_slice(&m.max_abs_error);
        }
        Ok(())
    })
}

/// Copies the trained model of a run into a new model handle.
#[no_mangle]
pub unsafe extern "C" fn spl_run_model(run: *const SplRun, out: *mut *mut SplModel) -> SplStatus {
    guard(|| {
        let run = deref(run, "run")?;
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(SplModel(run.0.model.clone())));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spl_model_free(model: *mut SplModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn spl_model_input_dim(model: *const SplModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Number of solution components; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn spl_model_n_components(model: *const SplModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_components())
}

/// Evaluates every component at the point `x` of dimension `dim`.
#[no_mangle]
pub unsafe extern "C" fn spl_model_eval(
    model: *const SplModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    len: usize,
) -> SplStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let x = input(x, dim, "x")?;
        let values = m.forward(x)?;
        output(out, len, values.len(), "out")?.copy_from_slice(&values);
        Ok(())
    })
}

/// Value, gradient and second derivatives along each axis of one component
/// at `x`. `grad` and `hess_diag` must each hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn spl_model_eval_jet(
    model: *const SplModel,
    x: *const f64,
    dim: usize,
    component: usize,
    value: *mut f64,
    grad: *mut f64,
    hess_diag: *mut f64,
) -> SplStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let x = input(x, dim, "x")?;
        let value = deref_mut(value, "value")?;
        let jet = eval_jet(m, x, component)?;
        output(grad, dim, dim, "grad")?.copy_from_slice(&jet.grad);
        output(hess_diag, dim, dim, "hess_diag")?.copy_from_slice(&jet.hess_diag);
        *value = jet.value;
        Ok(())
    })
}

/// Writes a binary checkpoint of the model to `path`.
#[no_mangle]
pub unsafe extern "C" fn spl_model_save(model: *const SplModel, path: *const c_char) -> SplStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        checkpoint::save(m, string(path, "path")?)?;
        Ok(())
    })
}

/// Reads a checkpoint written by [`spl_model_save`].
#[no_mangle]
pub unsafe extern "C" fn spl_model_load(path: *const c_char, out: *mut *mut SplModel) -> SplStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let model = checkpoint::load(string(path, "path")?)?;
        *out = Box::into_raw(Box::new(SplModel(model)));
        Ok(())
    })
}

/// Exact solution of a benchmark at `x`. Pass NaN for `mu` to use the
/// problem's default; it is ignored by the uncoupled problems.
#[no_mangle]
pub unsafe extern "C" fn spl_analytic_solution(
    problem: *const c_char,
    epsilon: f64,
    mu: f64,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    len: usize,
) -> SplStatus {
    guard(|| {
        let id: ProblemId = string(problem, "problem")?.parse()?;
        let mu = if mu.is_nan() { id.default_mu() } else { Some(mu) };
        let spec = ProblemSpec::new(id, epsilon, mu)?;
        let values = analytic_solution(&spec, input(x, dim, "x")?)?;
        output(out, len, values.len(), "out")?.copy_from_slice(&values);
        Ok(())
    })
}
