//! C ABI over `parrep-core`.
//!
//! Handles are opaque pointers created by `parrep_*_new`/`parrep_run_*` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`ParrepStatus`]; the message of the most recent failure on the calling
//! thread is available from [`parrep_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use parrep_core::accumulator::{Observable, Recording, TrajectoryAccumulator};
use parrep_core::cme::{stationary_sensitivity, CmeOracle, StateBox};
use parrep_core::model::{builtin_by_name, parse_network, ReactionNetwork, State};
use parrep_core::parrep::{run_parrep, ParRepParams, RegionMap};
use parrep_core::rng::{RngStream, StreamKey};
use parrep_core::sensitivity::quadratic_form;
use parrep_core::ssa::run_ssa;
use parrep_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParrepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    InvalidNetwork = 10,
    InvalidState = 11,
    InvalidParams = 12,
    UnknownModel = 13,
    AbsorbingState = 14,
    AllReplicasExited = 15,
    EmptyWindow = 16,
    InsufficientSamples = 17,
    NegativeQuadraticForm = 18,
    BoxTooSmall = 19,
    Reducible = 20,
    SingularSystem = 21,
    Schema = 22,
    Io = 23,
    Panic = 99,
}

impl From<&Error> for ParrepStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidNetwork(_) => Self::InvalidNetwork,
            Error::InvalidState(_) => Self::InvalidState,
            Error::InvalidParams(_) => Self::InvalidParams,
            Error::UnknownModel(_) => Self::UnknownModel,
            Error::AbsorbingState { .. } => Self::AbsorbingState,
            Error::AllReplicasExited { .. } => Self::AllReplicasExited,
            Error::EmptyWindow => Self::EmptyWindow,
            Error::InsufficientSamples(_) => Self::InsufficientSamples,
            Error::NegativeQuadraticForm(_) => Self::NegativeQuadraticForm,
            Error::BoxTooSmall(_) => Self::BoxTooSmall,
            Error::Reducible { .. } => Self::Reducible,
            Error::SingularSystem(_) => Self::SingularSystem,
            Error::Schema { .. } => Self::Schema,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Opaque reaction network.
pub struct ParrepNetwork {
    inner: ReactionNetwork,
}

/// Opaque result of one trajectory.
pub struct ParrepReport {
    acc: TrajectoryAccumulator,
    parallel_phases: usize,
    interrupted: bool,
}

/// Settings of one ParRep trajectory.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ParrepConfig {
    /// Species whose population defines the regions.
    pub region_species: usize,
    /// Increasing cut points; region `i` holds states above exactly `i` cuts.
    pub cuts: *const f64,
    pub n_cuts: usize,
    pub decorrelation: u64,
    pub dephasing: u64,
    pub replicas: usize,
    pub t_end: f64,
    /// Start of the recording window.
    pub record_from: f64,
    pub seed: u64,
    pub trajectory: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: ParrepStatus, msg: impl Into<String>) -> ParrepStatus {
    set_error(msg.into());
    status
}

fn from_error(e: &Error) -> ParrepStatus {
    fail(e.into(), e.to_string())
}

fn guard(f: impl FnOnce() -> ParrepStatus) -> ParrepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ParrepStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ParrepStatus> {
    if p.is_null() {
        return Err(fail(ParrepStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ParrepStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize) -> Result<&'a [T], ParrepStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ParrepStatus::NullPointer, "null array argument"));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    n: usize,
    needed: usize,
) -> Result<&'a mut [T], ParrepStatus> {
    if n < needed {
        return Err(fail(
            ParrepStatus::BufferTooSmall,
            format!("buffer holds {n}, need {needed}"),
        ));
    }
    if p.is_null() {
        return Err(fail(ParrepStatus::NullPointer, "null output buffer"));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(&e),
        }
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn parrep_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a built-in network (`"schlogl"` or `"genetic-switch"`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_builtin(
    name: *const c_char,
    out: *mut *mut ParrepNetwork,
) -> ParrepStatus {
    guard(|| {
        if out.is_null() {
            return fail(ParrepStatus::NullPointer, "null output handle");
        }
        let name = try_ffi!(str_arg(name));
        let model = try_core!(builtin_by_name(name));
        *out = Box::into_raw(Box::new(ParrepNetwork {
            inner: model.network,
        }));
        ParrepStatus::Ok
    })
}

/// Parses a network file.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_parse(
    text: *const c_char,
    out: *mut *mut ParrepNetwork,
) -> ParrepStatus {
    guard(|| {
        if out.is_null() {
            return fail(ParrepStatus::NullPointer, "null output handle");
        }
        let text = try_ffi!(str_arg(text));
        let net = try_core!(parse_network(text));
        *out = Box::into_raw(Box::new(ParrepNetwork { inner: net }));
        ParrepStatus::Ok
    })
}

/// # Safety
/// `net` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_free(net: *mut ParrepNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Writes the numbers of species, reactions and parameters.
///
/// # Safety
/// `net` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_dims(
    net: *const ParrepNetwork,
    species: *mut usize,
    reactions: *mut usize,
    params: *mut usize,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() || species.is_null() || reactions.is_null() || params.is_null() {
            return fail(ParrepStatus::NullPointer, "null argument");
        }
        let n = &(*net).inner;
        *species = n.n_species();
        *reactions = n.n_reactions();
        *params = n.n_params();
        ParrepStatus::Ok
    })
}

/// Propensities `λ_j(x)` of every channel.
///
/// # Safety
/// `x` must hold `n` values and `out` `m` writable values.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_propensities(
    net: *const ParrepNetwork,
    x: *const i64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() {
            return fail(ParrepStatus::NullPointer, "null network");
        }
        let net = &(*net).inner;
        let x = try_ffi!(slice_arg(x, n));
        try_core!(net.validate_state(x));
        let out = try_ffi!(out_slice(out, m, net.n_reactions()));
        net.propensities_into(x, out);
        ParrepStatus::Ok
    })
}

/// Row-major `reactions × params` matrix of `∂λ_j/∂c_k`.
///
/// # Safety
/// `x` must hold `n` values and `out` `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn parrep_network_gradients(
    net: *const ParrepNetwork,
    x: *const i64,
    n: usize,
    out: *mut f64,
    len: usize,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() {
            return fail(ParrepStatus::NullPointer, "null network");
        }
        let net = &(*net).inner;
        let x = try_ffi!(slice_arg(x, n));
        try_core!(net.validate_state(x));
        let l = net.n_params();
        let out = try_ffi!(out_slice(out, len, net.n_reactions() * l));
        for (j, row) in net.propensity_gradients(x).iter().enumerate() {
            out[j * l..(j + 1) * l].copy_from_slice(row);
        }
        ParrepStatus::Ok
    })
}

fn population_recording(net: &ReactionNetwork, record_from: f64) -> Recording {
    Recording {
        observables: net
            .species()
            .iter()
            .enumerate()
            .map(|(i, s)| Observable::population(s, i))
            .collect(),
        binning: None,
        fim: true,
        record_from,
    }
}

/// Plain SSA trajectory on `[0, t_end]`, recording species populations and the
/// FIM integrand after `record_from`. An interrupted run still yields a report
/// (see [`parrep_report_interrupted`]) together with the error status.
///
/// # Safety
/// `x0` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_run_ssa(
    net: *const ParrepNetwork,
    x0: *const i64,
    n: usize,
    t_end: f64,
    record_from: f64,
    seed: u64,
    trajectory: u32,
    out: *mut *mut ParrepReport,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() || out.is_null() {
            return fail(ParrepStatus::NullPointer, "null argument");
        }
        let net = &(*net).inner;
        let x0 = State(try_ffi!(slice_arg(x0, n)).to_vec());
        let rec = population_recording(net, record_from);
        let mut rng = RngStream::new(seed, StreamKey::serial(trajectory, 0));
        let (acc, err) = match run_ssa(net, &x0, t_end, &rec, &mut rng) {
            Ok(acc) => (acc, None),
            Err(e) => (e.partial, Some(e.error)),
        };
        *out = Box::into_raw(Box::new(ParrepReport {
            acc,
            parallel_phases: 0,
            interrupted: err.is_some(),
        }));
        match err {
            Some(e) => from_error(&e),
            None => ParrepStatus::Ok,
        }
    })
}

/// One ParRep trajectory. Reporting as for [`parrep_run_ssa`].
///
/// # Safety
/// `x0` must hold `n` values, `cfg` must be valid with `cfg.cuts` holding
/// `cfg.n_cuts` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_run_parrep(
    net: *const ParrepNetwork,
    x0: *const i64,
    n: usize,
    cfg: *const ParrepConfig,
    out: *mut *mut ParrepReport,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() || cfg.is_null() || out.is_null() {
            return fail(ParrepStatus::NullPointer, "null argument");
        }
        let net = &(*net).inner;
        let cfg = &*cfg;
        let x0 = State(try_ffi!(slice_arg(x0, n)).to_vec());
        let cuts = try_ffi!(slice_arg(cfg.cuts, cfg.n_cuts)).to_vec();
        let labels = (0..=cuts.len()).map(|i| format!("W{i}")).collect();
        let regions = try_core!(RegionMap::new(cfg.region_species, cuts, labels));
        let params = ParRepParams {
            decorrelation: cfg.decorrelation,
            dephasing: cfg.dephasing,
            replicas: cfg.replicas,
            t_end: cfg.t_end,
            seed: cfg.seed,
        };
        let rec = population_recording(net, cfg.record_from);
        let (report, err) = match run_parrep(net, &x0, &regions, &params, &rec, cfg.trajectory) {
            Ok(r) => (r, None),
            Err(e) => (e.partial, Some(e.error)),
        };
        *out = Box::into_raw(Box::new(ParrepReport {
            parallel_phases: report.parallel_phases(),
            acc: report.accumulator,
            interrupted: err.is_some(),
        }));
        match err {
            Some(e) => from_error(&e),
            None => ParrepStatus::Ok,
        }
    })
}

/// # Safety
/// `report` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_free(report: *mut ParrepReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Final clock of the trajectory.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_clock(report: *const ParrepReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    (*report).acc.clock
}

/// Simulated time inside the recording window.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_sampled_time(report: *const ParrepReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    (*report).acc.sampled_time
}

/// Number of parallel phases the trajectory ran (0 for SSA).
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_parallel_phases(report: *const ParrepReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).parallel_phases
}

/// Whether the trajectory stopped on an error before `t_end`.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_interrupted(report: *const ParrepReport) -> bool {
    report.is_null() || (*report).interrupted
}

/// Time-averaged population of every species over the recording window.
///
/// # Safety
/// `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_averages(
    report: *const ParrepReport,
    out: *mut f64,
    len: usize,
) -> ParrepStatus {
    guard(|| {
        if report.is_null() {
            return fail(ParrepStatus::NullPointer, "null report");
        }
        let acc = &(*report).acc;
        if !(acc.sampled_time > 0.0) {
            return from_error(&Error::EmptyWindow);
        }
        let out = try_ffi!(out_slice(out, len, acc.integrals.len()));
        for (i, o) in out.iter_mut().enumerate() {
            *o = acc.average(i);
        }
        ParrepStatus::Ok
    })
}

/// Row-major `params × params` time-averaged FIM integrand.
///
/// # Safety
/// `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn parrep_report_fim(
    report: *const ParrepReport,
    out: *mut f64,
    len: usize,
) -> ParrepStatus {
    guard(|| {
        if report.is_null() {
            return fail(ParrepStatus::NullPointer, "null report");
        }
        let acc = &(*report).acc;
        let Some(rate) = acc.fim_rate() else {
            return fail(ParrepStatus::InvalidParams, "report has no FIM");
        };
        if !(acc.sampled_time > 0.0) {
            return from_error(&Error::EmptyWindow);
        }
        let l = rate.len();
        let out = try_ffi!(out_slice(out, len, l * l));
        for (a, row) in rate.iter().enumerate() {
            out[a * l..(a + 1) * l].copy_from_slice(row);
        }
        ParrepStatus::Ok
    })
}

/// Stationary mean of `species` and `∂/∂c_k` of it for every parameter, from
/// the truncated CME on the box `[lo, hi]`.
///
/// # Safety
/// `lo` and `hi` must hold `n` values; `mean` must be writable; `sens` must
/// hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn parrep_cme_stationary(
    net: *const ParrepNetwork,
    lo: *const i64,
    hi: *const i64,
    n: usize,
    species: usize,
    mean: *mut f64,
    sens: *mut f64,
    len: usize,
) -> ParrepStatus {
    guard(|| {
        if net.is_null() || mean.is_null() {
            return fail(ParrepStatus::NullPointer, "null argument");
        }
        let net = &(*net).inner;
        if species >= net.n_species() {
            return fail(
                ParrepStatus::InvalidParams,
                format!("species {species} out of range"),
            );
        }
        let lo = try_ffi!(slice_arg(lo, n)).to_vec();
        let hi = try_ffi!(slice_arg(hi, n)).to_vec();
        let out = try_ffi!(out_slice(sens, len, net.n_params()));
        let bx = try_core!(StateBox::new(lo, hi));
        let oracle = try_core!(CmeOracle::new(net, &bx));
        let s = try_core!(stationary_sensitivity(
            net,
            &oracle.generator,
            &oracle.solution,
            |x| x[species] as f64
        ));
        *mean = oracle.mean(species);
        out.copy_from_slice(&s);
        ParrepStatus::Ok
    })
}

/// `sqrt(iaf) · sqrt(vᵀ fim v)` for a row-major `l × l` matrix.
///
/// # Safety
/// `fim` must hold `l*l` values, `v` `l` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parrep_sensitivity_bound(
    iaf: f64,
    fim: *const f64,
    v: *const f64,
    l: usize,
    out: *mut f64,
) -> ParrepStatus {
    guard(|| {
        if out.is_null() {
            return fail(ParrepStatus::NullPointer, "null output");
        }
        if !(iaf >= 0.0) {
            return fail(ParrepStatus::InvalidParams, "IAF must be nonnegative");
        }
        let flat = try_ffi!(slice_arg(fim, l * l));
        let v = try_ffi!(slice_arg(v, l));
        let m: Vec<Vec<f64>> = flat.chunks(l.max(1)).map(|r| r.to_vec()).collect();
        let q = quadratic_form(&m, v);
        if q < -1e-12 * q.abs().max(1.0) {
            return from_error(&Error::NegativeQuadraticForm(q));
        }
        *out = iaf.sqrt() * q.max(0.0).sqrt();
        ParrepStatus::Ok
    })
}
