//! C ABI over the trust engine. Objects are opaque handles created and freed
//! here; every call returns a `BremStatus` and leaves a message for
//! `brem_last_error` when it fails.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use brem::controller::{decide_compliance, Compliance};
use brem::estimation::{fit_mle, FitConfig};
use brem::harness::{grounding_run, run_compare, HarnessConfig};
use brem::rem::io::{read_event_log, AttributeDocument};
use brem::rem::{ActorId, AttributeSet, Dyad, EventHistory, EventType, LikelihoodMode, RateModel, RelationalEvent, StatisticSpec};
use brem::trust::{summarize, InferenceConfig, TrustTelemetry, TrustTracker};
use brem::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BremStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NonMonotoneTime = 3,
    Parse = 4,
    RuleViolation = 5,
    Protocol = 6,
    Incompatible = 7,
    InvalidState = 8,
    Io = 9,
    /// A fit finished without meeting its convergence test.
    NotConverged = 10,
    Panic = 11,
}

/// Likelihood used by `brem_fit`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BremLikelihood {
    Temporal = 0,
    Ordinal = 1,
}

/// Rate model: statistics, coefficients and baseline.
pub struct BremModel {
    inner: RateModel,
}

/// Online trust tracker that owns its event history.
pub struct BremTracker {
    tracker: TrustTracker,
    history: EventHistory,
    attrs: AttributeSet,
    last: Vec<TrustTelemetry>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BremStatus {
    match e {
        Error::InvalidInput(_) => BremStatus::InvalidInput,
        Error::NonMonotoneTime { .. } => BremStatus::NonMonotoneTime,
        Error::Parse { .. } => BremStatus::Parse,
        Error::RuleViolation(_) => BremStatus::RuleViolation,
        Error::Protocol(_) => BremStatus::Protocol,
        Error::Incompatible(_) => BremStatus::Incompatible,
        Error::InvalidState(_) => BremStatus::InvalidState,
        Error::Io(_) => BremStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
    Status(BremStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BremStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BremStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            BremStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BremStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::Core(Error::InvalidInput(format!("{what} is not UTF-8: {e}"))))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(text: &str, what: &str) -> Result<T, Fail> {
    serde_json::from_str(text).map_err(|e| {
        Fail::Core(Error::Parse {
            line: e.line(),
            message: format!("{what}: {e}"),
        })
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail::Core(Error::InvalidState(e.to_string())))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail::Core(Error::InvalidState(e.to_string())))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn brem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn brem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a model from `{"specs": [...], "theta": [...], "baseline": 1.0}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_model_new(json: *const c_char, out: *mut *mut BremModel) -> BremStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let m: RateModel = parse_json(str_arg(json, "json")?, "model")?;
        let inner = RateModel::new(m.specs, m.theta, m.baseline)?;
        *out = Box::into_raw(Box::new(BremModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `brem_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn brem_model_free(model: *mut BremModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Creates a tracker for the dyads `human -> robots[i]`. `priors` may be
/// null; a NaN entry means no reported trust for that robot. `inference_json`
/// may be null for the default settings.
///
/// # Safety
/// `robots` must point to `n_robots` values, `priors` likewise when not null,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_new(
    model: *const BremModel,
    inference_json: *const c_char,
    n_actors: usize,
    n_types: usize,
    human: usize,
    robots: *const usize,
    priors: *const f64,
    n_robots: usize,
    out: *mut *mut BremTracker,
) -> BremStatus {
    guard(|| {
        let model = model.as_ref().ok_or(Fail::Null("model"))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if robots.is_null() && n_robots > 0 {
            return Err(Fail::Null("robots"));
        }
        let config = match opt_str_arg(inference_json, "inference_json")? {
            Some(s) => parse_json::<InferenceConfig>(s, "inference")?,
            None => InferenceConfig::default(),
        };
        let robots = if n_robots == 0 { &[][..] } else { std::slice::from_raw_parts(robots, n_robots) };
        let priors = if priors.is_null() { None } else { Some(std::slice::from_raw_parts(priors, n_robots)) };
        let history = EventHistory::new(n_actors, n_types)?;
        model.inner.validate_for(&history)?;
        let mut dyads = Vec::with_capacity(n_robots);
        for (i, &r) in robots.iter().enumerate() {
            if r >= n_actors || human >= n_actors {
                return Err(Fail::Core(Error::InvalidInput(format!("actor index outside 0..{n_actors}"))));
            }
            let p = priors.map(|p| p[i]).filter(|v| !v.is_nan());
            dyads.push((Dyad::new(ActorId(human), ActorId(r))?, p));
        }
        let tracker = TrustTracker::new(config, model.inner.clone(), &dyads, 0.0)?;
        *out = Box::into_raw(Box::new(BremTracker {
            tracker,
            history,
            attrs: AttributeSet::new(),
            last: Vec::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `tracker` must be null or a handle from `brem_tracker_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_free(tracker: *mut BremTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Sets a constant actor attribute used by the rate statistics.
///
/// # Safety
/// `tracker` must be a live handle and `name` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_set_actor_attribute(
    tracker: *mut BremTracker,
    actor: usize,
    name: *const c_char,
    value: f64,
) -> BremStatus {
    guard(|| {
        let t = tracker.as_mut().ok_or(Fail::Null("tracker"))?;
        let name = str_arg(name, "name")?;
        t.attrs.set_actor(ActorId(actor), name, value)?;
        Ok(())
    })
}

/// Appends one event; times must not decrease.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_push_event(
    tracker: *mut BremTracker,
    sender: usize,
    receiver: usize,
    event_type: usize,
    time: f64,
    weight: f64,
) -> BremStatus {
    guard(|| {
        let t = tracker.as_mut().ok_or(Fail::Null("tracker"))?;
        let e = RelationalEvent::new(ActorId(sender), ActorId(receiver), EventType(event_type), time).with_weight(weight);
        t.history.push(e)?;
        Ok(())
    })
}

/// Absorbs the events up to `t_end` as one window and stores its telemetry.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_advance(tracker: *mut BremTracker, t_end: f64) -> BremStatus {
    guard(|| {
        let t = tracker.as_mut().ok_or(Fail::Null("tracker"))?;
        t.last = t.tracker.advance(&t.history, &t.attrs, t_end)?;
        Ok(())
    })
}

/// Trust level L_beta and posterior mean for the dyad `human -> robot`.
///
/// # Safety
/// `tracker` must be a live handle; `level` and `mean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_trust(
    tracker: *const BremTracker,
    human: usize,
    robot: usize,
    level: *mut f64,
    mean: *mut f64,
) -> BremStatus {
    guard(|| {
        let t = tracker.as_ref().ok_or(Fail::Null("tracker"))?;
        if level.is_null() || mean.is_null() {
            return Err(Fail::Null("level or mean"));
        }
        let d = Dyad::new(ActorId(human), ActorId(robot))?;
        let post = t
            .tracker
            .posterior(d)
            .ok_or_else(|| Fail::Core(Error::InvalidInput(format!("dyad {d} is not tracked"))))?;
        let cfg = t.tracker.config();
        let s = summarize(post, cfg.risk, cfg.telemetry_gamma)?;
        *level = t.tracker.level(d).unwrap_or(s.level);
        *mean = s.mean;
        Ok(())
    })
}

/// Telemetry of the last window as a JSON array; free with `brem_string_free`.
///
/// # Safety
/// `tracker` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn brem_tracker_telemetry_json(tracker: *const BremTracker, out: *mut *mut c_char) -> BremStatus {
    guard(|| {
        let t = tracker.as_ref().ok_or(Fail::Null("tracker"))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        put_string(out, to_json(&t.last)?)
    })
}

/// Seeded compliance draw for a conflicting instruction at autonomy `l_alpha`.
///
/// # Safety
/// `obey` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_decide_compliance(l_alpha: f64, seed: u64, obey: *mut bool) -> BremStatus {
    guard(|| {
        if obey.is_null() {
            return Err(Fail::Null("obey"));
        }
        *obey = decide_compliance(l_alpha, seed)?.outcome == Compliance::Obey;
        Ok(())
    })
}

/// Fits coefficients to a line-delimited event log. `specs_json` lists the
/// statistics; `attrs_json` may be null. The result is a JSON object
/// `{theta, std_errors, log_lik, converged}`, written even when the fit does
/// not converge (status `NotConverged`).
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_fit(
    events: *const c_char,
    specs_json: *const c_char,
    attrs_json: *const c_char,
    mode: BremLikelihood,
    out: *mut *mut c_char,
) -> BremStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let (vocab, history) = read_event_log(str_arg(events, "events")?.as_bytes())?;
        let specs: Vec<StatisticSpec> = parse_json(str_arg(specs_json, "specs_json")?, "specs")?;
        let doc = match opt_str_arg(attrs_json, "attrs_json")? {
            Some(s) => parse_json(s, "attributes")?,
            None => AttributeDocument::Single(Default::default()),
        };
        let timeline = doc.timeline(&vocab, &history)?;
        let config = FitConfig {
            mode: match mode {
                BremLikelihood::Temporal => LikelihoodMode::Temporal,
                BremLikelihood::Ordinal => LikelihoodMode::Ordinal,
            },
            ..FitConfig::default()
        };
        let fit = fit_mle(&history, timeline.as_slice(), &specs, &config)?;
        let doc = serde_json::json!({
            "theta": fit.theta_star,
            "std_errors": fit.std_errors,
            "log_lik": fit.log_lik,
            "converged": fit.converged,
        });
        put_string(out, to_json(&doc)?)?;
        if fit.converged {
            Ok(())
        } else {
            Err(Fail::Status(BremStatus::NotConverged, "fit did not converge".into()))
        }
    })
}

/// Runs the paired experiment described by a TOML configuration (null for
/// the defaults) and returns the metrics table as JSON.
///
/// # Safety
/// `config_toml` must be null or nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn brem_compare(config_toml: *const c_char, out: *mut *mut c_char) -> BremStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = match opt_str_arg(config_toml, "config_toml")? {
            Some(s) => HarnessConfig::from_toml(s)?,
            None => HarnessConfig::default(),
        };
        let grounding = grounding_run(&cfg)?;
        let run = run_compare(&cfg, &grounding, false)?;
        put_string(out, to_json(&run.table)?)
    })
}
