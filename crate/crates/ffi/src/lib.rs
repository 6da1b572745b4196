//! C ABI over the simulator.
//!
//! Scenarios are opaque handles created from TOML text. Every fallible call
//! returns a [`DrhcStatus`]; on failure [`drhc_last_error`] describes the error
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use drhc::costs::{self, CostProfile};
use drhc::scenario::Scenario;
use drhc::trial::{heuristic_e_c, run_setup};
use drhc::{Error, Vec3};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrhcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    RuntimeError = 4,
    Panic = 5,
}

/// Opaque scenario handle.
pub struct DrhcScenario {
    inner: Scenario,
}

/// Plain-data summary of one trial.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DrhcTrialOutcome {
    pub seed: u64,
    pub n_agents: u64,
    pub duration: f64,
    pub fraction_searched: f64,
    pub searched_tiles: u64,
    pub total_tiles: u64,
    pub collisions: u64,
    pub heuristic: f64,
}

/// Cost weights and shape constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrhcCostProfile {
    pub w_eta: f64,
    pub w_z: f64,
    pub w_g: f64,
    pub delta_min: f64,
    pub c_penalty: f64,
    pub alpha: f64,
    pub c_dist: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl From<CostProfile> for DrhcCostProfile {
    fn from(p: CostProfile) -> Self {
        DrhcCostProfile {
            w_eta: p.w_eta,
            w_z: p.w_z,
            w_g: p.w_g,
            delta_min: p.delta_min,
            c_penalty: p.c_penalty,
            alpha: p.alpha,
            c_dist: p.c_dist,
            z_min: p.z_min,
            z_max: p.z_max,
        }
    }
}

impl From<DrhcCostProfile> for CostProfile {
    fn from(p: DrhcCostProfile) -> Self {
        CostProfile {
            w_eta: p.w_eta,
            w_z: p.w_z,
            w_g: p.w_g,
            delta_min: p.delta_min,
            c_penalty: p.c_penalty,
            alpha: p.alpha,
            c_dist: p.c_dist,
            z_min: p.z_min,
            z_max: p.z_max,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> DrhcStatus {
    match e {
        Error::Config { .. } => DrhcStatus::ConfigError,
        _ => DrhcStatus::RuntimeError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DrhcStatus, String)>) -> DrhcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrhcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DrhcStatus::Panic
        }
    }
}

fn fail(e: Error) -> (DrhcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DrhcStatus, String) {
    (DrhcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn vec3(p: *const f64) -> Vec3 {
    Vec3::new(*p, *p.add(1), *p.add(2))
}

/// Message of the last failed call on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn drhc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn drhc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario from NUL-terminated TOML text.
///
/// # Safety
/// `toml` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drhc_scenario_from_toml(toml: *const c_char, out: *mut *mut DrhcScenario) -> DrhcStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| (DrhcStatus::InvalidUtf8, e.to_string()))?;
        let inner = Scenario::parse(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(DrhcScenario { inner }));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from [`drhc_scenario_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn drhc_scenario_free(scenario: *mut DrhcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of agents in the scenario, or 0 for null.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn drhc_scenario_n_agents(scenario: *const DrhcScenario) -> u64 {
    scenario.as_ref().map_or(0, |s| s.inner.n_agents as u64)
}

/// Replaces the scenario's cost profile after validating it.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn drhc_scenario_set_profile(
    scenario: *mut DrhcScenario,
    profile: *const DrhcCostProfile,
) -> DrhcStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        let p: CostProfile = (*profile.as_ref().ok_or_else(|| null("profile"))?).into();
        p.validate().map_err(fail)?;
        s.inner.profile = p;
        Ok(())
    })
}

/// Runs one trial of the scenario with `seed`.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drhc_run_trial(
    scenario: *const DrhcScenario,
    seed: u64,
    out: *mut DrhcTrialOutcome,
) -> DrhcStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let o = run_setup(&s.inner.setup(), seed).map_err(fail)?;
        *out = DrhcTrialOutcome {
            seed: o.seed,
            n_agents: o.n_agents as u64,
            duration: o.duration,
            fraction_searched: o.fraction_searched,
            searched_tiles: o.searched_tiles as u64,
            total_tiles: o.total_tiles as u64,
            collisions: o.collisions as u64,
            heuristic: o.heuristic,
        };
        Ok(())
    })
}

/// Writes the default cost profile to `out`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn drhc_profile_default(out: *mut DrhcCostProfile) -> DrhcStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = CostProfile::default().into();
        Ok(())
    })
}

/// Altitude-band cost of `z`.
///
/// # Safety
/// `profile` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn drhc_safety_cost(z: f64, profile: *const DrhcCostProfile, out: *mut f64) -> DrhcStatus {
    guard(|| {
        let p: CostProfile = (*profile.as_ref().ok_or_else(|| null("profile"))?).into();
        *out.as_mut().ok_or_else(|| null("out"))? = costs::safety_cost(z, &p);
        Ok(())
    })
}

/// Goal cost between a candidate and a goal, each three doubles.
///
/// # Safety
/// `candidate` and `goal` must point to 3 doubles; `profile` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drhc_goal_cost(
    candidate: *const f64,
    goal: *const f64,
    profile: *const DrhcCostProfile,
    out: *mut f64,
) -> DrhcStatus {
    guard(|| {
        if candidate.is_null() || goal.is_null() {
            return Err(null("candidate or goal"));
        }
        let p: CostProfile = (*profile.as_ref().ok_or_else(|| null("profile"))?).into();
        *out.as_mut().ok_or_else(|| null("out"))? = costs::goal_cost(vec3(candidate), vec3(goal), &p);
        Ok(())
    })
}

/// Cohesion cost of a candidate against `n` neighbor positions stored as `3n`
/// consecutive doubles.
///
/// # Safety
/// `candidate` must point to 3 doubles, `neighbors` to `3 * n` doubles (or be null
/// when `n` is 0); `profile` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn drhc_cohesion_cost(
    candidate: *const f64,
    neighbors: *const f64,
    n: usize,
    comm_range: f64,
    profile: *const DrhcCostProfile,
    out: *mut f64,
) -> DrhcStatus {
    guard(|| {
        if candidate.is_null() || (n > 0 && neighbors.is_null()) {
            return Err(null("candidate or neighbors"));
        }
        let p: CostProfile = (*profile.as_ref().ok_or_else(|| null("profile"))?).into();
        let ns: Vec<Vec3> = (0..n).map(|i| vec3(neighbors.add(3 * i))).collect();
        *out.as_mut().ok_or_else(|| null("out"))? = costs::cohesion_cost(vec3(candidate), &ns, comm_range, &p);
        Ok(())
    })
}

/// Trial heuristic from its components.
#[no_mangle]
pub extern "C" fn drhc_heuristic(duration: f64, fraction_searched: f64, collisions: u64, t_max: f64, n_agents: u64) -> f64 {
    heuristic_e_c(duration, fraction_searched, collisions as usize, t_max, n_agents as usize)
}
