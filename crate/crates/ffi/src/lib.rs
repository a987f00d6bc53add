//! C ABI over the closed-form solvers and the Monte Carlo simulator.
//!
//! Solutions are opaque handles created by [`ar_solution_new`] and released
//! with [`ar_solution_free`]. Every fallible call returns an [`ArStatus`];
//! on failure [`ar_last_error`] describes the cause for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use annuity_ruin::restricted_high::critical_charge;
use annuity_ruin::verify::mc::{mc_simulate, SimConfig};
use annuity_ruin::{Error, Model, ModelParams, PortfolioState, Regime, RegimeSolution};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Domain = 3,
    /// Charge on the wrong side of the critical charge for the requested regime.
    Regime = 4,
    /// Investment rule undefined on a free boundary.
    Boundary = 5,
    /// State is in the purchase region; the output holds the income to buy.
    PurchaseRegion = 6,
    /// Root finding or another numerical step failed.
    Numerical = 7,
    /// Simulation configuration or step size rejected.
    Config = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArRegime {
    Unrestricted = 0,
    RestrictedHigh = 1,
    RestrictedLow = 2,
}

/// Model primitives, mirroring the Rust `ModelParams`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda_s: f64,
    pub lambda_o: f64,
    pub c: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArSimConfig {
    pub n_paths: u64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub income_cutoff: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArSimResult {
    pub estimate: f64,
    pub std_err: f64,
    pub n_ruin: u64,
    pub n_safe: u64,
    pub n_censored: u64,
}

/// Opaque solved model.
pub struct ArSolution {
    inner: RegimeSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> ArStatus {
    match err {
        Error::InvalidParams(_) => ArStatus::InvalidParams,
        Error::Domain(_) => ArStatus::Domain,
        Error::Regime(_) => ArStatus::Regime,
        Error::Boundary { .. } => ArStatus::Boundary,
        Error::PurchaseRegion { .. } => ArStatus::PurchaseRegion,
        Error::StepSize(_) | Error::Config(_) => ArStatus::Config,
        _ => ArStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic for [`ar_last_error`].
fn guarded<F>(f: F) -> ArStatus
where
    F: FnOnce() -> Result<(), ArStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic");
            ArStatus::Panic
        }
    }
}

fn fail(err: Error) -> ArStatus {
    set_last_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> ArStatus {
    set_last_error(&format!("{what} is null"));
    ArStatus::NullPointer
}

impl From<ArParams> for ModelParams {
    fn from(p: ArParams) -> Self {
        ModelParams {
            r: p.r,
            mu: p.mu,
            sigma: p.sigma,
            lambda_s: p.lambda_s,
            lambda_o: p.lambda_o,
            c: p.c,
            p: p.p,
        }
    }
}

/// Base scenario with surrender charge `p`.
#[no_mangle]
pub extern "C" fn ar_params_base(p: f64) -> ArParams {
    let b = ModelParams::base(p);
    ArParams {
        r: b.r,
        mu: b.mu,
        sigma: b.sigma,
        lambda_s: b.lambda_s,
        lambda_o: b.lambda_o,
        c: b.c,
        p: b.p,
    }
}

/// Default simulation settings: 100000 paths, dt = 0.001, 200-year horizon.
#[no_mangle]
pub extern "C" fn ar_sim_config_default() -> ArSimConfig {
    let d = SimConfig::default();
    ArSimConfig {
        n_paths: d.n_paths as u64,
        dt: d.dt,
        horizon: d.horizon,
        seed: d.seed,
        income_cutoff: d.income_cutoff,
    }
}

/// Message for the last failed call on this thread. Valid until the next
/// call into this library from the same thread; never null.
#[no_mangle]
pub extern "C" fn ar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ar_status_name(status: ArStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ArStatus::Ok => b"ok\0",
        ArStatus::NullPointer => b"null pointer\0",
        ArStatus::InvalidParams => b"invalid parameters\0",
        ArStatus::Domain => b"outside domain\0",
        ArStatus::Regime => b"wrong regime\0",
        ArStatus::Boundary => b"on boundary\0",
        ArStatus::PurchaseRegion => b"in purchase region\0",
        ArStatus::Numerical => b"numerical failure\0",
        ArStatus::Config => b"invalid configuration\0",
        ArStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Critical surrender charge for `params`.
///
/// # Safety
/// `params` and `out` must be null or valid for reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn ar_critical_charge(params: *const ArParams, out: *mut f64) -> ArStatus {
    guarded(|| {
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = Model::new((*params).into()).map_err(fail)?;
        let ps = critical_charge(&model).map_err(fail)?;
        unsafe { *out = ps };
        Ok(())
    })
}

/// Solve for `params`; `restricted` keeps wealth non-negative. On success
/// `*out` owns a new handle, to be released with [`ar_solution_free`].
///
/// # Safety
/// `params` must be null or valid for reads; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_solution_new(
    params: *const ArParams,
    restricted: bool,
    out: *mut *mut ArSolution,
) -> ArStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = ptr::null_mut() };
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        let model = Model::new((*params).into()).map_err(fail)?;
        let inner = RegimeSolution::solve(&model, restricted).map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(ArSolution { inner })) };
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `solution` must be null or a handle from [`ar_solution_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ar_solution_free(solution: *mut ArSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

unsafe fn handle<'a>(solution: *const ArSolution) -> Result<&'a RegimeSolution, ArStatus> {
    unsafe { solution.as_ref() }
        .map(|s| &s.inner)
        .ok_or_else(|| null("solution"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), ArStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = value };
    Ok(())
}

/// # Safety
/// `solution` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_solution_regime(
    solution: *const ArSolution,
    out: *mut ArRegime,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        let regime = match sol.regime() {
            Regime::Unrestricted => ArRegime::Unrestricted,
            Regime::RestrictedHigh => ArRegime::RestrictedHigh,
            Regime::RestrictedLow => ArRegime::RestrictedLow,
        };
        unsafe { write(out, regime) }
    })
}

/// Wealth interval `[lo, hi]` at income `a`: ruin (or zero) to safe level.
///
/// # Safety
/// `solution` must be null or a live handle; `lo`, `hi` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_wealth_domain(
    solution: *const ArSolution,
    a: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        if lo.is_null() || hi.is_null() {
            return Err(null("lo or hi"));
        }
        let (l, h) = sol.wealth_domain(a).map_err(fail)?;
        unsafe {
            *lo = l;
            *hi = h;
        }
        Ok(())
    })
}

/// Minimum probability of lifetime ruin at `(w, a)`.
///
/// # Safety
/// `solution` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_psi(
    solution: *const ArSolution,
    w: f64,
    a: f64,
    out: *mut f64,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        let v = sol.psi(w, a).map_err(fail)?;
        unsafe { write(out, v) }
    })
}

/// Optimal amount in the risky asset at `(w, a)`. In the purchase region
/// returns [`ArStatus::PurchaseRegion`] and writes the income to buy.
///
/// # Safety
/// `solution` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_pi_star(
    solution: *const ArSolution,
    w: f64,
    a: f64,
    out: *mut f64,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        match sol.pi_star(w, a) {
            Ok(v) => unsafe { write(out, v) },
            Err(e @ Error::PurchaseRegion { delta_a, .. }) => {
                unsafe { write(out, delta_a) }?;
                Err(fail(e))
            }
            Err(e) => Err(fail(e)),
        }
    })
}

/// Income bought immediately at `(w, a)`; zero outside the purchase region.
///
/// # Safety
/// `solution` must be null or a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_purchase_at(
    solution: *const ArSolution,
    w: f64,
    a: f64,
    out: *mut f64,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        let v = sol.purchase_at(w, a).map_err(fail)?;
        unsafe { write(out, v) }
    })
}

/// Monte Carlo estimate of the ruin probability from `(w, a)`.
///
/// # Safety
/// `solution` must be null or a live handle; `config` null or valid for
/// reads; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ar_simulate(
    solution: *const ArSolution,
    w: f64,
    a: f64,
    config: *const ArSimConfig,
    out: *mut ArSimResult,
) -> ArStatus {
    guarded(|| {
        let sol = unsafe { handle(solution) }?;
        let cfg = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n_paths = usize::try_from(cfg.n_paths).map_err(|_| {
            fail(Error::Config(format!(
                "path count {} too large",
                cfg.n_paths
            )))
        })?;
        let sim = SimConfig {
            n_paths,
            dt: cfg.dt,
            horizon: cfg.horizon,
            seed: cfg.seed,
            income_cutoff: cfg.income_cutoff,
        };
        let start = PortfolioState::new(w, a).map_err(fail)?;
        let res = mc_simulate(sol, start, &sim).map_err(fail)?;
        unsafe {
            write(
                out,
                ArSimResult {
                    estimate: res.estimate,
                    std_err: res.std_err,
                    n_ruin: res.n_ruin as u64,
                    n_safe: res.n_safe as u64,
                    n_censored: res.n_censored as u64,
                },
            )
        }
    })
}
