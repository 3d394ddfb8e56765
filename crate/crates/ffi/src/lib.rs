//! C ABI over the `jumpfolio` core.
//!
//! Conventions: every fallible function returns a [`JfStatus`] and writes results through
//! out-pointers; on failure a message is available from [`jf_last_error`] on the same
//! thread. Handles are opaque and must be released with their `_free` function. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::slice;

use jumpfolio::comonotonic::{self, BoundConstants};
use jumpfolio::model::ParamsDocument;
use jumpfolio::numerics;
use jumpfolio::optimizer::{self, ReferenceWeights};
use jumpfolio::simulation;
use jumpfolio::{Error, MarketParams, PortfolioSpec, RiskBudget, WealthFloor};

/// Result code of every fallible call. Values 2–4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Infeasible = 3,
    Degenerate = 4,
    Panic = 99,
}

/// Solver for [`jf_optimize`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JfMethod {
    /// Closed form with jump mgfs at the unconstrained optimum.
    ClosedForm = 0,
    /// Closed form with jump mgfs at unit exposure.
    ClosedFormUnit = 1,
    /// Bisection with every constant evaluated at the trial weights.
    Bisection = 2,
}

/// Opaque market parameters.
pub struct JfMarket {
    inner: MarketParams,
}

/// Opaque portfolio: weights and endowment schedule.
pub struct JfPortfolio {
    inner: PortfolioSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> JfStatus {
    match e.exit_code() {
        3 => JfStatus::Infeasible,
        4 => JfStatus::Degenerate,
        _ => JfStatus::InvalidInput,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, recording the error message and mapping failures and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JfStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JfStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            JfStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            JfStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn array<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn array_mut<'a>(p: *mut f64, len: usize, name: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn jf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn jf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses market parameters from a JSON document (portfolio fields are ignored).
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out_market` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jf_market_from_json(json: *const c_char, out_market: *mut *mut JfMarket) -> JfStatus {
    guard(|| {
        let slot = out(out_market, "out_market")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Input(format!("params JSON is not UTF-8: {e}")))?;
        let doc = ParamsDocument::from_json(text)?;
        *slot = Box::into_raw(Box::new(JfMarket { inner: doc.market }));
        Ok(())
    })
}

/// Number of risky assets; 0 for NULL.
///
/// # Safety
/// `market` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jf_market_dim(market: *const JfMarket) -> usize {
    market.as_ref().map_or(0, |m| m.inner.m)
}

/// # Safety
/// `market` must be NULL or a handle from [`jf_market_from_json`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn jf_market_free(market: *mut JfMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Creates a portfolio from `m` weights and `tau` endowments `α_0..α_{τ−1}`.
///
/// # Safety
/// `weights` and `endowments` must point to `m` and `tau` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn jf_portfolio_new(
    weights: *const f64,
    m: usize,
    endowments: *const f64,
    tau: usize,
    out_portfolio: *mut *mut JfPortfolio,
) -> JfStatus {
    guard(|| {
        let slot = out(out_portfolio, "out_portfolio")?;
        *slot = ptr::null_mut();
        let w = array(weights, m, "weights")?.to_vec();
        let a = array(endowments, tau, "endowments")?.to_vec();
        let ps = PortfolioSpec::new(w, a);
        if ps.weights.is_empty() {
            return Err(Error::InvalidParams("portfolio needs at least one weight".into()).into());
        }
        ps.validate(ps.weights.len())?;
        *slot = Box::into_raw(Box::new(JfPortfolio { inner: ps }));
        Ok(())
    })
}

/// # Safety
/// `portfolio` must be NULL or a handle from [`jf_portfolio_new`] not freed yet.
#[no_mangle]
pub unsafe extern "C" fn jf_portfolio_free(portfolio: *mut JfPortfolio) {
    if !portfolio.is_null() {
        drop(Box::from_raw(portfolio));
    }
}

unsafe fn bound_constants(market: *const JfMarket, portfolio: *const JfPortfolio, p: f64) -> Result<BoundConstants, Failure> {
    let mp = &reference(market, "market")?.inner;
    let ps = &reference(portfolio, "portfolio")?.inner;
    Ok(BoundConstants::new(mp, ps, p)?)
}

/// Bound constants as a JSON object; free the string with [`jf_string_free`].
///
/// # Safety
/// Handles must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jf_bound_constants_json(
    market: *const JfMarket,
    portfolio: *const JfPortfolio,
    p: f64,
    out_json: *mut *mut c_char,
) -> JfStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = ptr::null_mut();
        *slot = into_c_string(bound_constants(market, portfolio, p)?.to_json());
        Ok(())
    })
}

/// `CVaR_{1−p}(−W'^L)` of the linearized comonotonic lower bound.
///
/// # Safety
/// Handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jf_cvar_bound(market: *const JfMarket, portfolio: *const JfPortfolio, p: f64, out_value: *mut f64) -> JfStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = comonotonic::cvar_taylor_bound(&bound_constants(market, portfolio, p)?);
        Ok(())
    })
}

/// `E[W'^L]` of the linearized comonotonic lower bound.
///
/// # Safety
/// Handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jf_expected_bound(market: *const JfMarket, portfolio: *const JfPortfolio, out_value: *mut f64) -> JfStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        // p does not enter the expectation; any valid level builds the constants.
        *slot = comonotonic::expected_taylor_bound(&bound_constants(market, portfolio, 0.05)?);
        Ok(())
    })
}

/// Simulates `n_paths` terminal wealths into `out_samples` (length `n_paths`).
/// Output depends only on the inputs and `seed`, never on the thread count.
///
/// # Safety
/// Handles must be live; `out_samples` must hold `n_paths` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn jf_simulate_terminal_wealth(
    market: *const JfMarket,
    portfolio: *const JfPortfolio,
    n_paths: usize,
    seed: u64,
    out_samples: *mut f64,
) -> JfStatus {
    guard(|| {
        let mp = &reference(market, "market")?.inner;
        let ps = &reference(portfolio, "portfolio")?.inner;
        let dest = array_mut(out_samples, n_paths, "out_samples")?;
        let dist = simulation::simulate_terminal_wealth(mp, ps, n_paths, seed)?;
        dest.copy_from_slice(&dist.samples);
        Ok(())
    })
}

/// Optimal constant-mix weights for stop-loss rate `k_star` at tail level `p`.
/// Writes `m` weights and the Kelly-ray fraction `q`.
///
/// # Safety
/// `market` must be live; `endowments` must hold `tau` doubles and `out_weights` `m` doubles
/// where `m` is the market dimension; `out_q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jf_optimize(
    market: *const JfMarket,
    endowments: *const f64,
    tau: usize,
    p: f64,
    k_star: f64,
    method: JfMethod,
    out_weights: *mut f64,
    m: usize,
    out_q: *mut f64,
) -> JfStatus {
    guard(|| {
        let mp = &reference(market, "market")?.inner;
        let alphas = array(endowments, tau, "endowments")?;
        if m != mp.m {
            return Err(Error::DimensionMismatch(format!("output holds {m} weights, market has {}", mp.m)).into());
        }
        let weights = array_mut(out_weights, m, "out_weights")?;
        let q_slot = out(out_q, "out_q")?;
        let rb = RiskBudget { p, floor: WealthFloor::StopLoss(k_star), c0: None };
        let res = match method {
            JfMethod::ClosedForm => optimizer::solve_q_closed_form(mp, alphas, &rb, &ReferenceWeights::UnconstrainedOptimum)?,
            JfMethod::ClosedFormUnit => optimizer::solve_q_closed_form(mp, alphas, &rb, &ReferenceWeights::UnitExposure)?,
            JfMethod::Bisection => optimizer::solve_q_bisection(mp, alphas, &rb)?,
        };
        weights.copy_from_slice(&res.weights);
        *q_slot = res.q;
        Ok(())
    })
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jf_normal_quantile(p: f64, out_value: *mut f64) -> JfStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = numerics::std_normal_quantile(p)?;
        Ok(())
    })
}
