//! Bracketed scalar root finding and inversion of the dual derivative.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_iter >= 1) {
            return Err(Error::Config(format!(
                "invalid root-finder configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Root of a continuous monotone `f` on `[lo, hi]` with `f(lo) f(hi) <= 0`.
///
/// Bisects until the bracket is below tolerance, then takes one secant step
/// across the final bracket if it lands inside and improves the residual.
pub fn find_root_monotone<F>(f: F, lo: f64, hi: f64, cfg: &RootConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }

    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= cfg.abs_tol + cfg.rel_tol * mid.abs() || mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations: cfg.max_iter,
            lo,
            hi,
        });
    }

    let mid = 0.5 * (lo + hi);
    let mut best = mid;
    let mut best_res = f(mid).abs();
    let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
    if secant > lo && secant < hi {
        let res = f(secant).abs();
        if res < best_res {
            best = secant;
            best_res = res;
        }
    }
    for (x, fx) in [(lo, f_lo), (hi, f_hi)] {
        if fx.abs() < best_res {
            best = x;
            best_res = fx.abs();
        }
    }
    Ok(best)
}

/// Doubles `hi` from `2 lo` until `f` changes sign relative to `f(lo)`.
pub fn expand_bracket_up<F>(f: F, lo: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo > 0.0) {
        return Err(Error::Config(format!(
            "bracket expansion needs lo > 0 (got {lo})"
        )));
    }
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    let limit = lo * 2f64.powi(64);
    let mut hi = 2.0 * lo;
    while hi <= limit {
        let f_hi = f(hi);
        if f_hi == 0.0 || f_hi.signum() != f_lo.signum() {
            return Ok((lo, hi));
        }
        hi *= 2.0;
    }
    Err(Error::Divergence { limit })
}

/// The `y` in `[y_lo, y_hi]` with `psi_hat_y(y) = w`, for a strictly
/// decreasing `psi_hat_y`.
///
/// `w` may overshoot the endpoint values by a rounding-sized amount; it is
/// clamped. Anything further out is a domain error.
pub fn invert_dual_derivative<F>(
    psi_hat_y: F,
    w: f64,
    y_lo: f64,
    y_hi: f64,
    cfg: &RootConfig,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let w_top = psi_hat_y(y_lo);
    let w_bottom = psi_hat_y(y_hi);
    let slack = 1e-12 * (1.0 + w_top.abs().max(w_bottom.abs()));
    if w >= w_top {
        if w - w_top <= slack {
            return Ok(y_lo);
        }
    } else if w <= w_bottom {
        if w_bottom - w <= slack {
            return Ok(y_hi);
        }
    } else {
        return find_root_monotone(|y| psi_hat_y(y) - w, y_lo, y_hi, cfg);
    }
    Err(Error::Domain(format!(
        "wealth {w} outside dual image [{w_bottom}, {w_top}] of [{y_lo}, {y_hi}]"
    )))
}
