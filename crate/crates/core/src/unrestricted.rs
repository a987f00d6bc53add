//! Borrowing against the annuity allowed: wealth may go negative as long as
//! wealth plus the surrender value of the annuity stays positive.
//!
//! The optimal policy never surrenders and buys only at the safe level, so
//! `a` is frozen inside the domain and `psi(., a)` is the convex conjugate of
//! a dual slice whose two free boundaries keep a constant ratio `x`.

use crate::dual::DualSlice;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{expand_bracket_up, find_root_monotone, RootConfig};

/// Where a wealth level sits relative to the unrestricted domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Ruined,
    Interior,
    Safe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub region: Region,
}

#[derive(Debug, Clone)]
pub struct UnrestrictedSolution {
    model: Model,
    x: f64,
    cfg: RootConfig,
}

pub(crate) fn require_closed_form_params(model: &Model) -> Result<()> {
    let p = model.params();
    if !(p.r > 0.0) {
        return Err(Error::InvalidParams(format!(
            "r > 0 required by the closed-form solvers (r = {})",
            p.r
        )));
    }
    if !(p.c > 0.0) {
        return Err(Error::InvalidParams(format!(
            "c > 0 required by the closed-form solvers (c = {})",
            p.c
        )));
    }
    Ok(())
}

/// `B1(1-B2)/(B1-B2) z^(B1-1) + B2(B1-1)/(B1-B2) z^(B2-1)`; equals 1 at z = 1
/// and is increasing for z >= 1.
pub fn weighted_power_f(b1: f64, b2: f64, z: f64) -> f64 {
    let d = b1 - b2;
    b1 * (1.0 - b2) / d * z.powf(b1 - 1.0) + b2 * (b1 - 1.0) / d * z.powf(b2 - 1.0)
}

/// `(1-B2)/(B1-B2) z^(B1-1) + (B1-1)/(B1-B2) z^(B2-1)`; equals 1 at z = 1
/// and is non-decreasing for z >= 1.
pub fn weighted_power_h(b1: f64, b2: f64, z: f64) -> f64 {
    let d = b1 - b2;
    (1.0 - b2) / d * z.powf(b1 - 1.0) + (b1 - 1.0) / d * z.powf(b2 - 1.0)
}

/// Gap `w_s(a) - (c - a)/r` between the safe level and the perpetuity value
/// of the consumption shortfall; negative throughout the domain.
fn shortfall_gap(model: &Model, a: f64) -> f64 {
    let p = model.params();
    p.p * p.c / (p.p * p.r + p.lambda_o) - a * model.consts().a_bar - (p.c - a) / p.r
}

/// Residual of the equation pinning the boundary ratio `x` at income `a`:
/// the ruin-level first-order condition after eliminating `D1`, `D2`.
/// Positive at `x = 1`, strictly decreasing, tends to `-inf`.
pub fn x_residual_unrestricted(model: &Model, x: f64, a: f64) -> f64 {
    let k = model.consts();
    let p = model.params();
    let gap = shortfall_gap(model, a);
    let w_ruin = -(1.0 - p.p) * k.a_bar * a;
    gap * weighted_power_f(k.b1, k.b2, x) + (p.c - a) / p.r - w_ruin
}

/// Boundary ratio `x = y_ruin/y_safe`, solved at `a = 0`.
pub fn solve_x_unrestricted(model: &Model) -> Result<f64> {
    solve_x_unrestricted_at(model, 0.0)
}

/// Same equation solved at another income level; the root does not depend
/// on `a`, which makes this a drift check on the constant-ratio shortcut.
pub fn solve_x_unrestricted_at(model: &Model, a: f64) -> Result<f64> {
    require_closed_form_params(model)?;
    let f = |x: f64| x_residual_unrestricted(model, x, a);
    let (lo, hi) = expand_bracket_up(f, 1.0)
        .map_err(|e| Error::InvalidParams(format!("x-equation has no root: {e}")))?;
    find_root_monotone(f, lo, hi, &RootConfig::default())
}

impl UnrestrictedSolution {
    pub fn solve(model: &Model) -> Result<Self> {
        let x = solve_x_unrestricted(model)?;
        Ok(UnrestrictedSolution {
            model: *model,
            x,
            cfg: RootConfig::default(),
        })
    }

    /// Solve, then re-solve the ratio equation at a few interior incomes and
    /// fail if any root drifts from the `a = 0` value.
    pub fn solve_checked(model: &Model) -> Result<Self> {
        let sol = Self::solve(model)?;
        let a_max = model.a_max_unrestricted();
        for frac in [0.25, 0.5, 0.75] {
            let x_a = solve_x_unrestricted_at(model, frac * a_max)?;
            if (x_a - sol.x).abs() > 1e-9 * sol.x {
                return Err(Error::Solve(format!(
                    "boundary ratio drifts with a: x(0) = {}, x({}) = {x_a}",
                    sol.x,
                    frac * a_max
                )));
            }
        }
        Ok(sol)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn a_max(&self) -> f64 {
        self.model.a_max_unrestricted()
    }

    fn check_a(&self, a: f64) -> Result<()> {
        let a_max = self.a_max();
        if !(a >= 0.0 && a < a_max) {
            return Err(Error::Domain(format!(
                "annuity income {a} outside [0, {a_max}) of the unrestricted domain"
            )));
        }
        Ok(())
    }

    /// `(w_ruin(a), w_safe(a))`.
    pub fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        let hi = self.model.safe_level_unrestricted(a)?;
        let lo = self.model.ruin_level_unrestricted(a)?;
        Ok((lo, hi))
    }

    /// Dual free boundaries `(y_ruin(a), y_safe(a))`.
    pub fn boundaries(&self, a: f64) -> Result<(f64, f64)> {
        self.check_a(a)?;
        let k = self.model.consts();
        let p = self.model.params();
        let inv = (p.c - a) / p.r
            + (1.0 - p.p) * k.a_bar * a
            + shortfall_gap(&self.model, a) * weighted_power_h(k.b1, k.b2, self.x);
        let y_ruin = 1.0 / inv;
        Ok((y_ruin, y_ruin / self.x))
    }

    /// `(D1(a), D2(a))`.
    pub fn coefficients(&self, a: f64) -> Result<(f64, f64)> {
        let (_, y_safe) = self.boundaries(a)?;
        let k = self.model.consts();
        let gap = shortfall_gap(&self.model, a);
        let d = k.b1 - k.b2;
        let d1 = (1.0 - k.b2) / d * y_safe.powf(1.0 - k.b1) * gap;
        let d2 = (k.b1 - 1.0) / d * y_safe.powf(1.0 - k.b2) * gap;
        Ok((d1, d2))
    }

    pub fn dual_slice(&self, a: f64) -> Result<DualSlice> {
        let (y_ruin, y_safe) = self.boundaries(a)?;
        let (d1, d2) = self.coefficients(a)?;
        let k = self.model.consts();
        let p = self.model.params();
        Ok(DualSlice {
            d1,
            d2,
            b1: k.b1,
            b2: k.b2,
            slope: (p.c - a) / p.r,
            y_low: y_safe,
            y_high: y_ruin,
        })
    }

    /// Ruin probability with a flag telling whether `w` was inside the domain
    /// or clamped to one of its boundary values.
    pub fn psi_flagged(&self, w: f64, a: f64) -> Result<PsiValue> {
        let a_max = self.a_max();
        if !(a >= 0.0 && a <= a_max + crate::model::MEETING_POINT_TOL * self.model.params().c) {
            return Err(Error::Domain(format!(
                "annuity income {a} outside [0, {a_max}] of the unrestricted domain"
            )));
        }
        let (w_ruin, w_safe) = self.wealth_domain(a)?;
        if w >= w_safe {
            return Ok(PsiValue {
                value: 0.0,
                region: Region::Safe,
            });
        }
        if w <= w_ruin || self.model.at_meeting_point(a) {
            return Ok(PsiValue {
                value: 1.0,
                region: Region::Ruined,
            });
        }
        let slice = self.dual_slice(a)?;
        let value = slice.conjugate(w, &self.cfg)?.clamp(0.0, 1.0);
        Ok(PsiValue {
            value,
            region: Region::Interior,
        })
    }

    pub fn psi(&self, w: f64, a: f64) -> Result<f64> {
        Ok(self.psi_flagged(w, a)?.value)
    }

    /// Amount held in the risky asset; defined strictly inside the domain.
    pub fn pi_star(&self, w: f64, a: f64) -> Result<f64> {
        self.check_a(a)?;
        let (w_ruin, w_safe) = self.wealth_domain(a)?;
        if !(w > w_ruin && w < w_safe) {
            return Err(Error::Boundary { w, a });
        }
        let slice = self.dual_slice(a)?;
        let y = slice.conjugate_point(w, &self.cfg)?;
        Ok(slice.investment_at(self.model.merton_factor(), y))
    }
}
