//! Wealth must stay non-negative and the surrender charge is below the
//! critical charge `p*`: the retiree surrenders at `w = 0` as in the
//! high-charge case, but also buys annuity income whenever wealth exceeds
//! the purchase level `b (c - a)`, well before the safe level.
//!
//! Above the purchase level the value is found by buying the income `da`
//! that lands the state back on the purchase level,
//! `w - a_bar da = b (c - a - da)`.

use crate::dual::DualSlice;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{expand_bracket_up, find_root_monotone, RootConfig};
use crate::restricted_high::{critical_charge, hazard_loading, A_TRUNCATION, REGIME_TOL};
use crate::unrestricted::{require_closed_form_params, weighted_power_h};

/// Coefficients of the quadratic `alpha3 b^2 - (alpha2 - alpha1) b - alpha4 = 0`
/// satisfied by the purchase slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurchaseQuadratic {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl PurchaseQuadratic {
    fn discriminant(&self) -> f64 {
        let d = self.alpha2 - self.alpha1;
        d * d + 4.0 * self.alpha3 * self.alpha4
    }

    /// Both roots, larger first.
    pub fn roots(&self) -> Result<(f64, f64)> {
        let disc = self.discriminant();
        if !(disc >= 0.0) || !(self.alpha3 > 0.0) {
            return Err(Error::Solve(format!(
                "purchase-slope quadratic has no real root ({self:?})"
            )));
        }
        let d = self.alpha2 - self.alpha1;
        let s = disc.sqrt();
        Ok(((d + s) / (2.0 * self.alpha3), (d - s) / (2.0 * self.alpha3)))
    }
}

/// Residual `L h(x) - (1/r - (1 - p) a_bar)` of the ratio equation for
/// charge `p`; negative at `x = 1` and increasing.
pub fn x_residual_low(model: &Model, x: f64, p: f64) -> f64 {
    let k = model.consts();
    let r = model.params().r;
    hazard_loading(model) * weighted_power_h(k.b1, k.b2, x) - (1.0 / r - (1.0 - p) * k.a_bar)
}

pub fn solve_x_low_for(model: &Model, p: f64) -> Result<f64> {
    require_closed_form_params(model)?;
    let f = |x: f64| x_residual_low(model, x, p);
    let (lo, hi) = expand_bracket_up(f, 1.0)
        .map_err(|e| Error::InvalidParams(format!("x-equation has no root: {e}")))?;
    find_root_monotone(f, lo, hi, &RootConfig::default())
}

/// The two partial sums shared by the quadratic and the exponent.
fn partial_terms(model: &Model, x: f64) -> (f64, f64) {
    let k = model.consts();
    let (b1, b2) = (k.b1, k.b2);
    let inv_r = 1.0 / model.params().r;
    let l = hazard_loading(model);
    let t1 = l * (b1 - 1.0) * b2 / (b1 - b2) * (x.powf(b2 - b1) - 1.0)
        + inv_r * (1.0 - x.powf(1.0 - b1));
    let t2 = l * b1 * (1.0 - b2) / (b1 - b2) * (x.powf(b1 - b2) - 1.0)
        + inv_r * (1.0 - x.powf(1.0 - b2));
    (t1, t2)
}

pub fn purchase_quadratic(model: &Model, x: f64) -> PurchaseQuadratic {
    let k = model.consts();
    let (b1, b2) = (k.b1, k.b2);
    let inv_r = 1.0 / model.params().r;
    let u1 = 1.0 - x.powf(1.0 - b1);
    let u2 = 1.0 - x.powf(1.0 - b2);
    let (t1, t2) = partial_terms(model, x);
    PurchaseQuadratic {
        alpha1: -inv_r * ((b1 - 1.0) * u2 + (1.0 - b2) * u1),
        alpha2: (b1 - 1.0) * t1 + (1.0 - b2) * t2,
        alpha3: b1 - b2,
        alpha4: -inv_r * ((b1 - 1.0) * t1 * u2 + (1.0 - b2) * t2 * u1),
    }
}

/// Exponent `K` in `y0(a) = (c/(c - a))^K y0(0)` for purchase slope `b`.
pub fn k_exponent_low(model: &Model, x: f64, b: f64) -> f64 {
    let k = model.consts();
    let inv_r = 1.0 / model.params().r;
    let (_, t2) = partial_terms(model, x);
    (t2 - b) / ((1.0 - k.b1) * (-b + inv_r * (1.0 - x.powf(1.0 - k.b2))))
}

/// `y0(0) = -psi_w(0, 0)`.
pub fn y0_at_zero_low(model: &Model, x: f64, b: f64) -> f64 {
    let k = model.consts();
    let (b1, b2) = (k.b1, k.b2);
    let c = model.params().c;
    let inv_r = 1.0 / model.params().r;
    let inv = c / b1 * x.powf(b1 - 1.0) / (x.powf(b1 - b2) - 1.0)
        * (-b + inv_r * (1.0 - x.powf(1.0 - b2)))
        + c / b2 * x.powf(b2 - 1.0) / (x.powf(b2 - b1) - 1.0)
            * (-b + inv_r * (1.0 - x.powf(1.0 - b1)))
        + c * inv_r;
    1.0 / inv
}

/// Purchase slope for charge `p` without checking which regime `p` is in.
/// At `p = p*` it equals `a_bar`; this is what a charge sweep up to the
/// critical value needs.
pub fn purchase_slope_for(model: &Model, p: f64) -> Result<f64> {
    let x = solve_x_low_for(model, p)?;
    Ok(purchase_quadratic(model, x).roots()?.0)
}

/// Purchase slopes on `p_k = p* k/n`, `k = 1..=n`.
pub fn purchase_slope_sweep(model: &Model, n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::Config("sweep needs at least one point".into()));
    }
    let ps = critical_charge(model)?;
    (1..=n)
        .map(|k| {
            let p = ps * k as f64 / n as f64;
            Ok((p, purchase_slope_for(model, p)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RestrictedLowSolution {
    model: Model,
    x: f64,
    quadratic: PurchaseQuadratic,
    b: f64,
    k_exp: f64,
    p_star: f64,
    y0_at_zero: f64,
    cfg: RootConfig,
}

impl RestrictedLowSolution {
    pub fn solve(model: &Model) -> Result<Self> {
        require_closed_form_params(model)?;
        let p = model.params().p;
        let ps = critical_charge(model)?;
        if p >= ps - REGIME_TOL {
            return Err(Error::Regime(format!(
                "surrender charge p = {p} is above the critical charge p* = {ps}; use the high-charge solver"
            )));
        }
        let x = solve_x_low_for(model, p)?;
        let quadratic = purchase_quadratic(model, x);
        let (b, _) = quadratic.roots()?;
        let a_bar = model.consts().a_bar;
        if !(b > 0.0 && b < a_bar) {
            return Err(Error::Solve(format!(
                "purchase slope {b} outside (0, {a_bar})"
            )));
        }
        Ok(RestrictedLowSolution {
            model: *model,
            x,
            quadratic,
            b,
            k_exp: k_exponent_low(model, x, b),
            p_star: ps,
            y0_at_zero: y0_at_zero_low(model, x, b),
            cfg: RootConfig::default(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn quadratic(&self) -> &PurchaseQuadratic {
        &self.quadratic
    }

    /// Purchase level per unit of uncovered consumption.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k_exp(&self) -> f64 {
        self.k_exp
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn y0_at_zero(&self) -> f64 {
        self.y0_at_zero
    }

    fn covers_consumption(&self, a: f64) -> bool {
        a >= self.model.params().c * (1.0 - A_TRUNCATION)
    }

    fn check_a(&self, a: f64) -> Result<()> {
        let c = self.model.params().c;
        if !(a >= 0.0 && !self.covers_consumption(a)) {
            return Err(Error::Domain(format!(
                "annuity income {a} outside [0, {c})"
            )));
        }
        Ok(())
    }

    /// `b (c - a)`.
    pub fn purchase_level(&self, a: f64) -> Result<f64> {
        self.check_a(a)?;
        Ok(self.b * (self.model.params().c - a))
    }

    /// `(0, (c - a) a_bar)`; the part above the purchase level is crossed
    /// instantly by buying income.
    pub fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        self.check_a(a)?;
        Ok((0.0, self.model.safe_level_restricted(a)?))
    }

    /// Income bought from `(w, a)` to land on the purchase level; zero at
    /// or below it.
    pub fn jump_purchase(&self, w: f64, a: f64) -> Result<f64> {
        let wb = self.purchase_level(a)?;
        if w <= wb {
            return Ok(0.0);
        }
        Ok((w - wb) / (self.model.consts().a_bar - self.b))
    }

    /// `(y0(a), y_b(a))`: dual values at zero wealth and at the purchase level.
    pub fn boundaries(&self, a: f64) -> Result<(f64, f64)> {
        self.check_a(a)?;
        let c = self.model.params().c;
        let y0 = (c / (c - a)).powf(self.k_exp) * self.y0_at_zero;
        Ok((y0, y0 / self.x))
    }

    pub fn coefficients(&self, a: f64) -> Result<(f64, f64)> {
        let (_, yb) = self.boundaries(a)?;
        let k = self.model.consts();
        let (b1, b2, x) = (k.b1, k.b2, self.x);
        let p = self.model.params();
        let wb = self.b * (p.c - a);
        let slope = (p.c - a) / p.r;
        Ok((
            1.0 / b1 * yb.powf(1.0 - b1) / (x.powf(b1 - b2) - 1.0)
                * (-wb + slope * (1.0 - x.powf(1.0 - b2))),
            1.0 / b2 * yb.powf(1.0 - b2) / (x.powf(b2 - b1) - 1.0)
                * (-wb + slope * (1.0 - x.powf(1.0 - b1))),
        ))
    }

    /// Dual on `[y_b, y0]`, covering wealth `[0, b (c - a)]`.
    pub fn dual_slice(&self, a: f64) -> Result<DualSlice> {
        let (y0, yb) = self.boundaries(a)?;
        let (d1, d2) = self.coefficients(a)?;
        let k = self.model.consts();
        let p = self.model.params();
        Ok(DualSlice {
            d1,
            d2,
            b1: k.b1,
            b2: k.b2,
            slope: (p.c - a) / p.r,
            y_low: yb,
            y_high: y0,
        })
    }

    pub fn psi(&self, w: f64, a: f64) -> Result<f64> {
        if a >= 0.0 && self.covers_consumption(a) && w >= 0.0 {
            return Ok(0.0);
        }
        let (_, w_safe) = self.wealth_domain(a)?;
        if !(w >= 0.0 && w <= w_safe * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "wealth {w} outside [0, {w_safe}] at a = {a}"
            )));
        }
        if w >= w_safe {
            return Ok(0.0);
        }
        let wb = self.purchase_level(a)?;
        if w > wb {
            let a_next = a + self.jump_purchase(w, a)?;
            if self.covers_consumption(a_next) {
                return Ok(0.0);
            }
            let w_next = self.purchase_level(a_next)?;
            return Ok(self
                .dual_slice(a_next)?
                .conjugate(w_next, &self.cfg)?
                .clamp(0.0, 1.0));
        }
        Ok(self.dual_slice(a)?.conjugate(w, &self.cfg)?.clamp(0.0, 1.0))
    }

    /// Feedback investment below the purchase level. At or above it the
    /// optimal control is a purchase, reported as [`Error::PurchaseRegion`].
    pub fn pi_star(&self, w: f64, a: f64) -> Result<f64> {
        let wb = self.purchase_level(a)?;
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("wealth {w} is negative")));
        }
        if w >= wb {
            return Err(Error::PurchaseRegion {
                w,
                a,
                delta_a: self.jump_purchase(w, a)?,
            });
        }
        let slice = self.dual_slice(a)?;
        let y = slice.conjugate_point(w, &self.cfg)?;
        Ok(slice.investment_at(self.model.merton_factor(), y))
    }
}
