//! Picks the closed-form solver that applies to a parameter set and exposes
//! all three behind one type.

use std::fmt;

use crate::dual::DualSlice;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::restricted_high::{critical_charge, RestrictedHighSolution, A_TRUNCATION, REGIME_TOL};
use crate::restricted_low::RestrictedLowSolution;
use crate::unrestricted::UnrestrictedSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Borrowing against the annuity allowed.
    Unrestricted,
    /// Wealth kept non-negative, surrender charge at or above `p*`.
    RestrictedHigh,
    /// Wealth kept non-negative, surrender charge below `p*`.
    RestrictedLow,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Unrestricted => "unrestricted",
            Regime::RestrictedHigh => "restricted: p >= p*",
            Regime::RestrictedLow => "restricted: p < p*",
        })
    }
}

impl Regime {
    pub fn is_restricted(self) -> bool {
        !matches!(self, Regime::Unrestricted)
    }
}

/// Regime for `model`, given whether wealth must stay non-negative.
pub fn classify(model: &Model, restricted: bool) -> Result<Regime> {
    if !restricted {
        return Ok(Regime::Unrestricted);
    }
    let ps = critical_charge(model)?;
    Ok(if model.params().p >= ps - REGIME_TOL {
        Regime::RestrictedHigh
    } else {
        Regime::RestrictedLow
    })
}

/// Anything that can be evaluated as a ruin probability on a regime's
/// domain. The checks in [`crate::verify`] are written against this so they
/// can be pointed at perturbed functions as well as at the closed forms.
pub trait ValueFunction: Sync {
    fn regime(&self) -> Regime;
    fn model(&self) -> &Model;
    /// Upper end of the income range, see [`RegimeSolution::a_end`].
    fn a_end(&self) -> f64;
    /// Lower wealth boundary and safe level at income `a`.
    fn wealth_domain(&self, a: f64) -> Result<(f64, f64)>;
    /// Wealth interval where the investment rule applies at income `a`.
    fn continuation_domain(&self, a: f64) -> Result<(f64, f64)>;
    fn psi(&self, w: f64, a: f64) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub enum RegimeSolution {
    Unrestricted(UnrestrictedSolution),
    RestrictedHigh(RestrictedHighSolution),
    RestrictedLow(RestrictedLowSolution),
}

impl RegimeSolution {
    pub fn solve(model: &Model, restricted: bool) -> Result<Self> {
        Self::solve_regime(model, classify(model, restricted)?)
    }

    /// Solve with an explicit regime; errors if `p` is on the wrong side of `p*`.
    pub fn solve_regime(model: &Model, regime: Regime) -> Result<Self> {
        Ok(match regime {
            Regime::Unrestricted => {
                RegimeSolution::Unrestricted(UnrestrictedSolution::solve(model)?)
            }
            Regime::RestrictedHigh => {
                RegimeSolution::RestrictedHigh(RestrictedHighSolution::solve(model)?)
            }
            Regime::RestrictedLow => {
                RegimeSolution::RestrictedLow(RestrictedLowSolution::solve(model)?)
            }
        })
    }

    pub fn regime(&self) -> Regime {
        match self {
            RegimeSolution::Unrestricted(_) => Regime::Unrestricted,
            RegimeSolution::RestrictedHigh(_) => Regime::RestrictedHigh,
            RegimeSolution::RestrictedLow(_) => Regime::RestrictedLow,
        }
    }

    pub fn model(&self) -> &Model {
        match self {
            RegimeSolution::Unrestricted(s) => s.model(),
            RegimeSolution::RestrictedHigh(s) => s.model(),
            RegimeSolution::RestrictedLow(s) => s.model(),
        }
    }

    /// Largest annuity income with a non-trivial value: the meeting point of
    /// the unrestricted boundaries, or `c` when wealth is restricted.
    pub fn a_end(&self) -> f64 {
        match self {
            RegimeSolution::Unrestricted(s) => s.a_max(),
            _ => self.model().params().c,
        }
    }

    /// Incomes on which the dual representation is evaluated directly:
    /// `[0, a_end)`, further truncated just below `c` when restricted.
    pub fn income_in_range(&self, a: f64) -> bool {
        match self {
            RegimeSolution::Unrestricted(s) => a >= 0.0 && a < s.a_max(),
            _ => a >= 0.0 && a < self.model().params().c * (1.0 - A_TRUNCATION),
        }
    }

    /// Lower wealth boundary and safe level at income `a`.
    pub fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        match self {
            RegimeSolution::Unrestricted(s) => s.wealth_domain(a),
            RegimeSolution::RestrictedHigh(s) => s.wealth_domain(a),
            RegimeSolution::RestrictedLow(s) => s.wealth_domain(a),
        }
    }

    /// Wealth interval on which the investment rule applies: the full domain,
    /// or `[0, b (c - a)]` when income is bought above the purchase level.
    pub fn continuation_domain(&self, a: f64) -> Result<(f64, f64)> {
        match self {
            RegimeSolution::RestrictedLow(s) => Ok((0.0, s.purchase_level(a)?)),
            _ => self.wealth_domain(a),
        }
    }

    pub fn dual_slice(&self, a: f64) -> Result<DualSlice> {
        match self {
            RegimeSolution::Unrestricted(s) => s.dual_slice(a),
            RegimeSolution::RestrictedHigh(s) => s.dual_slice(a),
            RegimeSolution::RestrictedLow(s) => s.dual_slice(a),
        }
    }

    pub fn psi(&self, w: f64, a: f64) -> Result<f64> {
        match self {
            RegimeSolution::Unrestricted(s) => s.psi(w, a),
            RegimeSolution::RestrictedHigh(s) => s.psi(w, a),
            RegimeSolution::RestrictedLow(s) => s.psi(w, a),
        }
    }

    pub fn pi_star(&self, w: f64, a: f64) -> Result<f64> {
        match self {
            RegimeSolution::Unrestricted(s) => s.pi_star(w, a),
            RegimeSolution::RestrictedHigh(s) => s.pi_star(w, a),
            RegimeSolution::RestrictedLow(s) => s.pi_star(w, a),
        }
    }

    /// Investment rule extended to the ends of the continuation interval by
    /// its one-sided limits, read off the dual at the boundary values of `y`.
    pub fn pi_star_closed(&self, w: f64, a: f64) -> Result<f64> {
        match self.pi_star(w, a) {
            Err(Error::Boundary { .. } | Error::PurchaseRegion { .. }) => {
                let (lo, hi) = self.continuation_domain(a)?;
                let slice = self.dual_slice(a)?;
                let y = if w <= lo {
                    slice.y_high
                } else if w >= hi {
                    slice.y_low
                } else {
                    return Err(Error::Boundary { w, a });
                };
                Ok(slice.investment_at(self.model().merton_factor(), y))
            }
            other => other,
        }
    }

    /// Income bought from `(w, a)`; only the low-charge regime buys before
    /// the safe level.
    pub fn purchase_at(&self, w: f64, a: f64) -> Result<f64> {
        match self {
            RegimeSolution::RestrictedLow(s) => s.jump_purchase(w, a),
            _ => Ok(0.0),
        }
    }

    /// Purchase level `b (c - a)` in the low-charge regime.
    pub fn purchase_level(&self, a: f64) -> Option<f64> {
        match self {
            RegimeSolution::RestrictedLow(s) => s.purchase_level(a).ok(),
            _ => None,
        }
    }
}

impl ValueFunction for RegimeSolution {
    fn regime(&self) -> Regime {
        RegimeSolution::regime(self)
    }

    fn model(&self) -> &Model {
        RegimeSolution::model(self)
    }

    fn a_end(&self) -> f64 {
        RegimeSolution::a_end(self)
    }

    fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        RegimeSolution::wealth_domain(self, a)
    }

    fn continuation_domain(&self, a: f64) -> Result<(f64, f64)> {
        RegimeSolution::continuation_domain(self, a)
    }

    fn psi(&self, w: f64, a: f64) -> Result<f64> {
        RegimeSolution::psi(self, w, a)
    }
}
