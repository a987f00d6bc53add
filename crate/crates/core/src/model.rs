//! Market and preference primitives, the constants derived from them, and
//! the geometry of the ruin and safe boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States with annuity income within this fraction of `c` of the meeting
/// point of the unrestricted boundaries are treated as sitting on it.
pub const MEETING_POINT_TOL: f64 = 1e-12;

/// Market and preference primitives. All rates are per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Riskless rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Subjective hazard rate; drives the individual's lifetime.
    pub lambda_s: f64,
    /// Objective hazard rate; prices annuities.
    pub lambda_o: f64,
    /// Consumption rate.
    pub c: f64,
    /// Proportional surrender charge.
    pub p: f64,
}

impl ModelParams {
    /// Base scenario: 2% real riskless rate, 6% risky drift, 20% volatility,
    /// hazard rate 0.04 (25 years expected future lifetime), one unit of
    /// consumption per year.
    pub fn base(p: f64) -> Self {
        ModelParams {
            r: 0.02,
            mu: 0.06,
            sigma: 0.20,
            lambda_s: 0.04,
            lambda_o: 0.04,
            c: 1.0,
            p,
        }
    }

    pub fn with_p(self, p: f64) -> Self {
        ModelParams { p, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r", self.r),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("lambda_s", self.lambda_s),
            ("lambda_o", self.lambda_o),
            ("c", self.c),
            ("p", self.p),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite (got {v})"
                )));
            }
        }
        let check = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams(msg))
            }
        };
        check(self.r >= 0.0, format!("r >= 0 violated (r = {})", self.r))?;
        check(
            self.mu > self.r,
            format!("mu > r violated (mu = {}, r = {})", self.mu, self.r),
        )?;
        check(
            self.sigma > 0.0,
            format!("sigma > 0 violated (sigma = {})", self.sigma),
        )?;
        check(
            self.lambda_s > 0.0,
            format!("lambda_s > 0 violated (lambda_s = {})", self.lambda_s),
        )?;
        check(
            self.lambda_o > 0.0,
            format!("lambda_o > 0 violated (lambda_o = {})", self.lambda_o),
        )?;
        check(self.c >= 0.0, format!("c >= 0 violated (c = {})", self.c))?;
        check(
            self.p > 0.0 && self.p <= 1.0,
            format!("0 < p <= 1 violated (p = {})", self.p),
        )?;
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::base(0.5)
    }
}

/// Constants computed once from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Price of an immediate life annuity paying 1 per year, `1/(r + lambda_o)`.
    pub a_bar: f64,
    /// Half the squared Sharpe ratio.
    pub m: f64,
    /// Larger root of `m B^2 - (r - lambda_s + m) B - lambda_s = 0`; always > 1.
    pub b1: f64,
    /// Smaller root of the same quadratic; always < 0.
    pub b2: f64,
}

pub fn derive_constants(params: &ModelParams) -> Result<DerivedConstants> {
    params.validate()?;
    let a_bar = 1.0 / (params.r + params.lambda_o);
    let sharpe = (params.mu - params.r) / params.sigma;
    let m = 0.5 * sharpe * sharpe;
    let q = params.r - params.lambda_s + m;
    let disc = (q * q + 4.0 * m * params.lambda_s).sqrt();
    // Cancellation-free pair: the product of the roots is -lambda_s/m.
    let (b1, b2) = if q >= 0.0 {
        let b1 = (q + disc) / (2.0 * m);
        (b1, -params.lambda_s / (m * b1))
    } else {
        let b2 = (q - disc) / (2.0 * m);
        (-params.lambda_s / (m * b2), b2)
    };
    Ok(DerivedConstants { a_bar, m, b1, b2 })
}

/// Validated parameters bundled with their derived constants. Every solver
/// is built from one of these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    params: ModelParams,
    consts: DerivedConstants,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        let consts = derive_constants(&params)?;
        Ok(Model { params, consts })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn consts(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Model::new(self.params.with_p(p))
    }

    /// `(mu - r)/sigma^2`, the factor in front of the feedback investment rule.
    pub fn merton_factor(&self) -> f64 {
        (self.params.mu - self.params.r) / (self.params.sigma * self.params.sigma)
    }

    /// Annuity income at which the unrestricted safe and ruin levels meet.
    pub fn a_max_unrestricted(&self) -> f64 {
        let ModelParams {
            r, lambda_o, c, p, ..
        } = self.params;
        c * (r + lambda_o) / (p * r + lambda_o)
    }

    /// Safe level when borrowing against the annuity is allowed:
    /// `pc/(pr + lambda_o) - a/(r + lambda_o)`.
    pub fn safe_level_unrestricted(&self, a: f64) -> Result<f64> {
        let a_max = self.a_max_unrestricted();
        if !(a >= 0.0 && a <= a_max + MEETING_POINT_TOL * self.params.c) {
            return Err(Error::Domain(format!(
                "annuity income {a} outside [0, {a_max}] for the unrestricted safe level"
            )));
        }
        let ModelParams {
            r, lambda_o, c, p, ..
        } = self.params;
        Ok(p * c / (p * r + lambda_o) - a * self.consts.a_bar)
    }

    /// Ruin level `-(1 - p) a_bar a`: wealth plus surrender value hits zero.
    pub fn ruin_level_unrestricted(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(Error::Domain(format!("annuity income {a} is negative")));
        }
        Ok(-(1.0 - self.params.p) * self.consts.a_bar * a)
    }

    /// Safe level `(c - a) a_bar` when wealth must stay non-negative.
    pub fn safe_level_restricted(&self, a: f64) -> Result<f64> {
        let c = self.params.c;
        if !(a >= 0.0 && a < c) {
            return Err(Error::Domain(format!(
                "annuity income {a} outside [0, {c}); ruin is impossible once a >= c"
            )));
        }
        Ok((c - a) * self.consts.a_bar)
    }

    /// True when `a` is within tolerance of the unrestricted meeting point.
    pub fn at_meeting_point(&self, a: f64) -> bool {
        (a - self.a_max_unrestricted()).abs() <= MEETING_POINT_TOL * self.params.c
    }
}

/// Liquid wealth and annuity income rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub w: f64,
    pub a: f64,
}

impl PortfolioState {
    pub fn new(w: f64, a: f64) -> Result<Self> {
        if !w.is_finite() || !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!(
                "portfolio state requires finite w and a >= 0 (got w = {w}, a = {a})"
            )));
        }
        Ok(PortfolioState { w, a })
    }
}
