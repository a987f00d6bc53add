//! Wealth must stay non-negative and the surrender charge is at least the
//! critical charge `p*`: surrender just enough at `w = 0`, buy only at the
//! safe level `(c - a) a_bar`.
//!
//! The boundary ratio `x = y0/y_s` and the value `y0(0)` do not involve `p`;
//! the charge enters only through the exponent `K` in
//! `y0(a) = (c/(c - a))^K y0(0)`.

use crate::dual::DualSlice;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{expand_bracket_up, find_root_monotone, RootConfig};
use crate::unrestricted::{require_closed_form_params, weighted_power_f, weighted_power_h};

/// Incomes above `c (1 - A_TRUNCATION)` are treated as covering consumption.
pub const A_TRUNCATION: f64 = 1e-9;

/// Charges within this distance below `p*` are served by the high-charge
/// solver; there `a_bar - b` is too small for the purchase mapping.
pub const REGIME_TOL: f64 = 1e-8;

/// `lambda_o/(r (r + lambda_o))`, which equals `1/r - a_bar`.
pub(crate) fn hazard_loading(model: &Model) -> f64 {
    let p = model.params();
    p.lambda_o / (p.r * (p.r + p.lambda_o))
}

/// Residual `(lambda_o/(r + lambda_o)) f(x) - 1` of the ratio equation;
/// negative at `x = 1` and increasing.
pub fn x_residual_high(model: &Model, x: f64) -> f64 {
    let p = model.params();
    let k = model.consts();
    p.lambda_o / (p.r + p.lambda_o) * weighted_power_f(k.b1, k.b2, x) - 1.0
}

pub fn solve_x_high(model: &Model) -> Result<f64> {
    require_closed_form_params(model)?;
    let f = |x: f64| x_residual_high(model, x);
    let (lo, hi) = expand_bracket_up(f, 1.0)
        .map_err(|e| Error::InvalidParams(format!("x-equation has no root: {e}")))?;
    find_root_monotone(f, lo, hi, &RootConfig::default())
}

/// Critical surrender charge separating the two restricted regimes.
pub fn p_star(model: &Model, x: f64) -> f64 {
    let k = model.consts();
    let p = model.params();
    1.0 / k.b2 - (1.0 - k.b2) / k.b2 * p.lambda_o / p.r * (x.powf(k.b1 - 1.0) - 1.0)
}

/// Critical charge computed from scratch.
pub fn critical_charge(model: &Model) -> Result<f64> {
    Ok(p_star(model, solve_x_high(model)?))
}

/// Exponent `K` for an arbitrary charge; non-negative exactly when `p >= p*`.
pub fn k_exponent_for(model: &Model, x: f64, p: f64) -> f64 {
    let k = model.consts();
    let r = model.params().r;
    let lead = hazard_loading(model) * x.powf(k.b1 - 1.0) - 1.0 / r;
    let num = -k.b2 / (1.0 - k.b2) * (1.0 - p) * k.a_bar + lead;
    num / lead
}

/// Exponent `K` for the model's own charge; errors on the low-charge side.
pub fn k_exponent_high(model: &Model, x: f64) -> Result<f64> {
    let p = model.params().p;
    let ps = p_star(model, x);
    if p < ps - REGIME_TOL {
        return Err(Error::Regime(format!(
            "surrender charge p = {p} is below the critical charge p* = {ps}; use the low-charge solver"
        )));
    }
    Ok(k_exponent_for(model, x, p))
}

/// `y0(0) = -psi_w(0, 0)`, from the simplified closed form.
pub fn y0_at_zero_high(model: &Model, x: f64) -> f64 {
    let k = model.consts();
    let p = model.params();
    let inv = p.c / p.r
        * (-(1.0 - k.b2) / k.b2)
        * (1.0 - p.lambda_o / (p.r + p.lambda_o) * x.powf(k.b1 - 1.0));
    1.0 / inv
}

/// `y0(0)` from the unsimplified form, before eliminating `x^(B2-1)`.
pub fn y0_at_zero_high_unsimplified(model: &Model, x: f64) -> f64 {
    let k = model.consts();
    let p = model.params();
    let inv = p.c / p.r * (1.0 - p.lambda_o / (p.r + p.lambda_o) * weighted_power_h(k.b1, k.b2, x));
    1.0 / inv
}

#[derive(Debug, Clone)]
pub struct RestrictedHighSolution {
    model: Model,
    x: f64,
    k_exp: f64,
    p_star: f64,
    y0_at_zero: f64,
    cfg: RootConfig,
}

impl RestrictedHighSolution {
    pub fn solve(model: &Model) -> Result<Self> {
        let x = solve_x_high(model)?;
        let ps = p_star(model, x);
        let k_exp = k_exponent_high(model, x).map_err(|e| {
            if ps >= 1.0 {
                Error::Regime(format!(
                    "critical charge p* = {ps} >= 1: no admissible surrender charge reaches the high-charge regime"
                ))
            } else {
                e
            }
        })?;
        Ok(RestrictedHighSolution {
            model: *model,
            x,
            k_exp,
            p_star: ps,
            y0_at_zero: y0_at_zero_high(model, x),
            cfg: RootConfig::default(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn x(&self) -> f64 {
        self.x
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

    /// `(0, (c - a) a_bar)`.
    pub fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        self.check_a(a)?;
        Ok((0.0, self.model.safe_level_restricted(a)?))
    }

    /// `(y0(a), y_s(a))`.
    pub fn boundaries(&self, a: f64) -> Result<(f64, f64)> {
        self.check_a(a)?;
        let c = self.model.params().c;
        let y0 = (c / (c - a)).powf(self.k_exp) * self.y0_at_zero;
        Ok((y0, y0 / self.x))
    }

    pub fn coefficients(&self, a: f64) -> Result<(f64, f64)> {
        let (_, y_safe) = self.boundaries(a)?;
        let k = self.model.consts();
        let scale = -hazard_loading(&self.model) * (self.model.params().c - a);
        let d = k.b1 - k.b2;
        Ok((
            (1.0 - k.b2) / d * scale * y_safe.powf(1.0 - k.b1),
            (k.b1 - 1.0) / d * scale * y_safe.powf(1.0 - k.b2),
        ))
    }

    pub fn dual_slice(&self, a: f64) -> Result<DualSlice> {
        let (y0, y_safe) = self.boundaries(a)?;
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
        let slice = self.dual_slice(a)?;
        Ok(slice.conjugate(w, &self.cfg)?.clamp(0.0, 1.0))
    }

    pub fn pi_star(&self, w: f64, a: f64) -> Result<f64> {
        let (_, w_safe) = self.wealth_domain(a)?;
        if w >= w_safe {
            return Err(Error::Boundary { w, a });
        }
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("wealth {w} is negative")));
        }
        let slice = self.dual_slice(a)?;
        let y = slice.conjugate_point(w, &self.cfg)?;
        Ok(slice.investment_at(self.model.merton_factor(), y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn model(p: f64) -> Model {
        Model::new(ModelParams::base(p)).unwrap()
    }

    // Golden values from an independent scipy prototype at base params.
    const X_HIGH_GOLDEN: f64 = 1.824_466_103_550_437_5;
    const P_STAR_GOLDEN: f64 = 0.258_503_794_841_832_06;
    const Y0_ZERO_GOLDEN: f64 = 0.080_917_474_132_185_86;

    #[test]
    fn ratio_matches_dense_scan_and_golden() {
        let m = model(0.5);
        let x = solve_x_high(&m).unwrap();
        assert!(x_residual_high(&m, x).abs() < 1e-10);
        // Dense scan of the residual on [1, 4].
        let n = 300_000;
        let root = (1..=n)
            .map(|i| 1.0 + 3.0 * i as f64 / n as f64)
            .find(|&z| x_residual_high(&m, z) >= 0.0)
            .unwrap();
        assert!((root - x).abs() <= 3.0 / n as f64 + 1e-12);
        assert!((x - X_HIGH_GOLDEN).abs() < 1e-10);
        assert!(x.powf(m.consts().b1 - 1.0) < 1.5);
        assert!((x_residual_high(&m, 1.0) + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_independent_of_charge() {
        assert_eq!(
            solve_x_high(&model(0.3)).unwrap(),
            solve_x_high(&model(0.9)).unwrap()
        );
    }

    #[test]
    fn critical_charge_value() {
        let m = model(0.5);
        let ps = critical_charge(&m).unwrap();
        assert!((ps - 0.258).abs() <= 0.002);
        assert!((ps - P_STAR_GOLDEN).abs() < 1e-10);
        let x = solve_x_high(&m).unwrap();
        assert!(k_exponent_for(&m, x, ps).abs() < 1e-10);
        assert!(k_exponent_for(&m, x, 1.0) > 0.0);
    }

    #[test]
    fn exponent_monotone_in_charge() {
        let m = model(0.5);
        let x = solve_x_high(&m).unwrap();
        let ks: Vec<f64> = [0.5, 0.75, 1.0]
            .iter()
            .map(|&p| k_exponent_for(&m, x, p))
            .collect();
        assert!(ks[0] < ks[1] && ks[1] < ks[2]);
        assert!((ks[2] - 1.0).abs() < 1e-12);
        assert!(matches!(
            k_exponent_high(&model(0.2), x),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn y0_at_zero_forms_agree() {
        for p in [0.3, 0.6, 1.0] {
            let m = model(p);
            let x = solve_x_high(&m).unwrap();
            let y = y0_at_zero_high(&m, x);
            assert!(y > 0.0);
            assert!((y - Y0_ZERO_GOLDEN).abs() < 1e-12);
            assert!((y - y0_at_zero_high_unsimplified(&m, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_values() {
        let sol = RestrictedHighSolution::solve(&model(0.5)).unwrap();
        assert!((sol.psi(0.0, 0.0).unwrap() - 1.0).abs() < 1e-10);
        for a in [0.0, 0.25, 0.5, 0.75, 0.95] {
            let ws = sol.model().safe_level_restricted(a).unwrap();
            assert_eq!(sol.psi(ws, a).unwrap(), 0.0);
            let s = sol.dual_slice(a).unwrap();
            assert!(s.conjugate(ws, &RootConfig::default()).unwrap().abs() < 1e-10);
            assert!(s.dy(s.y_high).abs() < 1e-10);
        }
        assert!(sol.psi(-0.1, 0.2).is_err());
        assert!(sol.psi(20.0, 0.2).is_err());
        assert_eq!(sol.psi(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn surrender_rescues_at_zero_wealth() {
        let sol = RestrictedHighSolution::solve(&model(0.5)).unwrap();
        let v = sol.psi(0.0, 0.5).unwrap();
        assert!(v < 1.0 && v > 0.0);
    }

    #[test]
    fn quarter_chance_at_critical_charge() {
        let m = model(0.5);
        let ps = critical_charge(&m).unwrap();
        let sol = RestrictedHighSolution::solve(&m.with_p(ps).unwrap()).unwrap();
        let v = sol.psi(0.0, 0.75).unwrap();
        assert!((v - 0.25).abs() < 0.03, "psi(0, 0.75) = {v}");
    }

    #[test]
    fn low_charge_rejected() {
        assert!(matches!(
            RestrictedHighSolution::solve(&model(0.1)),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn strategy_independent_of_charge() {
        let sols: Vec<_> = [0.3, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| RestrictedHighSolution::solve(&model(p)).unwrap())
            .collect();
        let base = sols[0].pi_star(5.0, 0.25).unwrap();
        assert!(base > 0.0);
        for s in &sols[1..] {
            assert!((s.pi_star(5.0, 0.25).unwrap() - base).abs() < 1e-8);
        }
        assert!(matches!(
            sols[0].pi_star(12.5, 0.25),
            Err(Error::Boundary { .. })
        ));
    }

    #[test]
    fn strategy_matches_primal_finite_differences() {
        let sol = RestrictedHighSolution::solve(&model(0.5)).unwrap();
        let a = 0.25;
        let w = 6.0;
        let h = 1e-4 * 12.5;
        let f = |w| sol.psi(w, a).unwrap();
        let pw = (f(w + h) - f(w - h)) / (2.0 * h);
        let pww = (f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h);
        let fd = -sol.model().merton_factor() * pw / pww;
        let exact = sol.pi_star(w, a).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-4);
    }
}
