//! Property checks on a value function: HJB residual, the two gradient
//! inequalities and where they bind, shape in wealth, dual concavity, the
//! seam between the two restricted regimes, and agreement with the grid and
//! simulation oracles.
//!
//! Derivatives are central differences with step `1e-4` times the local
//! interval length. All checks take anything implementing
//! [`ValueFunction`], so the same code runs on [`Perturbed`] functions as a
//! negative control.

use crate::error::{Error, Result};
use crate::model::{Model, PortfolioState};
use crate::regime::{Regime, RegimeSolution, ValueFunction};
use crate::restricted_high::critical_charge;
use crate::verify::fd::{fd_solve, GridConfig};
use crate::verify::mc::{mc_simulate, SimConfig};
use crate::verify::report::{state_location, CheckLine, Report, Status};

pub const HJB_TOL: f64 = 1e-4;
pub const VI_SLACK: f64 = 1e-6;
pub const BINDING_TOL: f64 = 1e-4;
pub const MONOTONE_TOL: f64 = 1e-12;
pub const CONVEXITY_TOL: f64 = 1e-8;
pub const BOUNDARY_TOL: f64 = 1e-10;
pub const SEAM_TOL: f64 = 1e-3;
pub const SEAM_OFFSET: f64 = 1e-6;
pub const FD_TOL: f64 = 0.02;
pub const MC_ABS_TOL: f64 = 0.01;
pub const MC_CENSORED_MAX: f64 = 0.01;

const STEP_FRACTION: f64 = 1e-4;

/// Finite-difference partials of `psi` at one state.
#[derive(Debug, Clone, Copy)]
pub struct Partials {
    pub psi: f64,
    pub w: f64,
    pub ww: f64,
    pub a: f64,
}

/// Partials at `(w, a)` with the wealth stencil kept strictly inside
/// `(lo, hi)`; `None` when a stencil point leaves the domain.
pub fn partials<V: ValueFunction + ?Sized>(
    f: &V,
    w: f64,
    a: f64,
    lo: f64,
    hi: f64,
) -> Option<Partials> {
    let hw = STEP_FRACTION * (hi - lo);
    let ha = STEP_FRACTION * f.a_end();
    if !(hw > 0.0 && w - hw > lo && w + hw < hi && a - ha >= 0.0) {
        return None;
    }
    let v = |w: f64, a: f64| f.psi(w, a).ok();
    let psi = v(w, a)?;
    let (wm, wp) = (v(w - hw, a)?, v(w + hw, a)?);
    let (am, ap) = (v(w, a - ha)?, v(w, a + ha)?);
    Some(Partials {
        psi,
        w: (wp - wm) / (2.0 * hw),
        ww: (wp - 2.0 * psi + wm) / (hw * hw),
        a: (ap - am) / (2.0 * ha),
    })
}

/// `lambda_s psi - (r w - c + a) psi_w + m psi_w^2 / psi_ww`: zero where
/// the retiree only invests, and at most zero elsewhere.
pub fn hjb_residual(model: &Model, w: f64, a: f64, d: &Partials) -> f64 {
    let p = model.params();
    p.lambda_s * d.psi - (p.r * w - p.c + a) * d.w + model.consts().m * d.w * d.w / d.ww
}

/// `(a_bar psi_w - psi_A, psi_A - (1 - p) a_bar psi_w)`; both are at most
/// zero, the first binds where income is bought and the second where it is
/// surrendered.
pub fn gradient_slacks(model: &Model, d: &Partials) -> (f64, f64) {
    let a_bar = model.consts().a_bar;
    let p = model.params().p;
    (a_bar * d.w - d.a, d.a - (1.0 - p) * a_bar * d.w)
}

/// True when `(w, a)` lies strictly between the purchase level and the safe
/// level, where the optimal action is an immediate purchase.
fn in_purchase_region<V: ValueFunction + ?Sized>(f: &V, w: f64, a: f64) -> Result<bool> {
    if f.regime() != Regime::RestrictedLow {
        return Ok(false);
    }
    let (_, wb) = f.continuation_domain(a)?;
    let (_, ws) = f.wealth_domain(a)?;
    Ok(w > wb && w < ws)
}

/// `n_w x n_a` states strictly inside the continuation region, with
/// incomes spread over the lower 80% of the income range.
pub fn interior_points<V: ValueFunction + ?Sized>(
    f: &V,
    n_w: usize,
    n_a: usize,
) -> Result<Vec<PortfolioState>> {
    let mut out = Vec::with_capacity(n_w * n_a);
    for k in 0..n_a {
        let a = 0.8 * f.a_end() * (k as f64 + 0.5) / n_a as f64;
        let (lo, hi) = f.continuation_domain(a)?;
        for i in 0..n_w {
            let w = lo + (hi - lo) * (i as f64 + 1.0) / (n_w as f64 + 1.0);
            out.push(PortfolioState { w, a });
        }
    }
    Ok(out)
}

/// States between the purchase level and the safe level; empty unless the
/// regime buys income early.
pub fn purchase_region_points<V: ValueFunction + ?Sized>(
    f: &V,
    n_w: usize,
    n_a: usize,
) -> Result<Vec<PortfolioState>> {
    if f.regime() != Regime::RestrictedLow {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(n_w * n_a);
    for k in 0..n_a {
        let a = 0.8 * f.a_end() * (k as f64 + 0.5) / n_a as f64;
        let (_, wb) = f.continuation_domain(a)?;
        let (_, ws) = f.wealth_domain(a)?;
        for i in 0..n_w {
            let w = wb + (ws - wb) * (i as f64 + 1.0) / (n_w as f64 + 1.0);
            out.push(PortfolioState { w, a });
        }
    }
    Ok(out)
}

/// HJB residual at each state: `|residual| < HJB_TOL` in the continuation
/// region, `residual < HJB_TOL` where income is bought. States whose
/// stencil leaves the domain, or that sit on a boundary, are skipped.
pub fn check_hjb_residual<V: ValueFunction + ?Sized>(
    f: &V,
    points: &[PortfolioState],
) -> Result<Report> {
    let mut report = Report::new();
    for s in points {
        let (w, a) = (s.w, s.a);
        let loc = state_location(w, a);
        let (lo, hi) = f.continuation_domain(a)?;
        if w > lo && w < hi {
            match partials(f, w, a, lo, hi) {
                Some(d) => report.push(CheckLine::at_most(
                    "hjb_residual",
                    loc,
                    hjb_residual(f.model(), w, a, &d).abs(),
                    HJB_TOL,
                )),
                None => report.push(CheckLine::skip("hjb_residual", loc, HJB_TOL)),
            }
        } else if in_purchase_region(f, w, a)? {
            let (_, ws) = f.wealth_domain(a)?;
            match partials(f, w, a, hi, ws) {
                Some(d) => report.push(CheckLine::at_most(
                    "hjb_purchase_sign",
                    loc,
                    hjb_residual(f.model(), w, a, &d),
                    HJB_TOL,
                )),
                None => report.push(CheckLine::skip("hjb_purchase_sign", loc, HJB_TOL)),
            }
        } else {
            report.push(CheckLine::skip("hjb_residual", loc, HJB_TOL));
        }
    }
    Ok(report)
}

/// Both gradient inequalities, each within `VI_SLACK`, at every state.
pub fn check_variational_inequalities<V: ValueFunction + ?Sized>(
    f: &V,
    points: &[PortfolioState],
) -> Result<Report> {
    let mut report = Report::new();
    for s in points {
        let (w, a) = (s.w, s.a);
        let (lo, hi) = if in_purchase_region(f, w, a)? {
            (f.continuation_domain(a)?.1, f.wealth_domain(a)?.1)
        } else {
            f.continuation_domain(a)?
        };
        let loc = state_location(w, a);
        match partials(f, w, a, lo, hi) {
            Some(d) => {
                let (buy, surrender) = gradient_slacks(f.model(), &d);
                report.push(CheckLine::at_most(
                    "vi_purchase",
                    loc.clone(),
                    buy,
                    VI_SLACK,
                ));
                report.push(CheckLine::at_most("vi_surrender", loc, surrender, VI_SLACK));
            }
            None => {
                report.push(CheckLine::skip("vi_purchase", loc.clone(), VI_SLACK));
                report.push(CheckLine::skip("vi_surrender", loc, VI_SLACK));
            }
        }
    }
    Ok(report)
}

/// Where income is bought the purchase inequality holds with equality.
pub fn check_purchase_binding<V: ValueFunction + ?Sized>(
    f: &V,
    points: &[PortfolioState],
) -> Result<Report> {
    let mut report = Report::new();
    for s in points {
        let (w, a) = (s.w, s.a);
        let loc = state_location(w, a);
        if !in_purchase_region(f, w, a)? {
            report.push(CheckLine::skip("purchase_binding", loc, BINDING_TOL));
            continue;
        }
        let (_, wb) = f.continuation_domain(a)?;
        let (_, ws) = f.wealth_domain(a)?;
        match partials(f, w, a, wb, ws) {
            Some(d) => {
                let (buy, _) = gradient_slacks(f.model(), &d);
                report.push(CheckLine::at_most(
                    "purchase_binding",
                    loc,
                    buy.abs(),
                    BINDING_TOL,
                ));
            }
            None => report.push(CheckLine::skip("purchase_binding", loc, BINDING_TOL)),
        }
    }
    Ok(report)
}

/// At zero wealth in a restricted regime the surrender inequality holds with
/// equality. `psi_w` is a one-sided second-order difference.
pub fn check_surrender_binding<V: ValueFunction + ?Sized>(
    f: &V,
    incomes: &[f64],
) -> Result<Report> {
    let mut report = Report::new();
    for &a in incomes {
        let loc = state_location(0.0, a);
        if !f.regime().is_restricted() {
            report.push(CheckLine::skip("surrender_binding", loc, BINDING_TOL));
            continue;
        }
        let (lo, hi) = f.continuation_domain(a)?;
        let hw = STEP_FRACTION * (hi - lo);
        let ha = STEP_FRACTION * f.a_end();
        if a - ha < 0.0 {
            report.push(CheckLine::skip("surrender_binding", loc, BINDING_TOL));
            continue;
        }
        let (p0, p1, p2) = (f.psi(lo, a)?, f.psi(lo + hw, a)?, f.psi(lo + 2.0 * hw, a)?);
        let d = Partials {
            psi: p0,
            w: (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * hw),
            ww: f64::NAN,
            a: (f.psi(lo, a + ha)? - f.psi(lo, a - ha)?) / (2.0 * ha),
        };
        let (_, surrender) = gradient_slacks(f.model(), &d);
        report.push(CheckLine::at_most(
            "surrender_binding",
            loc,
            surrender.abs(),
            BINDING_TOL,
        ));
    }
    Ok(report)
}

/// Shape of `psi(., a)` on `n` evenly spaced wealth levels covering the
/// whole domain: values in `[0, 1]`, non-increasing, convex, zero at the
/// safe level, and one at the ruin level (unrestricted) or at `(0, 0)`.
pub fn check_shape<V: ValueFunction + ?Sized>(f: &V, a: f64, n: usize) -> Result<Report> {
    if n < 3 {
        return Err(Error::InvalidParams(format!(
            "shape check needs at least 3 points, got {n}"
        )));
    }
    let (lo, hi) = f.wealth_domain(a)?;
    let ws: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let psi = ws
        .iter()
        .map(|&w| f.psi(w, a))
        .collect::<Result<Vec<_>>>()?;
    let loc = format!("a={a:.6},n={n}");

    let outside = psi.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
    let rise = psi
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let bend = psi
        .windows(3)
        .map(|p| p[2] - 2.0 * p[1] + p[0])
        .fold(f64::INFINITY, f64::min);

    let mut report = Report::new();
    report.push(CheckLine::at_most("shape_range", loc.clone(), outside, 0.0));
    report.push(CheckLine::at_most(
        "shape_non_increasing",
        loc.clone(),
        rise,
        MONOTONE_TOL,
    ));
    report.push(CheckLine::at_least(
        "shape_convex",
        loc,
        bend,
        -CONVEXITY_TOL,
    ));
    report.push(CheckLine::at_most(
        "boundary_safe",
        state_location(hi, a),
        psi[n - 1].abs(),
        BOUNDARY_TOL,
    ));
    let ruin_applies = !f.regime().is_restricted() || a == 0.0;
    if ruin_applies {
        report.push(CheckLine::at_most(
            "boundary_ruin",
            state_location(lo, a),
            (psi[0] - 1.0).abs(),
            BOUNDARY_TOL,
        ));
    }
    Ok(report)
}

/// Risky amount strictly positive on `n` interior wealth levels.
pub fn check_investment_positive(sol: &RegimeSolution, a: f64, n: usize) -> Result<Report> {
    let (lo, hi) = sol.continuation_domain(a)?;
    let mut least = f64::INFINITY;
    for i in 0..n {
        let w = lo + (hi - lo) * (i as f64 + 1.0) / (n as f64 + 1.0);
        least = least.min(sol.pi_star(w, a)?);
    }
    let mut report = Report::new();
    report.push(CheckLine::new(
        "investment_positive",
        format!("a={a:.6},n={n}"),
        least,
        0.0,
        Status::from_bool(least > 0.0),
    ));
    Ok(report)
}

/// Dual second derivative strictly negative on `n` log-spaced points of
/// the dual interval at income `a`.
pub fn check_dual_concavity(sol: &RegimeSolution, a: f64, n: usize) -> Result<Report> {
    let slice = sol.dual_slice(a)?;
    let (l0, l1) = (slice.y_low.ln(), slice.y_high.ln());
    let n = n.max(2);
    let worst = (0..n)
        .map(|i| slice.dyy((l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut report = Report::new();
    report.push(CheckLine::new(
        "dual_concave",
        format!("a={a:.6},n={n}"),
        worst,
        0.0,
        Status::from_bool(worst < 0.0),
    ));
    Ok(report)
}

/// Low-charge solution just below `p*` against the high-charge solution at
/// `p*`: `psi` and the risky amount on an `n x n` grid of the low
/// solution's continuation region.
pub fn check_seam(model: &Model, n: usize) -> Result<Report> {
    let ps = critical_charge(model)?;
    let high = RegimeSolution::solve_regime(&model.with_p(ps)?, Regime::RestrictedHigh)?;
    let low =
        RegimeSolution::solve_regime(&model.with_p(ps - SEAM_OFFSET)?, Regime::RestrictedLow)?;
    let (mut psi_gap, mut pi_gap) = (0.0f64, 0.0f64);
    for k in 0..n {
        let a = 0.8 * model.params().c * k as f64 / (n.max(2) - 1) as f64;
        let (lo, hi) = low.continuation_domain(a)?;
        for i in 0..n {
            let w = lo + (hi - lo) * (i as f64 + 1.0) / (n as f64 + 1.0);
            psi_gap = psi_gap.max((low.psi(w, a)? - high.psi(w, a)?).abs());
            pi_gap = pi_gap.max((low.pi_star(w, a)? - high.pi_star(w, a)?).abs());
        }
    }
    let loc = format!("p={ps:.9},grid={n}x{n}");
    let mut report = Report::new();
    report.push(CheckLine::at_most(
        "seam_psi",
        loc.clone(),
        psi_gap,
        SEAM_TOL,
    ));
    report.push(CheckLine::at_most("seam_investment", loc, pi_gap, SEAM_TOL));
    Ok(report)
}

/// Grid solution against the closed form: sup-norm gap on `grid`, and, if
/// `refined` is given, a smaller gap on the finer grid.
pub fn check_fd(
    sol: &RegimeSolution,
    grid: &GridConfig,
    refined: Option<&GridConfig>,
) -> Result<Report> {
    let mut report = Report::new();
    let coarse = fd_solve(sol.model(), sol.regime(), grid)?;
    let (err, w, a) = coarse.sup_error(|w, a| sol.psi(w, a))?;
    let loc = |g: &GridConfig| format!("n_w={},n_a={}", g.n_w, g.n_a);
    report.push(CheckLine::at_most(
        "fd_sup_error",
        format!("{},{}", loc(grid), state_location(w, a)),
        err,
        FD_TOL,
    ));
    report.push(CheckLine::new(
        "fd_monotone",
        loc(grid),
        0.0,
        0.0,
        Status::from_bool(coarse.monotone_in_w(1e-12)),
    ));
    report.push(CheckLine::at_most(
        "fd_investment_clipped",
        loc(grid),
        coarse.pi_clipped as f64,
        0.0,
    ));
    if let Some(fine_grid) = refined {
        let fine = fd_solve(sol.model(), sol.regime(), fine_grid)?;
        let (fine_err, _, _) = fine.sup_error(|w, a| sol.psi(w, a))?;
        report.push(CheckLine::new(
            "fd_refinement",
            loc(fine_grid),
            fine_err,
            err,
            Status::from_bool(fine_err < err),
        ));
    }
    Ok(report)
}

/// Simulated ruin probability against the closed form at each start state,
/// within `max(3 SE, MC_ABS_TOL)`, with censored mass below 1%.
pub fn check_mc(
    sol: &RegimeSolution,
    starts: &[PortfolioState],
    sim: &SimConfig,
) -> Result<Report> {
    let mut report = Report::new();
    for s in starts {
        let res = mc_simulate(sol, *s, sim)?;
        let exact = sol.psi(s.w, s.a)?;
        let loc = format!(
            "{},est={:.5},se={:.5}",
            state_location(s.w, s.a),
            res.estimate,
            res.std_err
        );
        report.push(CheckLine::at_most(
            "mc_gap",
            loc.clone(),
            (res.estimate - exact).abs(),
            (3.0 * res.std_err).max(MC_ABS_TOL),
        ));
        report.push(CheckLine::at_most(
            "mc_censored",
            loc,
            res.censored_fraction(),
            MC_CENSORED_MAX,
        ));
    }
    Ok(report)
}

/// Shape of the negative-control perturbation, in `xi = (w - lo)/(hi - lo)`
/// over the full wealth domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bump {
    /// `16 xi^2 (1 - xi)^2`: vanishes with its slope at both ends.
    Interior,
    /// `4 xi (1 - xi)`: vanishes at both ends with non-zero slope.
    Tent,
}

/// `psi + amplitude * bump`, used to confirm that the checks reject a
/// function that is close to, but not, the solution.
#[derive(Debug, Clone, Copy)]
pub struct Perturbed<'a> {
    pub base: &'a RegimeSolution,
    pub amplitude: f64,
    pub bump: Bump,
}

impl<'a> Perturbed<'a> {
    pub fn new(base: &'a RegimeSolution, amplitude: f64, bump: Bump) -> Self {
        Perturbed {
            base,
            amplitude,
            bump,
        }
    }
}

impl ValueFunction for Perturbed<'_> {
    fn regime(&self) -> Regime {
        self.base.regime()
    }

    fn model(&self) -> &Model {
        self.base.model()
    }

    fn a_end(&self) -> f64 {
        self.base.a_end()
    }

    fn wealth_domain(&self, a: f64) -> Result<(f64, f64)> {
        self.base.wealth_domain(a)
    }

    fn continuation_domain(&self, a: f64) -> Result<(f64, f64)> {
        self.base.continuation_domain(a)
    }

    fn psi(&self, w: f64, a: f64) -> Result<f64> {
        let v = self.base.psi(w, a)?;
        let (lo, hi) = self.base.wealth_domain(a)?;
        let xi = ((w - lo) / (hi - lo)).clamp(0.0, 1.0);
        let shape = match self.bump {
            Bump::Interior => 16.0 * xi * xi * (1.0 - xi) * (1.0 - xi),
            Bump::Tent => 4.0 * xi * (1.0 - xi),
        };
        Ok(v + self.amplitude * shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn solution(p: f64, restricted: bool) -> RegimeSolution {
        RegimeSolution::solve(&Model::new(ModelParams::base(p)).unwrap(), restricted).unwrap()
    }

    fn all_regimes() -> Vec<RegimeSolution> {
        vec![
            solution(0.5, false),
            solution(0.5, true),
            solution(0.1, true),
        ]
    }

    #[test]
    fn solutions_pass_residual_and_inequalities() {
        for sol in all_regimes() {
            let mut pts = interior_points(&sol, 5, 3).unwrap();
            pts.extend(purchase_region_points(&sol, 3, 3).unwrap());
            let hjb = check_hjb_residual(&sol, &pts).unwrap();
            assert!(hjb.passed(), "{}\n{hjb}", sol.regime());
            assert_eq!(hjb.count(Status::Skip), 0);
            let vi = check_variational_inequalities(&sol, &pts).unwrap();
            assert!(vi.passed(), "{}\n{vi}", sol.regime());
        }
    }

    #[test]
    fn boundary_states_are_skipped() {
        let sol = solution(0.5, false);
        let (lo, hi) = sol.wealth_domain(0.25).unwrap();
        let pts = [
            PortfolioState { w: hi, a: 0.25 },
            PortfolioState { w: lo, a: 0.25 },
        ];
        let report = check_hjb_residual(&sol, &pts).unwrap();
        assert_eq!(report.count(Status::Skip), 2);
        assert!(!report.passed());
    }

    #[test]
    fn binding_branches() {
        let low = solution(0.1, true);
        let d2 = purchase_region_points(&low, 3, 3).unwrap();
        assert_eq!(d2.len(), 9);
        assert!(check_purchase_binding(&low, &d2).unwrap().passed());
        for sol in [solution(0.5, true), low] {
            let report = check_surrender_binding(&sol, &[0.25, 0.5, 0.75]).unwrap();
            assert!(report.passed(), "{report}");
        }
        let unrestricted = solution(0.5, false);
        assert!(purchase_region_points(&unrestricted, 3, 3)
            .unwrap()
            .is_empty());
        assert_eq!(
            check_surrender_binding(&unrestricted, &[0.25])
                .unwrap()
                .count(Status::Skip),
            1
        );
    }

    #[test]
    fn shape_and_concavity() {
        for sol in all_regimes() {
            for a in [0.0, 0.25, 0.5] {
                let shape = check_shape(&sol, a, 100).unwrap();
                assert!(shape.passed(), "{}\n{shape}", sol.regime());
                assert!(check_investment_positive(&sol, a, 20).unwrap().passed());
                assert!(check_dual_concavity(&sol, a, 50).unwrap().passed());
            }
        }
    }

    #[test]
    fn negative_controls_fail() {
        for sol in all_regimes() {
            let pts = interior_points(&sol, 5, 3).unwrap();
            let bumped = Perturbed::new(&sol, 0.01, Bump::Interior);
            let hjb = check_hjb_residual(&bumped, &pts).unwrap();
            assert!(hjb.max_value() > 1e-3, "{}", sol.regime());
            let shape =
                check_shape(&Perturbed::new(&sol, 0.05, Bump::Interior), 0.25, 100).unwrap();
            assert!(!shape.passed());
        }
        let low = solution(0.1, true);
        let bumped = Perturbed::new(&low, 0.01, Bump::Interior);
        let d2 = purchase_region_points(&low, 3, 3).unwrap();
        assert!(
            !check_variational_inequalities(&bumped, &interior_points(&low, 5, 3).unwrap())
                .unwrap()
                .passed()
        );
        assert!(!check_purchase_binding(&bumped, &d2).unwrap().passed());
        for sol in [solution(0.5, true), low] {
            let tent = Perturbed::new(&sol, 0.01, Bump::Tent);
            assert!(!check_surrender_binding(&tent, &[0.25, 0.5])
                .unwrap()
                .passed());
        }
    }

    #[test]
    fn seam_agrees() {
        let report = check_seam(&Model::new(ModelParams::base(0.5)).unwrap(), 5).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn shape_needs_three_points() {
        assert!(check_shape(&solution(0.5, false), 0.0, 2).is_err());
    }
}
