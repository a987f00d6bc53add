//! Monte Carlo oracle: simulate wealth under the closed-form policy and
//! average the discounted ruin indicator `exp(-lambda_s tau) 1{ruin}`.
//!
//! Wealth follows an Euler step with the investment rule frozen over the
//! step. Boundary interactions within a step use the Brownian bridge between
//! the step's endpoints: absorbing levels are hit with the bridge crossing
//! probability, and surrendering at `w = 0` or buying at the purchase level
//! uses the bridge extremum, which is the exact reflection amount for a
//! step with frozen coefficients.
//!
//! The investment rule is read from a table. Borrowing against the annuity
//! leaves income constant along a path, so one wealth table per start state
//! suffices. With wealth restricted the rule scales with the uncovered
//! consumption, `pi(w, a) = (c - a) g(w/(c - a))`, and one table of `g`
//! covers every income level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PortfolioState;
use crate::regime::{Regime, RegimeSolution};

/// Bridge corrections are skipped when `2 d0 d1 / s^2` exceeds this; the
/// crossing probability is then below `exp(-40)`.
const BRIDGE_CUTOFF: f64 = 40.0;

const TABLE_SIZE: usize = 8193;

/// Corner rule: with income and wealth both below these, the path is ruined.
pub const A_EPS: f64 = 1e-12;
pub const W_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Euler step in years.
    pub dt: f64,
    /// Paths still running after this many years are censored.
    pub horizon: f64,
    pub seed: u64,
    /// Restricted paths whose uncovered consumption `c - a` falls below
    /// `income_cutoff * c` are counted as safe. Only income purchases get
    /// there, so this matters in the low-charge regime, where the ruin
    /// probability left at the cutoff is small (about 0.003 at 1e-2 for the
    /// base parameters) while run time grows like `-ln(income_cutoff)`.
    pub income_cutoff: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            dt: 1e-3,
            horizon: 200.0,
            seed: 0,
            income_cutoff: 1e-2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.n_paths >= 1) {
            return Err(Error::Config(format!(
                "simulation needs dt > 0, horizon > 0 and at least one path (got {self:?})"
            )));
        }
        if !(self.income_cutoff > 0.0 && self.income_cutoff < 1.0) {
            return Err(Error::Config(format!(
                "income cutoff must lie in (0, 1) (got {})",
                self.income_cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ruin,
    Safe,
    Censored,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ruin => "ruin",
            Outcome::Safe => "safe",
            Outcome::Censored => "censored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub outcome: Outcome,
    /// Absorption time in years; the horizon for censored paths.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub estimate: f64,
    pub std_err: f64,
    pub n_ruin: usize,
    pub n_safe: usize,
    pub n_censored: usize,
    /// Upper bound on what censored paths could add to the estimate.
    pub censored_weight: f64,
    pub paths: Vec<PathRecord>,
}

impl SimResult {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Share of paths censored at the horizon.
    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / self.paths.len() as f64
    }
}

/// Piecewise-linear table on a uniform grid, clamped at both ends.
#[derive(Debug, Clone)]
struct Table {
    x0: f64,
    dx: f64,
    inv_dx: f64,
    values: Vec<f64>,
}

impl Table {
    fn build<F>(x0: f64, x1: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let dx = (x1 - x0) / (TABLE_SIZE - 1) as f64;
        let values = (0..TABLE_SIZE)
            .map(|i| {
                f(if i + 1 == TABLE_SIZE {
                    x1
                } else {
                    x0 + i as f64 * dx
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            x0,
            dx,
            inv_dx: 1.0 / dx,
            values,
        })
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let s = ((x - self.x0) * self.inv_dx).max(0.0);
        let i = (s as usize).min(self.values.len() - 2);
        let t = (s - i as f64).min(1.0);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Everything a path needs, fixed before simulation starts.
struct Plan {
    r: f64,
    mu: f64,
    sigma: f64,
    c: f64,
    p: f64,
    a_bar: f64,
    kind: PlanKind,
}

enum PlanKind {
    Unrestricted {
        a: f64,
        w_ruin: f64,
        w_safe: f64,
        pi: Table,
    },
    Restricted {
        /// `g(u)` on `[0, u_top]` in units of `c`.
        g: Table,
        /// Purchase slope when income is bought before the safe level.
        buy_slope: Option<f64>,
        cutoff: f64,
    },
}

fn bridge_min(x0: f64, x1: f64, s2: f64, u: f64) -> f64 {
    0.5 * (x0 + x1 - ((x0 - x1) * (x0 - x1) - 2.0 * s2 * u.ln()).sqrt())
}

fn bridge_max(x0: f64, x1: f64, s2: f64, u: f64) -> f64 {
    0.5 * (x0 + x1 + ((x0 - x1) * (x0 - x1) - 2.0 * s2 * u.ln()).sqrt())
}

/// Uniform on (0, 1].
#[inline]
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

impl Plan {
    fn new(solution: &RegimeSolution, start: PortfolioState, sim: &SimConfig) -> Result<Self> {
        let model = solution.model();
        let prm = model.params();
        let a_bar = model.consts().a_bar;
        let kind = match solution {
            RegimeSolution::Unrestricted(_) => {
                let a = start.a;
                let (w_ruin, w_safe) = solution.wealth_domain(a)?;
                let pi = if solution.income_in_range(a) {
                    Table::build(w_ruin, w_safe, |w| solution.pi_star_closed(w, a))?
                } else {
                    Table {
                        x0: 0.0,
                        dx: 1.0,
                        inv_dx: 1.0,
                        values: vec![0.0, 0.0],
                    }
                };
                PlanKind::Unrestricted {
                    a,
                    w_ruin,
                    w_safe,
                    pi,
                }
            }
            _ => {
                let c = prm.c;
                let (_, top) = solution.continuation_domain(0.0)?;
                let g = Table::build(0.0, top / c, |u| {
                    Ok(solution.pi_star_closed(u * c, 0.0)? / c)
                })?;
                let buy_slope = match solution {
                    RegimeSolution::RestrictedLow(s) => Some(s.b()),
                    _ => None,
                };
                PlanKind::Restricted {
                    g,
                    buy_slope,
                    cutoff: sim.income_cutoff * c,
                }
            }
        };
        let plan = Plan {
            r: prm.r,
            mu: prm.mu,
            sigma: prm.sigma,
            c: prm.c,
            p: prm.p,
            a_bar,
            kind,
        };
        plan.check_step(sim.dt)?;
        Ok(plan)
    }

    /// A single step must not be able to carry wealth across the whole
    /// domain; otherwise the boundary handling is meaningless.
    fn check_step(&self, dt: f64) -> Result<()> {
        let (width, pi_max, drift_max) = match &self.kind {
            PlanKind::Unrestricted {
                a,
                w_ruin,
                w_safe,
                pi,
            } => {
                let pm = pi.max();
                let drift = [*w_ruin, *w_safe]
                    .iter()
                    .map(|w| (self.r * w - self.c + a).abs())
                    .fold(0.0, f64::max)
                    + (self.mu - self.r) * pm;
                (w_safe - w_ruin, pm, drift)
            }
            PlanKind::Restricted { g, .. } => {
                let top = g.x0 + g.dx * (g.values.len() - 1) as f64;
                let pm = g.max();
                let drift = (self.r * top - 1.0).abs().max(1.0) + (self.mu - self.r) * pm;
                (top, pm, drift)
            }
        };
        if width <= 0.0 {
            return Ok(());
        }
        let reach = drift_max * dt + 4.0 * self.sigma * pi_max * dt.sqrt();
        if reach >= width {
            return Err(Error::StepSize(format!(
                "one step can move wealth by {reach:.4e} but the domain is only {width:.4e} wide \
                 (max risky amount {pi_max:.4e}, dt = {dt:e})"
            )));
        }
        Ok(())
    }

    fn run_path(&self, start: PortfolioState, sim: &SimConfig, index: u64) -> PathRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
        rng.set_stream(index);
        match &self.kind {
            PlanKind::Unrestricted {
                a,
                w_ruin,
                w_safe,
                pi,
            } => self.run_unrestricted(start.w, *a, *w_ruin, *w_safe, pi, sim, &mut rng),
            PlanKind::Restricted {
                g,
                buy_slope,
                cutoff,
            } => self.run_restricted(start, g, *buy_slope, *cutoff, sim, &mut rng),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_unrestricted(
        &self,
        w0: f64,
        a: f64,
        w_ruin: f64,
        w_safe: f64,
        pi: &Table,
        sim: &SimConfig,
        rng: &mut ChaCha8Rng,
    ) -> PathRecord {
        if w0 >= w_safe {
            return PathRecord {
                outcome: Outcome::Safe,
                tau: 0.0,
            };
        }
        if w0 <= w_ruin {
            return PathRecord {
                outcome: Outcome::Ruin,
                tau: 0.0,
            };
        }
        let sq = sim.dt.sqrt();
        let mut w = w0;
        let max_steps = (sim.horizon / sim.dt).ceil() as u64;
        let mut k: u64 = 0;
        while k < max_steps {
            let amount = pi.eval(w);
            let s = self.sigma * amount * sq;
            let s2 = s * s;
            let z: f64 = rng.sample(StandardNormal);
            let y = w + (self.r * w + (self.mu - self.r) * amount - self.c + a) * sim.dt + s * z;
            k += 1;
            let t = k as f64 * sim.dt;
            if y >= w_safe {
                return PathRecord {
                    outcome: Outcome::Safe,
                    tau: t,
                };
            }
            if y <= w_ruin {
                return PathRecord {
                    outcome: Outcome::Ruin,
                    tau: t,
                };
            }
            let up = 2.0 * (w_safe - w) * (w_safe - y);
            if up < BRIDGE_CUTOFF * s2 && open_uniform(rng) < (-up / s2).exp() {
                return PathRecord {
                    outcome: Outcome::Safe,
                    tau: t,
                };
            }
            let dn = 2.0 * (w - w_ruin) * (y - w_ruin);
            if dn < BRIDGE_CUTOFF * s2 && open_uniform(rng) < (-dn / s2).exp() {
                return PathRecord {
                    outcome: Outcome::Ruin,
                    tau: t,
                };
            }
            w = y;
        }
        PathRecord {
            outcome: Outcome::Censored,
            tau: sim.horizon,
        }
    }

    fn run_restricted(
        &self,
        start: PortfolioState,
        g: &Table,
        buy_slope: Option<f64>,
        cutoff: f64,
        sim: &SimConfig,
        rng: &mut ChaCha8Rng,
    ) -> PathRecord {
        let (mut w, mut a) = (start.w, start.a);
        // Initial purchase down to the purchase level.
        if let Some(b) = buy_slope {
            let wb = b * (self.c - a);
            if w > wb {
                let da = ((w - wb) / (self.a_bar - b)).min(self.c - a);
                a += da;
                w = (w - self.a_bar * da).max(0.0);
            }
        }
        let sq = sim.dt.sqrt();
        let max_steps = (sim.horizon / sim.dt).ceil() as u64;
        let tau = |k: u64| k as f64 * sim.dt;
        let mut k: u64 = 0;
        let mut uncovered = self.c - a;
        let mut inv_uncovered = 1.0 / uncovered;
        loop {
            if uncovered <= cutoff || w >= uncovered * self.a_bar {
                return PathRecord {
                    outcome: Outcome::Safe,
                    tau: tau(k),
                };
            }
            if k > 0 && a <= A_EPS && w <= W_EPS {
                return PathRecord {
                    outcome: Outcome::Ruin,
                    tau: tau(k),
                };
            }
            if k >= max_steps {
                return PathRecord {
                    outcome: Outcome::Censored,
                    tau: sim.horizon,
                };
            }
            let amount = uncovered * g.eval(w * inv_uncovered);
            let s = self.sigma * amount * sq;
            let s2 = s * s;
            let z: f64 = rng.sample(StandardNormal);
            let mut y = w + (self.r * w + (self.mu - self.r) * amount - uncovered) * sim.dt + s * z;
            k += 1;
            let a_prev = a;

            // Surrender: the bridge minimum below zero is the deficit to cover.
            let mut deficit = 0.0;
            if y < 0.0 {
                deficit = -bridge_min(w, y, s2, open_uniform(rng));
            } else if 2.0 * w * y < BRIDGE_CUTOFF * s2 {
                deficit = (-bridge_min(w, y, s2, open_uniform(rng))).max(0.0);
            }
            if deficit > 0.0 {
                let value = (1.0 - self.p) * self.a_bar;
                if value <= 0.0 || deficit >= value * a {
                    return PathRecord {
                        outcome: Outcome::Ruin,
                        tau: tau(k),
                    };
                }
                a -= deficit / value;
                y += deficit;
            }

            match buy_slope {
                Some(b) => {
                    // Buying: the bridge maximum above the purchase level.
                    let z0 = w - b * (self.c - a);
                    let z1 = y - b * (self.c - a);
                    let excess = if z1 > 0.0 {
                        bridge_max(z0.min(0.0), z1, s2, open_uniform(rng))
                    } else if 2.0 * z0 * z1 < BRIDGE_CUTOFF * s2 {
                        bridge_max(z0.min(0.0), z1, s2, open_uniform(rng)).max(0.0)
                    } else {
                        0.0
                    };
                    if excess > 0.0 {
                        let da = (excess / (self.a_bar - b)).min(self.c - a);
                        a += da;
                        y = (y - self.a_bar * da).max(0.0);
                    }
                }
                None => {
                    let ws = (self.c - a) * self.a_bar;
                    let ws_prev = uncovered * self.a_bar;
                    if y < ws {
                        let up = 2.0 * (ws_prev - w) * (ws - y);
                        if up < BRIDGE_CUTOFF * s2 && open_uniform(rng) < (-up / s2).exp() {
                            return PathRecord {
                                outcome: Outcome::Safe,
                                tau: tau(k),
                            };
                        }
                    }
                }
            }
            w = y;
            if a != a_prev {
                uncovered = self.c - a;
                inv_uncovered = 1.0 / uncovered;
            }
        }
    }
}

/// Simulate `sim.n_paths` paths from `start` under the solution's policy.
///
/// Path `i` draws from its own ChaCha stream keyed by `(seed, i)` and the
/// estimate is summed in path order, so results do not depend on how the
/// paths are spread over threads.
pub fn mc_simulate(
    solution: &RegimeSolution,
    start: PortfolioState,
    sim: &SimConfig,
) -> Result<SimResult> {
    sim.validate()?;
    check_start(solution, start)?;
    let plan = Plan::new(solution, start, sim)?;
    let lambda = solution.model().params().lambda_s;
    let paths: Vec<PathRecord> = (0..sim.n_paths as u64)
        .into_par_iter()
        .map(|i| plan.run_path(start, sim, i))
        .collect();

    let (mut sum, mut sum_sq, mut censored_weight) = (0.0, 0.0, 0.0);
    let (mut n_ruin, mut n_safe, mut n_censored) = (0, 0, 0);
    for rec in &paths {
        match rec.outcome {
            Outcome::Ruin => {
                let x = (-lambda * rec.tau).exp();
                sum += x;
                sum_sq += x * x;
                n_ruin += 1;
            }
            Outcome::Safe => n_safe += 1,
            Outcome::Censored => {
                censored_weight += (-lambda * rec.tau).exp();
                n_censored += 1;
            }
        }
    }
    let n = paths.len() as f64;
    let estimate = sum / n;
    let var = if paths.len() > 1 {
        ((sum_sq / n - estimate * estimate) * n / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SimResult {
        estimate,
        std_err: (var / n).sqrt(),
        n_ruin,
        n_safe,
        n_censored,
        censored_weight: censored_weight / n,
        paths,
    })
}

fn check_start(solution: &RegimeSolution, start: PortfolioState) -> Result<()> {
    let a = start.a;
    match solution.regime() {
        Regime::Unrestricted => {
            let model = solution.model();
            if !(a >= 0.0 && (a < model.a_max_unrestricted() || model.at_meeting_point(a))) {
                return Err(Error::Domain(format!(
                    "start income {a} outside the unrestricted domain"
                )));
            }
        }
        _ => {
            if !(a >= 0.0 && a <= solution.model().params().c) || !(start.w >= 0.0) {
                return Err(Error::Domain(format!(
                    "start ({}, {a}) outside the restricted domain",
                    start.w
                )));
            }
        }
    }
    if !start.w.is_finite() {
        return Err(Error::Domain("start wealth must be finite".into()));
    }
    Ok(())
}
