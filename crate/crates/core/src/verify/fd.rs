//! Finite-difference oracle for the ruin-minimization variational inequality.
//!
//! Each annuity-income level `a_j` carries its own uniform wealth grid fitted
//! to the regime's domain at that level. The diffusion part is a Markov-chain
//! approximation (central differences where the diffusion dominates the
//! drift, upwinding otherwise), buying and surrendering are one-row moves
//! `(w, a) -> (w - a_bar da, a + da)` and `(w, a) -> (w + (1 - p) a_bar da, a - da)`
//! with linear interpolation in wealth on the target row. Each row is an
//! obstacle problem solved by policy iteration; rows are swept alternately
//! upwards and downwards until the grid function stops changing.
//!
//! With wealth restricted, the node at `w = 0` cannot diffuse below zero:
//! the ghost value one step below is the value after surrendering enough
//! income to cover the deficit, interpolated along the `w = 0` column.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::regime::Regime;
use crate::restricted_high::critical_charge;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Wealth nodes per income row, including both ends.
    pub n_w: usize,
    /// Income rows, including the terminal row where nothing is left to solve.
    pub n_a: usize,
    /// Policy-iteration cap for each row solve.
    pub policy_iters: usize,
    /// Sup-norm change between sweeps below which the grid has converged.
    pub grid_tol: f64,
    /// Cap on full up-and-down sweeps.
    pub max_sweeps: usize,
    /// Upper clip on the risky amount, in units of `c a_bar`.
    pub pi_cap_factor: f64,
}

impl GridConfig {
    pub fn new(n_w: usize, n_a: usize) -> Self {
        GridConfig {
            n_w,
            n_a,
            policy_iters: 50,
            grid_tol: 1e-10,
            max_sweeps: 5000,
            pi_cap_factor: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_w < 11 || self.n_a < 3 || !(self.grid_tol > 0.0) {
            return Err(Error::Config(format!(
                "grid needs n_w >= 11, n_a >= 3 and grid_tol > 0 (got {self:?})"
            )));
        }
        if self.policy_iters == 0 || self.max_sweeps == 0 || !(self.pi_cap_factor > 0.0) {
            return Err(Error::Config(format!(
                "invalid iteration settings {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::new(201, 51)
    }
}

/// Which branch of the inequality is active at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Value imposed by boundary data.
    Fixed,
    Diffuse,
    Buy,
    Surrender,
}

#[derive(Debug, Clone)]
pub struct GridRow {
    pub a: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub values: Vec<f64>,
    pub branches: Vec<Branch>,
    pub pi: Vec<f64>,
}

impl GridRow {
    pub fn h(&self) -> f64 {
        (self.w_hi - self.w_lo) / (self.values.len() - 1) as f64
    }

    pub fn w(&self, i: usize) -> f64 {
        self.w_lo + i as f64 * self.h()
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub regime: Regime,
    /// Rows with something to solve; the terminal row is not stored.
    pub rows: Vec<GridRow>,
    /// Income spacing between rows.
    pub da: f64,
    pub sweeps: usize,
    pub last_change: f64,
    /// Diffusion nodes whose risky amount sits on the clip at convergence.
    pub pi_clipped: usize,
    pub pi_cap: f64,
}

impl GridResult {
    /// Largest `|grid - reference|` over all stored nodes, with its location.
    pub fn sup_error<F>(&self, reference: F) -> Result<(f64, f64, f64)>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let mut worst = (0.0, f64::NAN, f64::NAN);
        for row in &self.rows {
            for (i, &v) in row.values.iter().enumerate() {
                let w = row.w(i);
                let e = (v - reference(w, row.a)?).abs();
                if e > worst.0 {
                    worst = (e, w, row.a);
                }
            }
        }
        Ok(worst)
    }

    /// True when every row is non-increasing in wealth up to `tol`.
    pub fn monotone_in_w(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.values.windows(2).all(|p| p[1] <= p[0] + tol))
    }
}

/// Where the ghost value below `w = 0` comes from.
#[derive(Debug, Clone, Copy)]
enum Ghost {
    /// Deficit exceeds the surrender value: ruin.
    Ruin,
    /// `theta psi(0, a_k) + (1 - theta) psi(0, a_{k+1})`.
    Column { k: usize, theta: f64 },
}

struct Solver<'m> {
    model: &'m Model,
    restricted: bool,
    n_w: usize,
    /// Number of stored rows; row `n_rows` is terminal.
    n_rows: usize,
    da: f64,
    a_end: f64,
    pi_cap: f64,
    rows: Vec<GridRow>,
}

impl<'m> Solver<'m> {
    fn domain(&self, a: f64) -> Result<(f64, f64)> {
        if self.restricted {
            Ok((0.0, self.model.safe_level_restricted(a)?))
        } else {
            Ok((
                self.model.ruin_level_unrestricted(a)?,
                self.model.safe_level_unrestricted(a)?,
            ))
        }
    }

    /// Grid value on row `j` at wealth `w`, by linear interpolation; beyond
    /// the safe level it is 0, at or below the ruin level 1.
    fn value_on_row(&self, j: usize, w: f64) -> f64 {
        if j >= self.n_rows {
            if self.restricted {
                return 0.0;
            }
            let ws = self
                .model
                .safe_level_unrestricted(self.a_end)
                .unwrap_or(f64::NEG_INFINITY);
            return if w >= ws - 1e-12 { 0.0 } else { 1.0 };
        }
        let row = &self.rows[j];
        if w >= row.w_hi {
            return 0.0;
        }
        if w <= row.w_lo {
            return row.values[0];
        }
        let h = row.h();
        let s = (w - row.w_lo) / h;
        let i = (s.floor() as usize).min(self.n_w - 2);
        let t = s - i as f64;
        (1.0 - t) * row.values[i] + t * row.values[i + 1]
    }

    fn ghost(&self, j: usize) -> Ghost {
        let p = self.model.params().p;
        if p >= 1.0 || j == 0 {
            return Ghost::Ruin;
        }
        let h = self.rows[j].h();
        let a_next = self.rows[j].a - h / ((1.0 - p) * self.model.consts().a_bar);
        if a_next < 0.0 {
            return Ghost::Ruin;
        }
        let k = ((a_next / self.da).floor() as usize).min(j - 1);
        let theta = ((k + 1) as f64 * self.da - a_next) / self.da;
        Ghost::Column {
            k,
            theta: theta.clamp(0.0, 1.0),
        }
    }

    /// Best transaction value at each node of row `j` and which one it is.
    fn obstacles(&self, j: usize) -> Vec<(f64, Branch)> {
        let a_bar = self.model.consts().a_bar;
        let p = self.model.params().p;
        let row = &self.rows[j];
        (0..self.n_w)
            .map(|i| {
                let w = row.w(i);
                let mut best = (f64::INFINITY, Branch::Diffuse);
                let w_buy = w - a_bar * self.da;
                if !(self.restricted && w_buy < 0.0) {
                    let v = self.value_on_row(j + 1, w_buy);
                    if v < best.0 {
                        best = (v, Branch::Buy);
                    }
                }
                if j > 0 {
                    let v = self.value_on_row(j - 1, w + (1.0 - p) * a_bar * self.da);
                    if v < best.0 {
                        best = (v, Branch::Surrender);
                    }
                }
                best
            })
            .collect()
    }

    /// Solve the obstacle problem on row `j` with the other rows frozen.
    /// Returns the sup change of the row.
    fn solve_row(&mut self, j: usize, policy_iters: usize, tol: f64) -> f64 {
        let prm = *self.model.params();
        let merton = self.model.merton_factor();
        let obstacles = self.obstacles(j);
        let ghost = if self.restricted {
            Some(self.ghost(j))
        } else {
            None
        };
        // Ghost pieces that do not involve the row itself.
        let (ghost_const, ghost_self) = match ghost {
            None => (0.0, 0.0),
            Some(Ghost::Ruin) => (1.0, 0.0),
            Some(Ghost::Column { k, theta }) => {
                if k + 1 == j {
                    (theta * self.rows[k].values[0], 1.0 - theta)
                } else {
                    (
                        theta * self.rows[k].values[0] + (1.0 - theta) * self.rows[k + 1].values[0],
                        0.0,
                    )
                }
            }
        };
        let n = self.n_w;
        let h = self.rows[j].h();
        let a = self.rows[j].a;
        let fixed_first = !self.restricted || j == 0;
        let old = self.rows[j].values.clone();

        let mut psi = old.clone();
        let mut branches = vec![Branch::Diffuse; n];
        let mut pis = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for _ in 0..policy_iters {
            let prev_branches = branches.clone();
            for i in 0..n {
                lower[i] = 0.0;
                upper[i] = 0.0;
                let is_first = i == 0;
                if (is_first && fixed_first) || i == n - 1 {
                    branches[i] = Branch::Fixed;
                    diag[i] = 1.0;
                    // Ruin at the lower end, safety at the upper end.
                    rhs[i] = if i == n - 1 { 0.0 } else { 1.0 };
                    continue;
                }
                let w = self.rows[j].w(i);
                let below = if is_first {
                    ghost_const + ghost_self * psi[0]
                } else {
                    psi[i - 1]
                };
                let above = psi[i + 1];
                let d1 = (above - below) / (2.0 * h);
                let d2 = (above - 2.0 * psi[i] + below) / (h * h);
                let pi = if d1 < 0.0 {
                    if d2 > 0.0 {
                        (-merton * d1 / d2).min(self.pi_cap)
                    } else {
                        self.pi_cap
                    }
                } else {
                    0.0
                };
                pis[i] = pi;
                let s = prm.sigma * prm.sigma * pi * pi;
                let beta = prm.r * w - prm.c + a + (prm.mu - prm.r) * pi;
                let (up, dn) = if s >= h * beta.abs() {
                    (
                        s / (2.0 * h * h) + beta / (2.0 * h),
                        s / (2.0 * h * h) - beta / (2.0 * h),
                    )
                } else {
                    (
                        s / (2.0 * h * h) + beta.max(0.0) / h,
                        s / (2.0 * h * h) + (-beta).max(0.0) / h,
                    )
                };
                let dg = prm.lambda_s + up + dn;
                let target = (up * above + dn * below) / dg;
                let (g, gb) = obstacles[i];
                if g < target - 1e-15 {
                    branches[i] = gb;
                    diag[i] = 1.0;
                    rhs[i] = g;
                } else {
                    branches[i] = Branch::Diffuse;
                    upper[i] = -up;
                    if is_first {
                        diag[i] = dg - dn * ghost_self;
                        rhs[i] = dn * ghost_const;
                    } else {
                        diag[i] = dg;
                        lower[i] = -dn;
                        rhs[i] = 0.0;
                    }
                }
            }
            let next = thomas(&lower, &diag, &upper, &rhs);
            let change = sup_diff(&next, &psi);
            psi = next;
            if change < 0.1 * tol && branches == prev_branches {
                break;
            }
        }
        for v in psi.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let change = sup_diff(&psi, &old);
        let row = &mut self.rows[j];
        row.values = psi;
        row.branches = branches;
        row.pi = pis;
        change
    }
}

fn sup_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solve the inequality on a boundary-fitted grid for the given regime.
pub fn fd_solve(model: &Model, regime: Regime, grid: &GridConfig) -> Result<GridResult> {
    grid.validate()?;
    let prm = model.params();
    if !(prm.c > 0.0) {
        return Err(Error::InvalidParams(format!(
            "c > 0 required (c = {})",
            prm.c
        )));
    }
    if regime.is_restricted() {
        let ps = critical_charge(model)?;
        let high = prm.p >= ps - crate::restricted_high::REGIME_TOL;
        if high != (regime == Regime::RestrictedHigh) {
            return Err(Error::Regime(format!(
                "regime {regime} does not match p = {} with p* = {ps}",
                prm.p
            )));
        }
    }
    let restricted = regime.is_restricted();
    let a_end = if restricted {
        prm.c
    } else {
        model.a_max_unrestricted()
    };
    let n_rows = grid.n_a - 1;
    let da = a_end / n_rows as f64;
    let mut solver = Solver {
        model,
        restricted,
        n_w: grid.n_w,
        n_rows,
        da,
        a_end,
        pi_cap: grid.pi_cap_factor * prm.c * model.consts().a_bar,
        rows: Vec::with_capacity(n_rows),
    };
    for j in 0..n_rows {
        let a = j as f64 * da;
        let (lo, hi) = solver.domain(a)?;
        let values = (0..grid.n_w)
            .map(|i| 1.0 - i as f64 / (grid.n_w - 1) as f64)
            .collect();
        solver.rows.push(GridRow {
            a,
            w_lo: lo,
            w_hi: hi,
            values,
            branches: vec![Branch::Diffuse; grid.n_w],
            pi: vec![0.0; grid.n_w],
        });
    }

    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < grid.max_sweeps {
        sweeps += 1;
        change = 0.0;
        for j in 0..n_rows {
            change = f64::max(
                change,
                solver.solve_row(j, grid.policy_iters, grid.grid_tol),
            );
        }
        for j in (0..n_rows).rev() {
            change = f64::max(
                change,
                solver.solve_row(j, grid.policy_iters, grid.grid_tol),
            );
        }
        if change < grid.grid_tol {
            break;
        }
    }
    if !(change < grid.grid_tol) {
        return Err(Error::GridConvergence {
            iterations: sweeps,
            residual: change,
        });
    }
    let pi_cap = solver.pi_cap;
    let pi_clipped = solver
        .rows
        .iter()
        .flat_map(|r| r.branches.iter().zip(&r.pi))
        .filter(|(b, &pi)| **b == Branch::Diffuse && pi >= pi_cap)
        .count();
    Ok(GridResult {
        regime,
        rows: solver.rows,
        da,
        sweeps,
        last_change: change,
        pi_clipped,
        pi_cap,
    })
}
