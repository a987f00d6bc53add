//! Command-line front end: constants, ruin-probability curves, purchase
//! slope sweeps, verification suites and simulation.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on usage
//! or validation errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams, PortfolioState};
use crate::regime::{classify, RegimeSolution};
use crate::restricted_high::critical_charge;
use crate::restricted_low::purchase_slope_sweep;
use crate::verify::checks;
use crate::verify::fd::GridConfig;
use crate::verify::mc::{mc_simulate, SimConfig};
use crate::verify::report::{Report, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "annuity-ruin",
    version,
    about = "Minimum probability of lifetime ruin with reversible annuities"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Model parameters given here override
/// the config file, which overrides the base scenario.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Riskless rate [default: 0.02].
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Risky drift [default: 0.06].
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Risky volatility [default: 0.2].
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Subjective hazard rate [default: 0.04].
    #[arg(long = "lambda-s", global = true)]
    pub lambda_s: Option<f64>,
    /// Hazard rate used to price annuities [default: 0.04].
    #[arg(long = "lambda-o", global = true)]
    pub lambda_o: Option<f64>,
    /// Consumption rate [default: 1].
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Proportional surrender charge [default: 0.5].
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Keep wealth non-negative (annuities cannot be borrowed against).
    #[arg(long, global = true)]
    pub restricted: bool,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file with any of r, mu, sigma, lambda_s, lambda_o, c, p.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the simulation suite and `simulate`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived constants, the critical charge and the regime.
    Constants,
    /// CSV `w,psi,pi_star` along the wealth axis at fixed income.
    Curve {
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// CSV `p,b`: purchase slope over charges up to the critical charge.
    BpSweep {
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Run verification suites and print one CHECK line per check.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Paths per start state for the simulation suite.
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
    /// Simulate the optimally controlled wealth process from one state.
    /// With --out, also writes CSV `path,outcome,tau`.
    Simulate {
        #[arg(long)]
        w: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Residual,
    Vi,
    Shape,
    Fd,
    Mc,
    Seam,
    All,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    r: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    lambda_s: Option<f64>,
    lambda_o: Option<f64>,
    c: Option<f64>,
    p: Option<f64>,
}

fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

impl CommonArgs {
    /// Base scenario, then the config file, then flags.
    pub fn params(&self) -> Result<ModelParams> {
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let base = ModelParams::default();
        let pick = |flag: Option<f64>, file: Option<f64>, base: f64| flag.or(file).unwrap_or(base);
        let params = ModelParams {
            r: pick(self.r, file.r, base.r),
            mu: pick(self.mu, file.mu, base.mu),
            sigma: pick(self.sigma, file.sigma, base.sigma),
            lambda_s: pick(self.lambda_s, file.lambda_s, base.lambda_s),
            lambda_o: pick(self.lambda_o, file.lambda_o, base.lambda_o),
            c: pick(self.c, file.c, base.c),
            p: pick(self.p, file.p, base.p),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let common = &cli.common;
    let model = Model::new(common.params()?)?;
    match &cli.command {
        Command::Constants => {
            let text = constants_report(&model, common.restricted)?;
            emit(common.out.as_deref(), stdout, &text)?;
            Ok(EXIT_OK)
        }
        Command::Curve { a, points } => {
            let sol = RegimeSolution::solve(&model, common.restricted)?;
            emit(
                common.out.as_deref(),
                stdout,
                &curve_csv(&sol, *a, *points)?,
            )?;
            Ok(EXIT_OK)
        }
        Command::BpSweep { points } => {
            emit(
                common.out.as_deref(),
                stdout,
                &bp_sweep_csv(&model, *points)?,
            )?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, paths } => {
            let sol = RegimeSolution::solve(&model, common.restricted)?;
            let sim = SimConfig {
                n_paths: *paths,
                seed: common.seed,
                ..SimConfig::default()
            };
            sim.validate()?;
            let (report, error) = match run_suite(&sol, *suite, &sim) {
                Ok(report) => (report, None),
                Err((report, e)) => (report, Some(e)),
            };
            let mut text = report.to_string();
            if let Some(e) = &error {
                text.push_str(&format!("ERROR {e}\n"));
            }
            let ok = error.is_none() && report.passed();
            text.push_str(&format!(
                "SUMMARY regime=\"{}\" pass={} fail={} skip={} result={}\n",
                sol.regime(),
                report.count(Status::Pass),
                report.count(Status::Fail),
                report.count(Status::Skip),
                if ok { "PASS" } else { "FAIL" }
            ));
            emit(common.out.as_deref(), stdout, &text)?;
            Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Simulate {
            w,
            a,
            paths,
            dt,
            horizon,
        } => {
            let sol = RegimeSolution::solve(&model, common.restricted)?;
            let sim = SimConfig {
                n_paths: *paths,
                dt: *dt,
                horizon: *horizon,
                seed: common.seed,
                ..SimConfig::default()
            };
            let start = PortfolioState::new(*w, *a)?;
            let res = mc_simulate(&sol, start, &sim)?;
            let exact = sol.psi(*w, *a);
            let mut text = String::new();
            text.push_str(&format!("regime = {}\n", sol.regime()));
            text.push_str(&format!("estimate = {:.16e}\n", res.estimate));
            text.push_str(&format!("std_err = {:.16e}\n", res.std_err));
            match exact {
                Ok(v) => text.push_str(&format!("psi = {v:.16e}\n")),
                Err(e) => text.push_str(&format!("psi = unavailable ({e})\n")),
            }
            text.push_str(&format!(
                "n_ruin = {}\nn_safe = {}\nn_censored = {}\ncensored_weight = {:.16e}\n",
                res.n_ruin, res.n_safe, res.n_censored, res.censored_weight
            ));
            stdout.write_all(text.as_bytes())?;
            if let Some(path) = &common.out {
                let mut csv = String::from("path,outcome,tau\n");
                for (i, rec) in res.paths.iter().enumerate() {
                    csv.push_str(&format!("{i},{},{:.16e}\n", rec.outcome.as_str(), rec.tau));
                }
                fs::write(path, csv)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn constants_report(model: &Model, restricted: bool) -> Result<String> {
    let k = model.consts();
    let mut s = String::new();
    s.push_str(&format!("a_bar = {:.16e}\n", k.a_bar));
    s.push_str(&format!("m = {:.16e}\n", k.m));
    s.push_str(&format!("b1 = {:.16e}\n", k.b1));
    s.push_str(&format!("b2 = {:.16e}\n", k.b2));
    match critical_charge(model) {
        Ok(ps) => s.push_str(&format!("p_star = {ps:.16e}\n")),
        Err(e) => s.push_str(&format!("p_star = unavailable ({e})\n")),
    }
    s.push_str(&format!("regime = {}\n", classify(model, restricted)?));
    Ok(s)
}

/// `n` evenly spaced wealth levels over the interval where the investment
/// rule applies: the whole domain, or zero to the purchase level when
/// income is bought early.
pub fn curve_csv(sol: &RegimeSolution, a: f64, n: usize) -> Result<String> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "curve needs at least 2 points, got {n}"
        )));
    }
    let (lo, hi) = sol.continuation_domain(a)?;
    let mut s = String::from("w,psi,pi_star\n");
    for i in 0..n {
        let w = if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        };
        let psi = sol.psi(w, a)?;
        let pi = if sol.income_in_range(a) {
            sol.pi_star_closed(w, a)?
        } else {
            0.0
        };
        s.push_str(&format!("{w:.16e},{psi:.16e},{pi:.16e}\n"));
    }
    Ok(s)
}

pub fn bp_sweep_csv(model: &Model, n: usize) -> Result<String> {
    let mut s = String::from("p,b\n");
    for (p, b) in purchase_slope_sweep(model, n)? {
        s.push_str(&format!("{p:.16e},{b:.16e}\n"));
    }
    Ok(s)
}

/// Incomes used by the line-based suites, spread over the income range.
fn suite_incomes(sol: &RegimeSolution) -> Vec<f64> {
    [0.0, 0.25, 0.5, 0.75]
        .iter()
        .map(|f| f * sol.a_end())
        .collect()
}

/// Runs the selected suite. On an error the lines gathered so far are
/// returned with it.
pub fn run_suite(
    sol: &RegimeSolution,
    suite: Suite,
    sim: &SimConfig,
) -> std::result::Result<Report, (Report, Error)> {
    let mut report = Report::new();
    let suites: &[Suite] = match suite {
        Suite::All => &[
            Suite::Residual,
            Suite::Vi,
            Suite::Shape,
            Suite::Fd,
            Suite::Mc,
            Suite::Seam,
        ],
        _ => std::slice::from_ref(&suite),
    };
    for &s in suites {
        match single_suite(sol, s, sim) {
            Ok(r) => report.extend(r),
            Err(e) => return Err((report, e)),
        }
    }
    Ok(report)
}

fn single_suite(sol: &RegimeSolution, suite: Suite, sim: &SimConfig) -> Result<Report> {
    let mut report = Report::new();
    let incomes = suite_incomes(sol);
    match suite {
        Suite::Residual => {
            let mut pts = checks::interior_points(sol, 5, 3)?;
            pts.extend(checks::purchase_region_points(sol, 3, 3)?);
            report.extend(checks::check_hjb_residual(sol, &pts)?);
        }
        Suite::Vi => {
            let mut pts = checks::interior_points(sol, 5, 3)?;
            let d2 = checks::purchase_region_points(sol, 3, 3)?;
            pts.extend(d2.iter().copied());
            report.extend(checks::check_variational_inequalities(sol, &pts)?);
            if !d2.is_empty() {
                report.extend(checks::check_purchase_binding(sol, &d2)?);
            }
            if sol.regime().is_restricted() {
                report.extend(checks::check_surrender_binding(sol, &incomes[1..])?);
            }
        }
        Suite::Shape => {
            for &a in &incomes {
                report.extend(checks::check_shape(sol, a, 100)?);
                report.extend(checks::check_investment_positive(sol, a, 20)?);
                report.extend(checks::check_dual_concavity(sol, a, 50)?);
            }
        }
        Suite::Fd => {
            report.extend(checks::check_fd(
                sol,
                &GridConfig::new(201, 51),
                Some(&GridConfig::new(401, 101)),
            )?);
        }
        Suite::Mc => {
            let starts = checks::interior_points(sol, 3, 3)?;
            report.extend(checks::check_mc(sol, &starts, sim)?);
        }
        Suite::Seam => report.extend(checks::check_seam(sol.model(), 5)?),
        Suite::All => unreachable!("expanded by run_suite"),
    }
    Ok(report)
}
