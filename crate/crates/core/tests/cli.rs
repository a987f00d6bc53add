use std::fs;
use std::process::{Command, Output};

use annuity_ruin::verify::fd::{fd_solve, GridConfig};
use annuity_ruin::{Model, ModelParams, Regime};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annuity-ruin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn value_of(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
        .to_string()
}

// Golden files were written by this binary and are compared byte for byte.
// Their psi columns are checked against the finite-difference oracle below,
// and their end rows against the boundary conditions, so a regression in
// the closed forms cannot simply be re-frozen.
#[test]
fn golden_csv_outputs() {
    let cases = [
        (
            vec!["curve", "--a", "0.25", "--points", "11"],
            "tests/golden/curve_unrestricted.csv",
        ),
        (
            vec![
                "curve",
                "--restricted",
                "--p",
                "0.1",
                "--a",
                "0.5",
                "--points",
                "11",
            ],
            "tests/golden/curve_restricted_low.csv",
        ),
        (
            vec!["bp-sweep", "--points", "5"],
            "tests/golden/bp_sweep.csv",
        ),
    ];
    for (args, path) in cases {
        let out = cli(&args);
        assert!(out.status.success());
        let golden = fs::read_to_string(path).unwrap();
        assert_eq!(stdout(&out), golden, "{path}");
    }
}

#[test]
fn golden_curves_agree_with_grid_oracle() {
    for (p, regime, a, path) in [
        (
            0.5,
            Regime::Unrestricted,
            0.25,
            "tests/golden/curve_unrestricted.csv",
        ),
        (
            0.1,
            Regime::RestrictedLow,
            0.5,
            "tests/golden/curve_restricted_low.csv",
        ),
    ] {
        let model = Model::new(ModelParams::base(p)).unwrap();
        let grid = fd_solve(&model, regime, &GridConfig::new(201, 51)).unwrap();
        let k = grid.rows.iter().rposition(|row| row.a <= a).unwrap();
        let (lower, upper) = (&grid.rows[k], grid.rows.get(k + 1).unwrap_or(&grid.rows[k]));
        let theta = if upper.a > lower.a {
            (a - lower.a) / (upper.a - lower.a)
        } else {
            0.0
        };
        let on_row = |row: &annuity_ruin::verify::fd::GridRow, w: f64| {
            let s = ((w - row.w_lo) / row.h()).clamp(0.0, (row.values.len() - 1) as f64);
            let i = (s.floor() as usize).min(row.values.len() - 2);
            let t = s - i as f64;
            row.values[i] * (1.0 - t) + row.values[i + 1] * t
        };
        for r in csv_rows(&fs::read_to_string(path).unwrap()) {
            let fd = (1.0 - theta) * on_row(lower, r[0]) + theta * on_row(upper, r[0]);
            assert!(
                (r[1] - fd).abs() < 0.02,
                "{path}: w = {} psi = {} grid = {fd}",
                r[0],
                r[1]
            );
        }
    }
}

#[test]
fn constants_report_regimes() {
    let out = cli(&["constants", "--restricted"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(value_of(&text, "regime"), "restricted: p >= p*");
    let ps: f64 = value_of(&text, "p_star").parse().unwrap();
    assert!((ps - 0.258).abs() < 0.002);

    let text = stdout(&cli(&["constants", "--restricted", "--p", "0.1"]));
    assert_eq!(value_of(&text, "regime"), "restricted: p < p*");
    let text = stdout(&cli(&["constants"]));
    assert_eq!(value_of(&text, "regime"), "unrestricted");
}

#[test]
fn exit_codes() {
    let out = cli(&["constants", "--mu", "0.01"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu > r"));
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(cli(&["curve", "--points", "many"]).status.code(), Some(2));
    assert_eq!(cli(&["curve", "--a", "5"]).status.code(), Some(2));
    assert_eq!(cli(&["verify", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["verify", "--suite", "seam"]).status.code(), Some(0));
}

#[test]
fn curve_end_rows() {
    let rows = csv_rows(&stdout(&cli(&["curve", "--a", "0.25", "--points", "200"])));
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0][1], 1.0);
    assert_eq!(rows[199][1], 0.0);
    assert!(rows.windows(2).all(|r| r[1][1] <= r[0][1]));

    let rows = csv_rows(&stdout(&cli(&[
        "curve",
        "--restricted",
        "--a",
        "0",
        "--points",
        "50",
    ])));
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - 1.0).abs() < 1e-10);

    let out = cli(&[
        "curve",
        "--restricted",
        "--p",
        "0.2585037948",
        "--a",
        "0.75",
        "--points",
        "50",
    ]);
    let rows = csv_rows(&stdout(&out));
    assert!(rows[0][1] > 0.22 && rows[0][1] < 0.28, "{}", rows[0][1]);
    assert!(rows.iter().all(|r| r[2] > 0.0));
}

#[test]
fn purchase_slope_sweep_csv() {
    let rows = csv_rows(&stdout(&cli(&["bp-sweep"])));
    assert_eq!(rows.len(), 50);
    assert!(rows.windows(2).all(|r| r[1][1] >= r[0][1]));
    let a_bar = 1.0 / (0.02 + 0.04);
    assert!((rows[49][1] - a_bar).abs() < 1e-6 * a_bar);
    for r in &rows {
        assert!(r[1] >= r[0] / (0.04 + r[0] * 0.02));
    }
    let two = csv_rows(&stdout(&cli(&["bp-sweep", "--points", "2"])));
    assert_eq!(two.len(), 2);
    assert!((two[1][1] - a_bar).abs() < 1e-6 * a_bar);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "p = 0.1\nsigma = 0.25\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = stdout(&cli(&["constants", "--restricted", "--config", cfg]));
    assert_eq!(value_of(&from_file, "regime"), "restricted: p < p*");
    let flag_wins = stdout(&cli(&[
        "constants",
        "--restricted",
        "--config",
        cfg,
        "--p",
        "0.9",
    ]));
    assert_eq!(value_of(&flag_wins, "regime"), "restricted: p >= p*");
    let base = stdout(&cli(&["constants"]));
    assert_ne!(value_of(&from_file, "m"), value_of(&base, "m"));
    let sigma_flag = stdout(&cli(&["constants", "--config", cfg, "--sigma", "0.2"]));
    assert_eq!(value_of(&sigma_flag, "m"), value_of(&base, "m"));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "volatility = 0.2\n").unwrap();
    assert_eq!(
        cli(&["constants", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cli(&["constants", "--config", "/nonexistent/x.conf"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let out = cli(&["curve", "--points", "7", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        stdout(&cli(&["curve", "--points", "7"]))
    );
}

#[test]
fn verify_suites() {
    for args in [
        vec![],
        vec!["--restricted"],
        vec!["--restricted", "--p", "0.1"],
    ] {
        let mut full = vec!["verify", "--suite", "shape"];
        full.extend(args.iter());
        let out = cli(&full);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        let text = stdout(&out);
        assert!(text
            .lines()
            .filter(|l| l.starts_with("CHECK "))
            .all(|l| l.ends_with(" PASS")));
        assert!(text.contains("result=PASS"));
    }
    let out = cli(&["verify", "--suite", "mc", "--paths", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("CHECK mc_gap "))
            .count(),
        9
    );
    assert!(text.contains("est=") && text.contains("se="));
}

#[test]
fn simulate_command() {
    let curve = csv_rows(&stdout(&cli(&["curve", "--points", "2"])));
    let w_safe = format!("{:e}", curve[1][0]);
    let text = stdout(&cli(&["simulate", "--w", &w_safe, "--paths", "100"]));
    assert_eq!(value_of(&text, "estimate").parse::<f64>().unwrap(), 0.0);

    let curve = csv_rows(&stdout(&cli(&["curve", "--a", "0.25", "--points", "2"])));
    // Negative wealth needs the `--w=` form so it is not read as a flag.
    let w_ruin = format!("--w={:e}", curve[0][0]);
    let text = stdout(&cli(&[
        "simulate", &w_ruin, "--a", "0.25", "--paths", "100",
    ]));
    assert_eq!(value_of(&text, "estimate").parse::<f64>().unwrap(), 1.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paths.csv");
    let out = cli(&[
        "simulate",
        "--w",
        "5",
        "--paths",
        "20000",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let est: f64 = value_of(&text, "estimate").parse().unwrap();
    let se: f64 = value_of(&text, "std_err").parse().unwrap();
    let psi: f64 = value_of(&text, "psi").parse().unwrap();
    assert!((est - psi).abs() <= 3.0 * se, "{est} {se} {psi}");
    let csv = fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("path,outcome,tau\n"));
    assert_eq!(csv.lines().count(), 20001);
    let again = cli(&["simulate", "--w", "5", "--paths", "20000", "--seed", "7"]);
    assert_eq!(stdout(&again), text);
}
