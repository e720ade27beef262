use std::fs;
use std::path::Path;
use std::process::Command;

use convex_switching::cli::run_args;

const SMALL: &str = "\
horizon = 24

[battery]
p_max = 30.0

[grid]
count = 61

[sampling]
count = 500

[diagnostics]
paths = 8
subsims = 6
seed = 42
";

fn run(args: &[&str]) -> convex_switching::Result<String> {
    let mut out = Vec::new();
    let mut full = vec!["cswitch"];
    full.extend_from_slice(args);
    run_args(full, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn binary_reports_one_line_causes() {
    let exe = env!("CARGO_BIN_EXE_cswitch");
    let help = Command::new(exe).arg("--help").output().unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("diagnose"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[ar1]\nphi = \"x\"\n");
    let out = Command::new(exe)
        .args(["solve", "--config", &bad, "--out"])
        .arg(dir.path().join("b.bin"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("ar1.phi"), "{err}");

    let out = Command::new(exe).arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stderr)
            .trim_end()
            .lines()
            .count(),
        1
    );

    let out = Command::new(exe)
        .args(["diagnose", "--bundle"])
        .arg(dir.path().join("missing.bin"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stderr)
            .trim_end()
            .lines()
            .count(),
        1
    );
}

#[test]
fn bundle_round_trip_matches_fresh_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let bundle = dir.path().join("small.bin");
    let values = run(&["solve", "--config", &cfg, "--out", p(&bundle)]).unwrap();
    let rows = csv_rows(&values);
    assert_eq!(rows[0], ["level", "value"]);
    assert_eq!(rows.len(), 8);

    let from_bundle = run(&["diagnose", "--bundle", p(&bundle)]).unwrap();
    let fresh = run(&["diagnose", "--config", &cfg]).unwrap();
    let with_both = run(&["diagnose", "--config", &cfg, "--bundle", p(&bundle)]).unwrap();
    assert_eq!(from_bundle, fresh);
    assert_eq!(from_bundle, with_both);
    assert_eq!(
        csv_rows(&fresh)[0],
        ["level", "lower", "lower_se", "upper", "upper_se"]
    );

    let other_seed = run(&["diagnose", "--config", &cfg, "--seed", "7"]).unwrap();
    assert_ne!(other_seed, fresh);
    assert_eq!(
        other_seed,
        run(&["diagnose", "--config", &cfg, "--seed", "7"]).unwrap()
    );
}

#[test]
fn mismatched_bundle_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let bundle = dir.path().join("small.bin");
    run(&["solve", "--config", &cfg, "--out", p(&bundle)]).unwrap();
    let other = write(
        dir.path(),
        "other.toml",
        &format!("{SMALL}\n[ar1]\nphi = 0.5\n"),
    );
    let err = run(&["diagnose", "--config", &other, "--bundle", p(&bundle)])
        .unwrap_err()
        .to_string();
    assert!(err.contains("ar1") && err.contains("re-run solve"), "{err}");
    let err = run(&[
        "simulate",
        "--bundle",
        p(&bundle),
        "--scrap",
        "zero",
        "--out",
        p(dir.path()),
    ])
    .unwrap_err()
    .to_string();
    assert!(err.contains("scrap"), "{err}");
}

#[test]
fn single_path_standard_errors_are_na() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = run(&["diagnose", "--config", &cfg, "--paths", "1"]).unwrap();
    for row in csv_rows(&out).iter().skip(1) {
        assert_eq!(row[2], "NA");
        assert_eq!(row[4], "NA");
        assert!(row[1].parse::<f64>().unwrap() <= row[3].parse::<f64>().unwrap());
    }
}

#[test]
fn one_idle_step_with_full_battery_is_worth_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "idle.toml",
        "horizon = 1\nscrap = \"zero\"\n[actions]\nmargins = [0.0]\n[grid]\ncount = 11\n[sampling]\ncount = 10\n",
    );
    let out = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        p(&dir.path().join("idle.bin")),
    ])
    .unwrap();
    let rows = csv_rows(&out);
    let full = rows.last().unwrap();
    assert_eq!(full[0], "100");
    assert!(full[1].parse::<f64>().unwrap().abs() < 1e-12, "{full:?}");
}

#[test]
fn solve_writes_optional_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let tables = dir.path().join("tables");
    let curves = dir.path().join("curves.csv");
    let values = dir.path().join("values.csv");
    let stdout = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        p(&dir.path().join("b.bin")),
        "--values",
        p(&values),
        "--curves",
        p(&curves),
        "--tables",
        p(&tables),
    ])
    .unwrap();
    assert_eq!(fs::read_to_string(&values).unwrap(), stdout);
    let curves = fs::read_to_string(&curves).unwrap();
    assert_eq!(
        curves.lines().next().unwrap(),
        "z2,price,level,value,margin"
    );
    assert_eq!(curves.lines().count(), 1 + 61 * 7);
    let trans = fs::read_to_string(tables.join("transitions.csv")).unwrap();
    assert_eq!(
        trans.lines().next().unwrap(),
        "level,margin,next_level,probability"
    );
    assert!(tables.join("excess_shortage.csv").exists());
}

#[test]
fn simulate_writes_traces_totals_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("sim");
    run(&[
        "simulate",
        "--config",
        &cfg,
        "--scenarios",
        "20",
        "--start",
        "0",
        "--start",
        "30",
        "--out",
        p(&out),
    ])
    .unwrap();
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    assert_eq!(
        traces.lines().next().unwrap(),
        "start,path,t,z2,level,margin,reward"
    );
    assert_eq!(traces.lines().count(), 1 + 2 * 20 * 25);
    let totals = fs::read_to_string(out.join("totals.csv")).unwrap();
    assert_eq!(totals.lines().count(), 1 + 2 * 20);
    let stats = fs::read_to_string(out.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 2 * 25);

    let again = dir.path().join("again");
    run(&[
        "simulate",
        "--config",
        &cfg,
        "--scenarios",
        "20",
        "--start",
        "0",
        "--start",
        "30",
        "--out",
        p(&again),
    ])
    .unwrap();
    assert_eq!(
        fs::read_to_string(again.join("traces.csv")).unwrap(),
        traces
    );

    let err = run(&[
        "simulate",
        "--config",
        &cfg,
        "--start",
        "12",
        "--out",
        p(&out),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("12"), "{err}");
}

#[test]
fn sweep_writes_rows_and_capacity_curve() {
    let dir = tempfile::tempdir().unwrap();
    let base: String = SMALL
        .lines()
        .map(|l| {
            if let Some(rest) = l.strip_prefix('[') {
                format!("[base.{rest}")
            } else if l.starts_with("horizon") {
                format!("[base]\n{l}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let spec = format!(
        "start_level = 0.0\n{base}\n[[block]]\nphi = [0.9, 0.3]\ncapacity = [10.0, 20.0]\n\n[[block]]\ncapacity = [10.0, 20.0]\nscrap = [\"sell\", \"zero\"]\n"
    );
    let spec = write(dir.path(), "sweep.toml", &spec);
    let out = dir.path().join("sweep");
    let stdout = run(&["sweep", "--config", &spec, "--out", p(&out)]).unwrap();
    let rows = csv_rows(&stdout);
    assert_eq!(
        rows[0],
        [
            "phi",
            "capacity",
            "scrap",
            "start_level",
            "value",
            "lower",
            "lower_se",
            "upper",
            "upper_se"
        ]
    );
    assert_eq!(rows.len(), 1 + 6);
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap(), stdout);
    let curve = fs::read_to_string(out.join("capacity_curve.csv")).unwrap();
    assert_eq!(
        curve.lines().next().unwrap(),
        "phi,scrap,capacity,lower,upper,marginal"
    );
    assert_eq!(curve.lines().count(), 1 + 6);

    let bad = write(
        dir.path(),
        "bad.toml",
        "[base]\nhorizon = 2\n[[block]]\ncapacity = [10.0, 7.0]\n",
    );
    let err = run(&["sweep", "--config", &bad, "--out", p(&out)])
        .unwrap_err()
        .to_string();
    assert!(err.contains("capacity=7"), "{err}");
}

#[test]
fn bad_flags_are_rejected() {
    assert!(run(&["diagnose", "--preset", "paper", "--config", "x.toml"]).is_err());
    let err = run(&[
        "--threads",
        "0",
        "diagnose",
        "--preset",
        "paper",
        "--bundle",
        "nowhere.bin",
    ])
    .unwrap_err();
    assert!(err.to_string().contains("threads"), "{err}");
    assert!(run(&["sweep", "--out", "x"])
        .unwrap_err()
        .to_string()
        .contains("--preset"));
}
