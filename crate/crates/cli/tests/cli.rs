use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gfe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = gfe(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn averages(dir: &Path, method: &str) -> Vec<f64> {
    let v: Value = serde_json::from_str(&read(dir, "exponents.json")).unwrap();
    v["methods"][method]["average"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn help_lists_subcommands_and_flags() {
    let o = Command::new(env!("CARGO_BIN_EXE_gfe")).arg("--help").output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    for sub in ["exponents", "period", "portrait", "sweep", "compare"] {
        assert!(text.contains(sub), "missing {sub}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_gfe")).args(["exponents", "--help"]).output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    for flag in ["--system", "--set", "--seed", "--T", "--m", "--transient", "--tol-abs", "--tol-rel", "--out", "--views", "--workers", "--config"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    assert!(!gfe(&["exponents", "--bogus"], dir.path()).status.success());
    assert!(!gfe(&["exponents", "--system", "nope"], dir.path()).status.success());
    assert!(!gfe(&["exponents", "--seed", "1,2"], dir.path()).status.success());
    assert!(!gfe(&["exponents", "--set", "q=1"], dir.path()).status.success());
    assert!(!gfe(&["portrait", "--views", "xw"], dir.path()).status.success());
}

#[test]
fn rosenbrock_exponents() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(&["exponents", "--system", "rosenbrock", "--T", "1.0471975511965976", "--m", "1"], dir.path());
    assert!(stdout.contains("GFE"));
    assert!(close(&averages(dir.path(), "GFE"), &[2.0, -13.0], 1e-6));
    assert!(close(&averages(dir.path(), "LE_V"), &[-1.0, -10.0], 1e-8));
    let csv = read(dir.path(), "exponents.csv");
    assert!(csv.starts_with("window,method,c1,c2\n"));
}

#[test]
fn lorenz_sums_match_trace() {
    let dir = TempDir::new().unwrap();
    ok(&["exponents", "--system", "lorenz", "--T", "0.4", "--m", "20", "--transient", "50"], dir.path());
    let v: Value = serde_json::from_str(&read(dir.path(), "exponents.json")).unwrap();
    let trace = v["trace_average"].as_f64().unwrap();
    assert!((trace + 41.0 / 3.0).abs() < 1e-9);
    for m in ["LE_J", "LE_O", "LE_V", "GFE"] {
        let sum = v["methods"][m]["sum"].as_f64().unwrap();
        assert!((sum - trace).abs() < 1e-6, "{m}: {sum}");
    }
}

#[test]
fn exponents_on_detected_period() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(&["exponents", "--set", "b=0.8", "--methods", "GFE"], dir.path());
    assert!(stdout.contains("(0*, -, -)"), "{stdout}");
    assert!(close(&averages(dir.path(), "GFE"), &[0.0002, -0.1456, -0.6542], 0.02));
    // An aperiodic orbit without --T has nothing to measure.
    let o = gfe(&["exponents", "--system", "lorenz", "--transient", "50"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn period_reports_rotation() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["period", "--set", "b=0.392", "--crossings"], dir.path());
    assert!(s.contains("classification: closed") && s.contains("rotation: 2") && s.contains("period: 12.717"), "{s}");
    let csv = read(dir.path(), "crossings.csv");
    assert!(csv.starts_with("t,x1,x2,x3\n"));
    assert_eq!(csv.lines().count(), 3);

    let s = ok(&["period", "--set", "b=0.3341"], dir.path());
    assert!(s.contains("rotation: 13") && s.contains("period: 84.19"), "{s}");

    let s = ok(&["period", "--system", "circle"], dir.path());
    assert!(s.contains("rotation: 1") && s.contains("period: 6.28319"), "{s}");
}

#[test]
fn period_coordinate_section() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["period", "--system", "lorenz", "--transient", "10", "--max-time", "20", "--section", "z=27"], dir.path());
    assert!(s.contains("unresolved"));
    let csv = read(dir.path(), "crossings.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r.split(',').nth(3).unwrap(), "27");
    }
}

#[test]
fn portrait_outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["portrait", "--system", "lorenz", "--T", "0.4", "--m", "50", "--transient", "20", "--views", "xy,xz,iso"];
    ok(&args, a.path());
    let mut seq = args.to_vec();
    seq.extend(["--workers", "1"]);
    ok(&seq, b.path());
    for f in ["portrait.json", "portrait_xy.svg", "portrait_xz.svg", "portrait_iso.svg"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs");
    }
    let doc: Value = serde_json::from_str(&read(a.path(), "portrait.json")).unwrap();
    assert_eq!(doc["samples"].as_array().unwrap().len(), 51);
    assert!(read(a.path(), "portrait_xy.svg").starts_with("<svg") || read(a.path(), "portrait_xy.svg").starts_with("<?xml"));
}

#[test]
fn sweep_rows_in_input_order() {
    let dir = TempDir::new().unwrap();
    ok(&["sweep", "--param", "b", "--values", "0.8,0.6,0.5", "--methods", "GFE"], dir.path());
    let csv = read(dir.path(), "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "b,classification,period,rotation,cycles,GFE_c1,GFE_c2,GFE_c3,error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["0.8", "0.6", "0.5"]);
    for r in &rows {
        assert_eq!((r[1], r[3], r[4]), ("closed", "1", "1"), "{r:?}");
        assert!(r[8].is_empty());
    }
    let seq = TempDir::new().unwrap();
    ok(&["sweep", "--param", "b", "--values", "0.8,0.6,0.5", "--methods", "GFE", "--workers", "1"], seq.path());
    assert_eq!(csv, read(seq.path(), "sweep.csv"));
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = TempDir::new().unwrap();
    ok(&["sweep", "--param", "b", "--values", ""], dir.path());
    assert_eq!(read(dir.path(), "sweep.csv").lines().count(), 1);
    assert!(!gfe(&["sweep", "--param", "nope", "--values", "1"], dir.path()).status.success());
}

#[test]
fn compare_identical_orbit_scores_one() {
    let dir = TempDir::new().unwrap();
    let s = ok(&["compare", "--set", "b=0.8", "--span", "100"], dir.path());
    assert!(s.contains("score: 1") || s.contains("score: 0.9999"), "{s}");
    let csv = read(dir.path(), "compare.csv");
    assert!(csv.starts_with("t,chaotic,periodic,shift,score\n"));
    assert_eq!(csv.lines().count(), 1002);
    let o = gfe(&["compare", "--set", "b=0.3342", "--periodic-set", "b=0.314", "--span", "100"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# rosenbrock window\nsystem = rosenbrock\nT = 1.0471975511965976\nm = 1\nmethods = LE_J\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("a");
    ok(&["exponents", "--config", cfg], &out);
    assert!(close(&averages(&out, "LE_J"), &[-5.5, -5.5], 1e-6));
    let v: Value = serde_json::from_str(&read(&out, "exponents.json")).unwrap();
    assert!(v["methods"].get("GFE").is_none());

    let out = dir.path().join("b");
    ok(&["exponents", "--config", cfg, "--methods", "GFE"], &out);
    assert!(close(&averages(&out, "GFE"), &[2.0, -13.0], 1e-6));

    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    assert!(!gfe(&["exponents", "--config", dir.path().join("bad.cfg").to_str().unwrap()], dir.path()).status.success());
}
