//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Every criterion is one experiment over a config in `configs/`; the checks
//! below re-read the reported numbers against fixed thresholds rather than
//! trusting the report's own verdict.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use thetageo_cli::config::ExperimentConfig;
use thetageo_cli::report::Report;
use thetageo_cli::{run, Kind, RunOptions};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn report(kind: Kind, name: &str) -> Report {
    let cfg = ExperimentConfig::load(&config_path(name)).unwrap();
    run(kind, &cfg, RunOptions::default()).unwrap().report
}

fn verdict(n: u32, pass: bool, summary: String) {
    println!(
        "{} criterion {n}: {summary}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {summary}");
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn array(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(f).collect()
}

#[test]
fn criterion_01_orthogonality() {
    let r = report(Kind::GramCheck, "gram.toml");
    let rows = r.details["gram"].as_array().unwrap();
    let worst = rows
        .iter()
        .map(|g| f(&g["max_off_diagonal"]))
        .fold(0.0, f64::max);
    let covered: Vec<(u64, u64)> = rows
        .iter()
        .map(|g| (g["m"].as_u64().unwrap(), g["k"].as_u64().unwrap()))
        .collect();
    let expected: Vec<(u64, u64)> = (2..=8).map(|k| (1, k)).chain([(2, 2), (2, 3)]).collect();
    verdict(
        1,
        covered == expected && worst < 1e-10,
        format!("max normalized off-diagonal {worst:e} over m=1 k=2..8 and m=2 k=2,3"),
    );
}

#[test]
fn criterion_02_flat_closed_form() {
    let r = report(Kind::GramCheck, "flat.toml");
    let rows = r.details["flat"].as_array().unwrap();
    let mut worst: f64 = 0.0;
    for row in rows {
        let m = row["m"].as_u64().unwrap() as i32;
        let k = f(&row["k"]);
        let pi4 = 4.0 * std::f64::consts::PI;
        let exact = pi4.powi(m) / (2.0 * k).powf(m as f64 / 2.0);
        assert!((f(&row["closed_form"]) / exact - 1.0).abs() < 1e-15);
        worst = worst.max(f(&row["max_relative_error"]));
    }
    let m1 = rows.iter().filter(|r| r["m"] == 1).count();
    verdict(
        2,
        m1 == 64 && rows.len() > m1 && worst < 1e-11,
        format!(
            "max relative error {worst:e} over {} (m, k) levels",
            rows.len()
        ),
    );
}

#[test]
fn criterion_03_regularity() {
    let r = report(Kind::Regularity, "regularity.toml");
    let slope = f(&r.details["slope"]);
    let r2 = f(&r.details["r_squared"]);
    verdict(
        3,
        (slope + 1.0).abs() <= 0.15 && r2 > 0.99,
        format!("log-log slope {slope:.4} (target -1 +- 0.15), R^2 {r2:.5}"),
    );
}

#[test]
fn criterion_04_expansion() {
    let r = report(Kind::ExpansionFit, "expansion.toml");
    let points = r.details["points"].as_array().unwrap();
    assert_eq!(points.len(), 9);
    let mut gap: f64 = 0.0;
    let mut c0: f64 = 0.0;
    let mut slope_dev: f64 = 0.0;
    for p in points {
        let c = array(&p["coefficients"]);
        gap = gap.max((c[1] - f(&p["target"])).abs());
        c0 = c0.max(c[0].abs());
        slope_dev = slope_dev.max((f(&p["residual_slope"]) + 2.0).abs());
    }
    verdict(
        4,
        gap < 5e-4 && c0 < 1e-6 && slope_dev <= 0.2,
        format!("max |c1 - ln R_inf| {gap:e}, max |c0| {c0:e}, max residual slope deviation {slope_dev:.3}"),
    );
}

#[test]
fn criterion_05_cinf_facets() {
    let r = report(Kind::Geodesic, "geodesic.toml");
    let levels = r.details["levels"].as_array().unwrap();
    let dt: Vec<f64> = levels.iter().map(|l| f(&l["sup_dt"])).collect();
    let dy: Vec<f64> = levels.iter().map(|l| f(&l["sup_dy"])).collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let last = levels.last().unwrap();
    assert_eq!(last["k"], 256);
    let end = dt.last().unwrap().max(*dy.last().unwrap());
    verdict(
        5,
        decreasing(&dt) && decreasing(&dy) && end < 1e-3,
        format!("sup d_t {}, sup d_y {}", sci(&dt), sci(&dy)),
    );
}

#[test]
fn criterion_06_bernstein() {
    let r = report(Kind::Bernstein, "bernstein.toml");
    let decays = r.details["decays"].as_array().unwrap();
    assert_eq!(decays.len(), 10);
    let worst = decays
        .iter()
        .map(|d| f(&d["slope"]))
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = f(&r.details["max_consistency_gap"]);
    verdict(
        6,
        worst <= -0.8 && gap <= 1e-12,
        format!("largest decay slope {worst:.3} (needs <= -1 + 0.2), f = 1 gap {gap:e}"),
    );
}

#[test]
fn criterion_07_riemann() {
    let r = report(Kind::RiemannSum, "riemann.toml");
    let fns = r.details.as_array().unwrap();
    let exact = fns
        .iter()
        .map(|s| f(&s["max_exact_error"]))
        .fold(0.0, f64::max);
    let alias = fns
        .iter()
        .map(|s| f(&s["max_alias_error"]))
        .fold(0.0, f64::max);
    let aliased_case = fns.iter().any(|s| s["degree"].as_i64().unwrap() >= 8);
    verdict(
        7,
        exact < 1e-13 && alias < 1e-13 && aliased_case,
        format!("exact error {exact:e} for degree < k, aliasing error {alias:e}, k in 1..=64"),
    );
}

#[test]
fn criterion_08_density() {
    let r = report(Kind::Density, "density.toml");
    assert_eq!(r.details["grid_points"], 16);
    let curved = r.details["curved"].as_array().unwrap();
    let flat = r.details["flat"].as_array().unwrap();
    let within = curved
        .iter()
        .all(|l| f(&l["max_deviation"]) < 10.0 / f(&l["k"]));
    let worst_scaled = curved.iter().map(|l| f(&l["scaled"])).fold(0.0, f64::max);
    let worst_flat = flat
        .iter()
        .filter(|l| f(&l["k"]) >= 16.0)
        .map(|l| f(&l["max_deviation"]))
        .fold(0.0, f64::max);
    verdict(
        8,
        within && worst_flat < 1e-8 && !flat.is_empty(),
        format!("max k |k^-m Pi_k - 1| {worst_scaled:.3} (< 10), flat {worst_flat:e}"),
    );
}

#[test]
fn criterion_09_harmonic() {
    let r = report(Kind::Harmonic, "harmonic.toml");
    let interval = &r.details["interval"];
    assert_eq!(interval["points"], 20);
    let diff = f(&interval["max_difference"]);
    let disk = r.details["disk"].as_array().unwrap();
    let qs: Vec<&Value> = disk.iter().map(|d| &d["q"]).collect();
    let distinct_q = {
        let mut v = qs.clone();
        v.dedup();
        v.len()
    };
    let gap = disk.iter().map(|d| f(&d["gap"])).fold(0.0, f64::max);
    verdict(
        9,
        diff < 1e-10 && distinct_q >= 3 && gap < 5e-4,
        format!("interval max difference {diff:e}, disk max |c1 - ln K_inf| {gap:e} at {distinct_q} points q"),
    );
}

fn run_binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_thetageo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut verified = true;
    let mut notes = Vec::new();
    for (kind, cfg) in [
        ("expansion-fit", "expansion.toml"),
        ("geodesic", "geodesic.toml"),
        ("harmonic", "harmonic.toml"),
        ("riemann-sum", "riemann.toml"),
    ] {
        let path = config_path(cfg);
        let path = path.to_str().unwrap();
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        let v = tmp.path().join(format!("{kind}-v"));
        let ra = run_binary(&[kind, "--config", path, "--out", a.to_str().unwrap()]);
        let rb = run_binary(&[
            kind,
            "--config",
            path,
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "1",
        ]);
        assert!(
            ra.status.success() && rb.status.success(),
            "{kind} run failed"
        );
        let (fa, fb) = (dir_contents(&a), dir_contents(&b));
        assert!(fa.len() >= 2, "{kind} wrote {} files", fa.len());
        identical &= fa == fb;

        let rv = run_binary(&[
            kind,
            "--config",
            path,
            "--out",
            v.to_str().unwrap(),
            "--verify",
        ]);
        let report: Value =
            serde_json::from_slice(&std::fs::read(v.join("report.json")).unwrap()).unwrap();
        let rows = report["verify"]["rows"].as_array().unwrap();
        let ok = rv.status.success()
            && !rows.is_empty()
            && rows.iter().all(|r| f(&r["deviation"]) <= f(&r["tol"]));
        verified &= ok;
        let worst = rows
            .iter()
            .map(|r| f(&r["deviation"]) / f(&r["tol"]))
            .fold(0.0, f64::max);
        notes.push(format!(
            "{kind}: {} files, verify worst ratio {worst:.1e}",
            fa.len()
        ));
    }
    verdict(
        10,
        identical && verified,
        format!(
            "byte-identical reruns {identical}, verify within tolerances {verified} ({})",
            notes.join("; ")
        ),
    );
}

/// Not an acceptance criterion: the regularity slope approaches -1 once the
/// ladder extends past the pre-asymptotic range.
#[test]
fn regularity_slope_on_extended_ladder() {
    let mut cfg = ExperimentConfig::load(&config_path("regularity.toml")).unwrap();
    let reg = cfg.regularity.as_mut().unwrap();
    reg.ladder = vec![128, 256, 512, 1024, 2048];
    reg.nu_star.clear();
    let r = run(Kind::Regularity, &cfg, RunOptions::default())
        .unwrap()
        .report;
    let slope = f(&r.details["slope"]);
    println!("extended-ladder regularity slope {slope:.4}");
    assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
}
