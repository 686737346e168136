use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use leonet_core::population::BASELINE_CATALOG_CSV;

fn leonet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leonet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = leonet(args);
    assert!(
        out.status.success(),
        "leonet {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every 40th object of the shipped catalog.
fn small_catalog(dir: &Path) -> PathBuf {
    let mut lines = BASELINE_CATALOG_CSV.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap();
    let body: Vec<&str> = lines.step_by(40).collect();
    let path = dir.join("small.csv");
    std::fs::write(&path, format!("{header}\n{}\n", body.join("\n"))).unwrap();
    path
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        - 1
}

const COARSE: [&str; 4] = ["--shell-km", "400", "--inc-deg", "90"];

#[test]
fn simulate_writes_reloadable_deterministic_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let cat = small_catalog(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let mut args = vec!["simulate", "--catalog", s(&cat), "--runs", "2", "--horizon-years", "2"];
        args.extend([
            "--dt-days",
            "73.05",
            "--seed",
            "7",
            "--snapshot-years",
            "1",
            "--out",
            s(&out),
        ]);
        args.extend(COARSE);
        ok(&args);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "timeseries.csv",
        "collisions.csv",
        "steps.csv",
        "config.toml",
        "snapshot_1y.csv",
    ] {
        let fa = std::fs::read(a.join(f)).unwrap();
        assert_eq!(
            fa,
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
    assert_eq!(data_rows(&a.join("timeseries.csv")), 11);
    assert_eq!(data_rows(&a.join("steps.csv")), 20);
    assert!(std::fs::read_to_string(a.join("timeseries.csv"))
        .unwrap()
        .starts_with("# config_hash="));

    let stdout = ok(&["capacity", "--input", s(&a), "--mode", "2d", "--grid-points", "5"]);
    assert!(stdout.contains("a = "), "{stdout}");
    assert_eq!(data_rows(&a.join("phase_grid.csv")), 25);
    assert!(a.join("capacity.csv").exists() && a.join("equilibria.csv").exists());
}

#[test]
fn network_writes_edges_and_degrees() {
    let tmp = tempfile::tempdir().unwrap();
    let cat = small_catalog(tmp.path());
    let count = |rho: &str| {
        let out = tmp.path().join(format!("net{rho}"));
        let mut args = vec![
            "network",
            "--catalog",
            s(&cat),
            "--repetitions",
            "1",
            "--rho",
            rho,
            "--out",
            s(&out),
        ];
        args.extend(COARSE);
        let stdout = ok(&args);
        assert!(
            stdout.contains("top in-degree") && stdout.contains("top out-degree"),
            "{stdout}"
        );
        assert!(data_rows(&out.join("degrees.csv")) > 0);
        data_rows(&out.join("edges.csv"))
    };
    let all = count("0");
    let strong = count("0.5");
    assert!(all > 0 && strong <= all, "{strong} of {all} edges survive rho = 0.5");
}

#[test]
fn flow_tensor_and_launch_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let mut args = vec!["flow-tensor", "--repetitions", "1", "--out", s(&out)];
    args.extend(COARSE);
    ok(&args);
    assert!(data_rows(&out.join("tensor.csv")) > 0);

    let records = tmp.path().join("launches.csv");
    let mut csv = String::from("epoch,class,a_km,i_deg,mass_kg,area_m2,length_m\n");
    for k in 0..60 {
        let class = ["P", "P", "U", "N"][k % 4];
        let x = k as f64;
        csv += &format!(
            "{},{class},{},{},{},{},{}\n",
            2000.0 + x / 3.0,
            6900.0 + 7.0 * x,
            50.0 + (x * 1.7) % 48.0,
            200.0 + 13.0 * x,
            1.0 + x / 20.0,
            1.5 + (x % 5.0) / 2.0
        );
    }
    std::fs::write(&records, csv).unwrap();
    let stdout = ok(&[
        "fit-launch",
        "--records",
        s(&records),
        "--components",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("proportions P 0.500 U 0.250 N 0.250"), "{stdout}");
    assert!(out.join("launch.toml").exists());
}

#[test]
fn synth_catalog_matches_shipped_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.csv");
    let stdout = ok(&["synth-catalog", "--out", s(&path)]);
    assert!(stdout.starts_with("18826 objects"), "{stdout}");
    let skip = |t: &str| t.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(
        skip(&std::fs::read_to_string(&path).unwrap()),
        skip(BASELINE_CATALOG_CSV)
    );
}

#[test]
fn validate_passes() {
    let stdout = ok(&["validate"]);
    assert_eq!(stdout.matches("[PASS]").count(), 8, "{stdout}");
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[policy]\ns_cam = 1.5\n").unwrap();
    let out = leonet(&["simulate", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = leonet(&["capacity", "--input", s(&tmp.path().join("missing"))]);
    assert!(!out.status.success());
    let out = leonet(&["network", "--rho", "2", "--out", s(tmp.path())]);
    assert!(!out.status.success());
}
