use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/nine_bus");

/// Copy of the fixture directory, so tests can add or remove files freely.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(FIXTURE).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

/// Writes `base` config with extra lines; later keys must not repeat earlier ones.
fn config(dir: &Path, name: &str, base: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text: String = fs::read_to_string(dir.join(base))
        .unwrap()
        .lines()
        .filter(|l| !edits.iter().any(|(k, _)| l.split('=').next().map(str::trim) == Some(*k)))
        .map(|l| format!("{l}\n"))
        .collect();
    for (k, v) in edits {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridflex"))
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn validate_accepts_fixture() {
    let dir = workspace();
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok: 9 buses, 9 branches, 3 generators, 3 load buses, 72 hours"));
}

#[test]
fn validate_names_missing_file() {
    let dir = workspace();
    fs::remove_file(dir.path().join("capacity.csv")).unwrap();
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("capacity.csv"), "{}", stderr(&o));
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_names_bad_key() {
    let dir = workspace();
    let cfg = config(dir.path(), "bad.conf", "scenario.conf", &[("shed_step_mw", "-5")]);
    let o = run(&cfg, dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("shed_step_mw"), "{}", stderr(&o));
}

#[test]
fn validate_itemizes_case_violations() {
    let dir = workspace();
    let loads = fs::read_to_string(dir.path().join("loads.csv")).unwrap().replace("5,0.45,0.35,0.2", "5,0.6,0.5,0.0");
    fs::write(dir.path().join("loads.csv"), loads).unwrap();
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[weight_sum]"), "{}", stderr(&o));
}

#[test]
fn simulate_without_response_reports_gap_energy() {
    let dir = workspace();
    let out = dir.path().join("out");
    let o = run(&dir.path().join("no_dr.conf"), &out, &["simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ENS: 74350 MWh"), "{}", stdout(&o));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "hour_index,served_mw,forced_shed_mw,interruptible_mw,rationing_mw,incentive_mw,reserve_mw"
    );
    assert_eq!(report.lines().count(), 73);
    assert_eq!(csv_column(&report, "forced_shed_mw").iter().sum::<f64>(), 74350.0);
    let density = fs::read_to_string(out.join("density.csv")).unwrap();
    assert_eq!(density.lines().next().unwrap(), "x_mw,density");
    assert_eq!(density.lines().count(), 513);
}

#[test]
fn simulate_with_ample_capacity_has_no_shedding() {
    let dir = workspace();
    let o = run(&dir.path().join("adequacy.conf"), &dir.path().join("out"), &["simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ENS: 0 MWh"), "{}", stdout(&o));
}

#[test]
fn self_reference_correlates_perfectly() {
    let dir = workspace();
    let out = dir.path().join("first");
    assert_eq!(run(&dir.path().join("scenario.conf"), &out, &["simulate"]).status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let hours = csv_column(&report, "hour_index");
    let il = csv_column(&report, "interruptible_mw");
    let forced = csv_column(&report, "forced_shed_mw");
    let mut reference = String::from("hour_index,total_shed_mw\n");
    for i in 0..hours.len() {
        reference.push_str(&format!("{},{}\n", hours[i], il[i] + forced[i]));
    }
    fs::write(dir.path().join("reference.csv"), reference).unwrap();
    let cfg = config(dir.path(), "ref.conf", "scenario.conf", &[("reference_shed", "reference.csv")]);
    let o = run(&cfg, &dir.path().join("second"), &["simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("pearson r: 1\n"), "{}", stdout(&o));
}

#[test]
fn sweep_writes_curve() {
    let dir = workspace();
    let cfg = config(
        dir.path(),
        "sweep.conf",
        "scenario.conf",
        &[("sweep_mechanism", "interruptible"), ("sweep_scales", "1, 2, 4")],
    );
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(stdout(&o), csv);
    let ens = csv_column(&csv, "ens_mean");
    assert_eq!(ens, vec![40475.0, 16850.0, 0.0]);
}

#[test]
fn frontier_writes_scales() {
    let dir = workspace();
    let cfg = config(dir.path(), "f.conf", "scenario.conf", &[("frontier_rationing", "0, 0.5")]);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["--jobs", "2", "frontier"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("frontier.csv")).unwrap();
    assert!(csv.starts_with("incentive_coverage,rationing_max,min_interruptible_scale\n"));
    let scales = csv_column(&csv, "min_interruptible_scale");
    assert_eq!(scales.len(), 2);
    assert!(scales[1] <= scales[0]);
}

#[test]
fn profile_estimate_recovers_noiseless_maxima() {
    let dir = workspace();
    let mut profiles = String::from("hour_index,r_frac,b_frac,o_frac,total_mw\n");
    for h in 0..24 {
        let t = h as f64 / 24.0;
        let (r, b, o) = (0.3 + 0.5 * t, 0.9 - 0.6 * t * t, 0.5 + 0.3 * (6.0 * t).sin());
        profiles.push_str(&format!("{h},{r},{b},{o},{}\n", 100.0 * r + 50.0 * b + 20.0 * o));
    }
    fs::write(dir.path().join("profiles.csv"), profiles).unwrap();
    let cfg = config(dir.path(), "p.conf", "scenario.conf", &[("profiles", "profiles.csv")]);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["profile-estimate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let caps = fs::read_to_string(out.join("capacities.csv")).unwrap();
    for (col, want) in [("r_max", 100.0), ("b_max", 50.0), ("o_max", 20.0)] {
        assert!((csv_column(&caps, col)[0] - want).abs() < 1e-6, "{caps}");
    }
    let sectors = fs::read_to_string(out.join("sectors.csv")).unwrap();
    assert_eq!(sectors.lines().count(), 25);
    assert!(sectors.starts_with("hour_index,res_mw,bus_mw,oth_mw\n"));
}

#[test]
fn profile_estimate_requires_profiles() {
    let dir = workspace();
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["profile-estimate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("profiles"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = workspace();
    let cfg = dir.path().join("incentive.conf");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&cfg, out, &["--seed", "42", "simulate"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["report.csv", "density.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    assert_eq!(run(&cfg, &c, &["--seed", "7", "simulate"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("report.csv")).unwrap(), fs::read(c.join("report.csv")).unwrap());
}

#[test]
fn non_convergence_exits_two() {
    let dir = workspace();
    let cfg = config(dir.path(), "cap.conf", "no_dr.conf", &[("max_iterations_per_hour", "1")]);
    let o = run(&cfg, &dir.path().join("out"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let bin = env!("CARGO_BIN_EXE_gridflex");
    assert_eq!(Command::new(bin).arg("bogus").output().unwrap().status.code(), Some(1));
    assert_eq!(Command::new(bin).arg("simulate").output().unwrap().status.code(), Some(1));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
    let dir = workspace();
    let o = run(&dir.path().join("scenario.conf"), dir.path(), &["--jobs", "0", "simulate"]);
    assert_eq!(o.status.code(), Some(1));
}
