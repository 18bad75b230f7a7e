use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls-lab"))
        .env("DNLS_LAB_OUT", out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_dir(out: &Path, prefix: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn result(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    v["result"].clone()
}

#[test]
fn endpoint_soliton_has_4pi_mass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(tmp.path(), &["soliton", "--b", "0", "--omega", "1", "--c", "2", "--n", "8192"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(&run_dir(tmp.path(), "soliton-").join("soliton.json"));
    let m = r["mass_with_tail"].as_f64().unwrap();
    assert!((m / (4.0 * std::f64::consts::PI) - 1.0).abs() < 1e-4, "{m}");
    assert_eq!(r["residual_reliable"], false);
}

#[test]
fn kappa0_flag_resolves_speed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(tmp.path(), &["soliton", "--b", "1", "--omega", "1", "--kappa0"]);
    assert!(o.status.success());
    let dir = run_dir(tmp.path(), "soliton-");
    let r = result(&dir.join("soliton.json"));
    let k = r["kappa0"].as_f64().unwrap();
    assert!((k - 0.270136306).abs() < 1e-8, "{k}");
    assert!((r["params"]["c"].as_f64().unwrap() - 2.0 * k).abs() < 1e-15);
    assert!(r["conserved"]["momentum"].as_f64().unwrap().abs() < 1e-8);

    let csv = fs::read_to_string(dir.join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# dnls-lab") && head.contains("config_sha256=") && head.contains("n=2048"));
    assert_eq!(lines.next().unwrap(), "x,Phi,eta,re_phi,im_phi");
    assert_eq!(lines.count(), 2048);
}

#[test]
fn invalid_speed_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(tmp.path(), &["soliton", "--b", "1", "--c", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("admissible range"));
    let o = lab(tmp.path(), &["soliton", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_signature_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(
        tmp.path(),
        &["spectrum", "--b", "1", "--kappa0", "--n", "512", "--half-width", "20", "--check-2-9", "--trials", "4"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(&run_dir(tmp.path(), "spectrum-").join("spectrum.json"));
    assert_eq!(r["signature"]["negative"], 1);
    assert_eq!(r["signature"]["kernel"], 2);
    assert_eq!(r["diagnostic_only"], false);
    assert!(r["quadratic_form"]["max_relative_error"].as_f64().unwrap() < 1e-8);

    // too coarse to resolve kappa0 or the kernel
    let o = lab(tmp.path(), &["spectrum", "--b", "1", "--kappa0", "--n", "128"]);
    assert_eq!(o.status.code(), Some(3));

    let tmp = tempfile::tempdir().unwrap();
    let o = lab(tmp.path(), &["spectrum", "--b", "0", "--c", "2", "--n", "256", "--half-width", "40"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("diagnostic-only"));
    let r = result(&run_dir(tmp.path(), "spectrum-").join("spectrum.json"));
    assert_eq!(r["diagnostic_only"], true);
}

#[test]
fn evolve_soliton_check_writes_drift_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(
        tmp.path(),
        &["evolve", "--b", "1", "--kappa0", "--soliton-check", "--n", "512", "--half-width", "25", "--dt", "0.005"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path(), "evolve-");
    let r = result(&dir.join("evolve.json"));
    assert!(r["drift_per_unit_time"]["mass"].as_f64().unwrap() < 1e-7);
    assert!(r["max_tracking_error"].as_f64().unwrap() < 1e-4);
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "t,energy,mass,momentum,virial,variance,tracking_error");
    // t = 0, every 50 steps of 200, none extra at the end
    assert_eq!(csv.lines().count(), 2 + 5);
}

#[test]
fn instability_report_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let common = ["--b", "1", "--n", "512", "--half-width", "25", "--dt", "0.004", "--record-every", "10"];
    let mut args = vec!["instability", "--delta", "1e-2", "--alpha-frac", "0.1"];
    args.extend(common);
    let o = lab(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(&run_dir(tmp.path(), "instability-").join("report.json"));
    let t = r["exit_time"].as_f64().expect("finite exit time");
    assert!(t > 0.0 && t < 10.0, "{t}");
    assert_eq!(r["monotone"], true);

    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["instability", "--sweep", "1e-2,2e-2"];
    args.extend(common);
    let o = lab(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path(), "instability-");
    let sweep = result(&dir.join("sweep.json"));
    assert_eq!(sweep.as_array().unwrap().len(), 2);
    for k in 0..2 {
        assert!(dir.join(format!("run-{k:03}")).join("lyapunov.csv").exists());
    }
}

#[test]
fn gkdv_identities_and_replay_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(tmp.path(), &["gkdv", "--identities"]);
    assert!(o.status.success());
    let dir = run_dir(tmp.path(), "gkdv-");
    let r = result(&dir.join("identities.json"));
    for key in ["lq3", "llq", "gn_equality_gap"] {
        assert!(r[key].as_f64().unwrap() < 1e-8, "{key}");
    }
    let first = fs::read(dir.join("identities.csv")).unwrap();
    let first_json = fs::read(dir.join("identities.json")).unwrap();
    fs::remove_file(dir.join("identities.csv")).unwrap();

    let o = lab(tmp.path(), &["--sequential", "replay", dir.join("config.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read(dir.join("identities.csv")).unwrap(), first);
    assert_eq!(fs::read(dir.join("identities.json")).unwrap(), first_json);
}
