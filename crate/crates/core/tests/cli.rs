use std::process::Command;

use riesz_torus::experiments::{run, ExperimentKind, ExperimentSpec};
use riesz_torus::torus::Configuration;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riesz-lab"))
}

#[test]
fn energy_of_equally_spaced_points_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.txt");
    Configuration::equally_spaced(8, 0.1).unwrap().save(&path).unwrap();
    let out = lab().args(["energy", "--config"]).arg(&path).args(["--s", "0"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = v["value"].as_f64().unwrap();
    assert!((e + 8f64.ln() / 7.0).abs() < 1e-9, "energy {e}");
}

#[test]
fn minimize_writes_a_loadable_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("min.txt");
    let out = lab().args(["minimize", "--d", "1", "--s", "0", "--n", "6", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let c = Configuration::load(&path).unwrap();
    assert_eq!(c.len(), 6);
    let dinf = lab().args(["dinf", "--config"]).arg(&path).output().unwrap();
    assert!(dinf.status.success());
    let b: serde_json::Value = serde_json::from_slice(&dinf.stdout).unwrap();
    assert!(b["lower"].as_f64().unwrap() <= b["upper"].as_f64().unwrap() + b["disc_error"].as_f64().unwrap());
}

#[test]
fn verify_writes_report_files_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    std::fs::write(&spec, "kind = lemma_min_check\nd = 1\ns = 0\nN_list = 5, 9\nsamples = 4\ncurve = false\n").unwrap();
    let out = lab().args(["verify", "--spec"]).arg(&spec).arg("--out-dir").arg(dir.path()).arg("--svg").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    for ext in ["csv", "json"] {
        assert!(dir.path().join(format!("lemma_min_check_d1_s0.{ext}")).exists(), "missing .{ext}");
    }
    // no curve, so nothing to plot
    assert!(!dir.path().join("lemma_min_check_d1_s0.svg").exists());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("lemma_min_check_d1_s0.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
}

#[test]
fn meanfield_report_includes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::Theorem3Meanfield, 1, 0.0);
    spec.n_list = vec![8, 16, 32];
    spec.svg = true;
    let paths = run(&spec).unwrap().write(dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let svg = std::fs::read_to_string(&paths[2]).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn bad_usage_exits_with_usage_code() {
    let out = lab().args(["verify", "--kind", "no_such_kind", "--d", "1", "--s", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = lab().args(["verify", "--kind", "potential_accuracy", "--set", "missing_equals"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_runs_are_bitwise_reproducible() {
    let mut spec = ExperimentSpec::new(ExperimentKind::Theorem3Meanfield, 1, 0.0);
    spec.n_list = vec![4, 8];
    let a = run(&spec).unwrap();
    let b = run(&spec).unwrap();
    assert_eq!(a.rows.to_csv().unwrap(), b.rows.to_csv().unwrap());
    assert!(a.rows.to_csv().unwrap().starts_with("N,seed,E_N,dinf_lower,dinf_upper,grid_m"));
}
