use std::process::{Command, Output};

fn ewlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn strip_time(mut v: serde_json::Value) -> serde_json::Value {
    v["wall_time_ms"] = 0.into();
    v
}

#[test]
fn catalog_lists_every_label() {
    let out = ewlab(&["catalog", "list", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let labels: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    for l in ["flat", "taubnut", "eguchi-hanson-2", "s2h2-quotient", "berger"] {
        assert!(labels.contains(&l), "{l}");
    }
}

#[test]
fn ew_on_taubnut_passes() {
    let out = ewlab(&[
        "verify", "ew", "--space", "taubnut", "--params", "a=1,b=1,c=1", "--probes", "100", "--tol", "1e-6",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["checks"][0]["name"], "ew_residual");
    assert_eq!(v["checks"][0]["points"], 100);
    assert!(v["checks"][0]["max_abs"].as_f64().unwrap() < 1e-6);
    for key in ["config", "checks", "structure_count", "wall_time_ms"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn toda_of_square_fails_with_two() {
    let out = ewlab(&["verify", "toda", "--u", "x^2", "--probes", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let max = v["checks"][0]["max_abs"].as_f64().unwrap();
    assert!((max - 2.0).abs() < 1e-6, "{max}");
    assert_eq!(v["checks"][0]["pass"], false);
}

#[test]
fn non_harmonic_profile_fails() {
    let out = ewlab(&["verify", "harmonic", "--V", "rho"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ewlab(&["verify", "harmonic", "--V", "log(rho) + 2*eta"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn crosscheck_and_killing_gate() {
    let out = ewlab(&["verify", "crosscheck", "--space", "eguchi-hanson-1", "--probes", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let out = ewlab(&["verify", "killing", "--space", "berger"]);
    assert_eq!(out.status.code(), Some(0));
    let out = ewlab(&["verify", "killing", "--space", "taubnut"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["checks"][0]["status"], "gated");
}

#[test]
fn structure_counts() {
    for (space, params, n) in [("flat", "", 4), ("taubnut", "a=1,b=1,c=1", 2), ("berger", "a=1.5", 0)] {
        let mut args = vec!["structures", "--space", space];
        if !params.is_empty() {
            args.extend(["--params", params]);
        }
        let out = ewlab(&args);
        assert_eq!(out.status.code(), Some(0), "{space}");
        assert_eq!(json(&out)["structure_count"]["confirmed"], n, "{space}");
    }
}

#[test]
fn structures_gate_on_non_einstein_weyl() {
    let out = ewlab(&["structures", "--u", "x^2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["structure_count"].is_null());
}

#[test]
fn obstruct_with_congruence() {
    let out = ewlab(&["obstruct", "--space", "taubnut"]);
    assert_eq!(out.status.code(), Some(0));
    let radial = "x/sqrt(x^2+y^2+z^2), y/sqrt(x^2+y^2+z^2), z/sqrt(x^2+y^2+z^2)";
    let out = ewlab(&["obstruct", "--space", "flat", "--congruence", radial, "--domain", "0.5:1,0.5:1,0.5:1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ewlab(&["obstruct", "--space", "flat", "--congruence", "y,-x,0", "--domain", "0.5:1,0.5:1,-1:1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = ewlab(&["obstruct", "--space", "flat", "--congruence", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = ewlab(&["export", "--space", "ward-logrho", "--grid", "10x10x1", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let ca = std::fs::read(&a).unwrap();
    assert_eq!(ca, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert_eq!(
        text.lines().next().unwrap(),
        "rho,eta,psi,g00,g01,g02,g11,g12,g22,omega0,omega1,omega2,ew_residual"
    );
    assert!(a.with_extension("json").exists());
}

#[test]
fn export_touching_axis_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ewlab(&[
        "export", "--space", "ward-logrho", "--domain", "0:1,-1:1,0:1", "--grid", "3x3x1", "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("margin"));
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["verify", "ew", "--space", "nope"],
        vec!["verify", "ew", "--space", "taubnut", "--params", "zz=1"],
        vec!["verify", "ew", "--space", "eguchi-hanson-2", "--params", "rmin=1.01"],
        vec!["verify", "ew", "--u", "x", "--probes", "0"],
        vec!["verify", "ew", "--u", "x+", "--probes", "3"],
        vec!["verify", "ew"],
    ] {
        assert_eq!(ewlab(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn same_seed_same_report() {
    let args = ["verify", "ew", "--space", "eguchi-hanson-2", "--probes", "30", "--seed", "9"];
    let a = strip_time(json(&ewlab(&args)));
    let b = strip_time(json(&ewlab(&args)));
    assert_eq!(a, b);
    let c = strip_time(json(&ewlab(&["verify", "ew", "--space", "eguchi-hanson-2", "--probes", "30", "--seed", "10"])));
    assert_ne!(a["checks"], c["checks"]);
}
