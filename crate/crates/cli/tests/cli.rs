use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn qkdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdlab"))
        .args(args)
        .env("QKDLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = qkdlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(report: &'a Value, bound: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["bound"] == bound)
        .unwrap_or_else(|| panic!("no check named {bound}"))
}

fn h(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[test]
fn theta_of_ideal_source_is_right_angle() {
    let v = json_ok(&["theta", "--source", &fixture("ideal.json")]);
    assert!((v["delta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    // asin near 1 turns a 1e-16 rounding in Δ into ~1e-8 in θ
    assert!((v["theta"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-7);
    assert!(v["qubitAngles"].is_object());
}

#[test]
fn theta_inapplicable_is_a_value() {
    let v = json_ok(&["theta", "--source", &fixture("low_overlap.json")]);
    assert_eq!(v["theta"], "inapplicable");
    assert!(v["delta"].as_f64().unwrap() <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
}

#[test]
fn malformed_and_missing_files_exit_2() {
    let out = qkdlab(&["theta", "--source", &fixture("malformed.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let out = qkdlab(&["theta", "--source", "/nonexistent/source.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qkdlab(&["theta"]).status.code(), Some(2));
    assert_eq!(
        qkdlab(&["theta", "--source", &fixture("ideal.json"), "--bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(qkdlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn degrees_are_rejected() {
    for t in ["90deg", "90°", "45 degrees"] {
        let out = qkdlab(&["keyrate", "--theta", t]);
        assert_eq!(out.status.code(), Some(2), "accepted {t}");
    }
    let out = qkdlab(&["keyrate", "--variant", "qubit", "--angles", "0.1,0deg,1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn keyrate_ideal_examples() {
    let v = json_ok(&["keyrate", "--theta", "1.5708", "--dz", "0", "--dx", "0"]);
    assert_eq!(v["rate"].as_f64().unwrap(), 1.0);
    let v = json_ok(&[
        "keyrate", "--theta", "1.5708", "--dz", "0.05", "--dx", "0.05",
    ]);
    let sp = 1.0 - 2.0 * h(0.05);
    assert!((v["rate"].as_f64().unwrap() - sp).abs() < 1e-12);
    assert!((v["rate"].as_f64().unwrap() - 0.42721).abs() < 1e-5);
}

#[test]
fn keyrate_qubit_dim2_at_minimum_errors() {
    // sin α = 0.3, β = 0, φ = π/2: the smallest z error rate is (1 − cos α)/2
    let dz = (1.0 - (0.3f64).asin().cos()) / 2.0;
    let dz_s = format!("{dz:.17}");
    let v = json_ok(&[
        "keyrate",
        "--variant",
        "qubit-dim2",
        "--source",
        &fixture("imperfect.json"),
        "--dz",
        &dz_s,
        "--dx",
        "0",
    ]);
    assert!((v["rate"].as_f64().unwrap() - (1.0 - h(dz))).abs() < 1e-9);
}

#[test]
fn keyrate_with_angles_matches_source_file() {
    let a = json_ok(&[
        "keyrate",
        "--variant",
        "qubit",
        "--angles",
        "0.3046926540153975,0,1.5707963267948966",
        "--dz",
        "0.04",
        "--dx",
        "0.03",
    ]);
    let b = json_ok(&[
        "keyrate",
        "--variant",
        "qubit",
        "--source",
        &fixture("imperfect.json"),
        "--dz",
        "0.04",
        "--dx",
        "0.03",
    ]);
    assert!((a["rate"].as_f64().unwrap() - b["rate"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn keyrate_minentropy_endpoints() {
    let v = json_ok(&[
        "keyrate",
        "--variant",
        "minentropy",
        "--trace-distance",
        "0",
    ]);
    assert_eq!(v["rate"].as_f64().unwrap(), 1.0);
    let v = json_ok(&["keyrate", "--variant", "minentropy", "--fidelity", "0"]);
    assert_eq!(v["rate"].as_f64().unwrap(), 0.0);
}

#[test]
fn keyrate_without_characterisation_exits_2() {
    let out = qkdlab(&["keyrate", "--dz", "0.01", "--dx", "0.01"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qkdlab(&["keyrate", "--theta", "1.0", "--angles", "0,0,1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_emits_fixed_header_and_monotone_rates() {
    let out = qkdlab(&[
        "sweep", "--theta", "1.2", "--param", "dx", "--from", "0", "--to", "0.2", "--steps", "20",
        "--dz", "0.01",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["variant", "deltaZ", "deltaX", "fidelityBound", "rate"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 21);
    let rates: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(rows.iter().all(|r| &r[1] == "0.0100000000000"));
}

#[test]
fn attack_eval_tightness_fixture_saturates() {
    let v = json_ok(&[
        "attack-eval",
        "--source",
        &fixture("tightness_source.json"),
        "--attack",
        &fixture("tightness_attack.json"),
    ]);
    let slack = check(&v, "cloning-theta")["slack"].as_f64().unwrap();
    assert!(slack.abs() < 1e-9, "slack {slack}");
}

#[test]
fn attack_eval_random_fixture_respects_bounds() {
    for src in ["ideal.json", "imperfect.json", "tightness_source.json"] {
        let v = json_ok(&[
            "attack-eval",
            "--source",
            &fixture(src),
            "--attack",
            &fixture("random_attack.json"),
        ]);
        for c in v["checks"].as_array().unwrap() {
            if let Some(s) = c["slack"].as_f64() {
                assert!(s >= -1e-9, "{src}: {} slack {s}", c["bound"]);
            }
        }
    }
}

#[test]
fn attack_eval_dimension_mismatch_exits_2() {
    let out = qkdlab(&[
        "attack-eval",
        "--source",
        &fixture("ideal.json"),
        "--attack",
        &fixture("qutrit_identity.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn optimize_is_reproducible_and_saves_attack() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("best.json");
    let args = [
        "optimize",
        "--source",
        &fixture("imperfect.json"),
        "--objective",
        "fidelity",
        "--target",
        "0.6",
        "--dim-e",
        "2",
        "--budget",
        "20000",
        "--seed",
        "5",
    ];
    let a = qkdlab(&args);
    let mut with_save: Vec<&str> = args.to_vec();
    let saved_s = saved.to_string_lossy().into_owned();
    with_save.extend(["--save-attack", &saved_s]);
    let b = qkdlab(&with_save);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stderr.is_empty());
    let finding: Value = serde_json::from_slice(&a.stdout).unwrap();
    let eval = json_ok(&[
        "attack-eval",
        "--source",
        &fixture("imperfect.json"),
        "--attack",
        &saved_s,
    ]);
    assert_eq!(finding["diagnostics"]["fE"], eval["diagnostics"]["fE"]);
}

#[test]
fn break_zvx_dimb3_violates_and_dimb2_does_not() {
    let v = json_ok(&[
        "break-zvx",
        "--phi",
        "0.7853981633974483",
        "--dimB",
        "3",
        "--budget",
        "40000",
    ]);
    assert_eq!(v["violationFound"], true);
    assert!(v["margin"].as_f64().unwrap() > 1e-4);
    let v = json_ok(&[
        "break-zvx",
        "--phi",
        "0.7853981633974483",
        "--dimB",
        "2",
        "--dim-e",
        "4",
        "--samples",
        "2000",
    ]);
    assert_eq!(v["violationFound"], false);
}

#[test]
fn simulate_json_and_csv() {
    let src = fixture("tightness_source.json");
    let att = fixture("tightness_attack.json");
    let a = qkdlab(&[
        "simulate", "--source", &src, "--attack", &att, "--rounds", "20000", "--seed", "9",
    ]);
    let b = qkdlab(&[
        "simulate", "--source", &src, "--attack", &att, "--rounds", "20000", "--seed", "9",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["rounds"], 20000);

    let out = qkdlab(&[
        "simulate",
        "--source",
        &src,
        "--attack",
        &att,
        "--detector",
        "computational",
        "--rounds",
        "1000,5000",
        "--seed",
        "1,2,3",
        "--csv",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["rounds", "seed", "deltaZ", "deltaX", "rate"]
    );
    assert_eq!(rdr.records().count(), 6);

    let out = qkdlab(&[
        "simulate", "--source", &src, "--attack", &att, "--rounds", "10,20",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_qkdlab"))
        .args(["theta", "--source", &fixture("ideal.json")])
        .env("QKDLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
