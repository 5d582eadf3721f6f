use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn diffinc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffinc"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap())
        .unwrap()
}

fn out(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn certify_gamma_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = diffinc(&[
        "certify",
        "--k",
        "1",
        "--grid",
        "512",
        "--out",
        out(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "certify");
    let c_hat = r["body"]["certificate"]["scan"]["c_hat"].as_f64().unwrap();
    assert!((c_hat - 0.0625).abs() < 1e-9);
    assert_eq!(
        r["body"]["certificate"]["ellipticity"]["class"],
        "nowhere_elliptic"
    );
    assert!(r["body"]["openness"]["delta"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("certify.txt").exists());
}

#[test]
fn certify_rejects_a_segment_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("segment.json");
    std::fs::write(&curve, r#"{"family":"line","params":{"origin":[0,0,0,0],"direction":[1,0,0,0]},"domain":{"kind":"arc","a":0.0,"b":1.0}}"#)
        .unwrap();
    let o = diffinc(&[
        "certify",
        "--curve",
        curve.to_str().unwrap(),
        "--out",
        out(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    let r = report(dir.path(), "certify");
    assert_eq!(r["status"], "certification_failed");
    assert!(r["body"]["certificate"]["scan"]["witness"].is_array());
}

#[test]
fn certify_flags_degenerate_burgers() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&diffinc(&["certify", "--q", "1", "--out", out(dir.path())])),
        2
    );
    assert_eq!(
        report(dir.path(), "certify")["body"]["certificate"]["degenerate"],
        true
    );
    assert_eq!(
        code(&diffinc(&["certify", "--q", "0", "--out", out(dir.path())])),
        0
    );
}

#[test]
fn verify_vortex_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let o = diffinc(&[
        "verify",
        "--k",
        "2",
        "--grid",
        "64,128,256",
        "--suite",
        "standard",
        "--out",
        out(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path(), "verify");
    let ladder = r["body"]["ladder"].as_array().unwrap();
    assert_eq!(ladder.len(), 3);
    let res: Vec<f64> = ladder
        .iter()
        .map(|x| x["max_normalized"].as_f64().unwrap())
        .collect();
    assert!(
        res[0] > res[1] && res[1] > res[2] && res[2] < 1e-3,
        "{res:?}"
    );
    assert!(ladder.iter().all(|x| x["singular_index"] == 1.0));
    let csv = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn verify_threshold_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = diffinc(&[
        "verify",
        "--k",
        "2",
        "--grid",
        "64",
        "--tol",
        "1e-9",
        "--out",
        out(dir.path()),
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(report(dir.path(), "verify")["status"], "threshold_exceeded");
}

#[test]
fn synth_then_verify_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = out(dir.path());
    assert_eq!(
        code(&diffinc(&[
            "synth", "--k", "2", "--kind", "fan", "--grid", "96", "--out", d
        ])),
        0
    );
    for name in ["field.csv", "field.bin"] {
        let p = dir.path().join(name);
        let o = diffinc(&[
            "verify",
            "--k",
            "2",
            "--field",
            p.to_str().unwrap(),
            "--out",
            d,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    // A dump built from another curve is a configuration error.
    let p = dir.path().join("field.bin");
    assert_eq!(
        code(&diffinc(&[
            "verify",
            "--k",
            "1",
            "--field",
            p.to_str().unwrap(),
            "--out",
            d
        ])),
        4
    );
}

#[test]
fn synth_rejects_a_vortex_for_odd_winding() {
    let dir = tempfile::tempdir().unwrap();
    let o = diffinc(&[
        "synth",
        "--k",
        "3",
        "--kind",
        "vortex",
        "--grid",
        "64",
        "--out",
        out(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn factorize_writes_entropy_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&diffinc(&[
            "factorize",
            "--k",
            "2",
            "--table-n",
            "1024",
            "--out",
            out(dir.path())
        ])),
        0
    );
    let r = report(dir.path(), "factorize");
    assert_eq!(r["body"]["deg_psi"], 1.0);
    let t = std::fs::read_to_string(dir.path().join("entropy_00_gamma_1.csv")).unwrap();
    let mut lines = t.lines();
    assert_eq!(lines.next(), Some("theta,phi1,phi2,alpha1,alpha2"));
    assert!(lines.count() >= 1024);
}

#[test]
fn scan_open_passes_for_gamma_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&diffinc(&[
            "scan-open",
            "--k",
            "1",
            "--samples",
            "25",
            "--seed",
            "9",
            "--out",
            out(dir.path())
        ])),
        0
    );
    let r = report(dir.path(), "scan_open");
    assert_eq!(r["body"]["failures"], 0);
    assert_eq!(r["seed"], 9);
}

#[test]
fn reports_are_deterministic_and_self_describing() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = diffinc(&[
            "verify",
            "--k",
            "2",
            "--grid",
            "64,128",
            "--eps-ladder",
            "0.2,0.14,0.1,0.07,0.05",
            "--seed",
            "5",
            "--out",
            out(d.path()),
        ]);
        assert_eq!(code(&o), 0);
    }
    for f in ["verify.json", "verify.txt", "ladder.csv", "commutator.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let r = report(a.path(), "verify");
    assert_eq!(r["tool"], "diffinc");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(
        r["curve_hash"].as_str().unwrap(),
        diffinc::curvefile::CurveFile::gamma_k(2).hash()
    );
    assert_eq!(r["grid"]["spatial_n"], serde_json::json!([64, 128]));
    assert_eq!(r["tolerances"]["residual"], 1e-2);
    assert_eq!(r["seed"], 5);
    assert_eq!(
        r["body"]["commutator"]["rungs"].as_array().unwrap().len(),
        5
    );
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(code(&diffinc(&["certify"])), 4);
    assert_eq!(code(&diffinc(&["certify", "--k", "1", "--q", "0"])), 4);
    assert_eq!(
        code(&diffinc(&["certify", "--curve", "/nonexistent/curve.json"])),
        4
    );
    assert_eq!(code(&diffinc(&["certify", "--k", "1", "--grid", "8"])), 4);
}
