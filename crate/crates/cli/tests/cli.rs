use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_socpos"));
    c.env_remove("SOCPOS_SEED");
    c
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn socpos")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn set(k: &[&str]) -> BTreeSet<String> {
    k.iter().map(|s| s.to_string()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CERTIFY_KEYS: &[&str] = &[
    "schema",
    "command",
    "model",
    "verdict",
    "reason",
    "detail",
    "certificate",
    "counterexample",
    "timing_ms",
];

#[test]
fn certify_two_state_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let out = run(&["certify", s(&model("two_state.json")), "--json-out", s(&json)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("certified"));
    let r = read_json(&json);
    assert_eq!(keys(&r), set(CERTIFY_KEYS));
    assert_eq!(r["schema"], 1);
    assert_eq!(r["verdict"], "certified");
    let cert = &r["certificate"];
    assert_eq!(keys(cert), set(&["p0", "P1", "P", "u", "rate", "slack", "residuals"]));
    for (_, v) in cert["residuals"].as_object().unwrap() {
        assert!(v.as_f64().unwrap().is_finite());
    }
}

#[test]
fn certify_oscillatory_is_refuted_near_half_pi() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let out = run(&["certify", s(&model("oscillatory.json")), "--json-out", s(&json)]);
    assert_eq!(code(&out), 3);
    let r = read_json(&json);
    assert_eq!(r["verdict"], "refuted");
    assert!(r["certificate"].is_null());
    let cx = &r["counterexample"];
    assert_eq!(keys(cx), set(&["time", "output", "input", "value", "relative"]));
    let t = cx["time"].as_f64().unwrap();
    let v = cx["value"].as_f64().unwrap();
    assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-3, "t = {t}");
    assert!((v + (-std::f64::consts::FRAC_PI_2).exp()).abs() < 1e-4, "h = {v}");
}

#[test]
fn certify_chain_without_certificate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let out = run(&["certify", s(&model("chain4.json")), "--json-out", s(&json)]);
    assert_eq!(code(&out), 2);
    let r = read_json(&json);
    assert_eq!(r["verdict"], "not_certified");
    assert!(r["reason"].is_string());
    assert!(r["counterexample"].is_null());
}

#[test]
fn certify_writes_impulse_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let out = run(&["certify", s(&model("scalar.json")), "--csv-impulse", s(&csv)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,h_11"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0]);
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn malformed_and_missing_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"domain\": \"continuous\", \"A\": [[1,]]}").unwrap();
    let out = run(&["certify", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let ragged = dir.path().join("ragged.json");
    std::fs::write(
        &ragged,
        r#"{"domain":"continuous","A":[[-1,0],[0]],"B":[[1],[1]],"C":[[1,1]],"D":[[0]]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["certify", s(&ragged)])), 1);

    assert_eq!(code(&run(&["certify", s(&dir.path().join("absent.json"))])), 1);
    assert_eq!(code(&run(&["certify"])), 1);
    assert_eq!(code(&run(&["bogus"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn approx_repairs_perturbed_output() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(
        &m,
        r#"{"domain":"continuous","A":[[-2,1],[1,-2]],"B":[[1],[0]],"C":[[-0.1,1]],"D":[[0]]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["certify", s(&m)])), 3);
    for mode in ["output", "input", "alternating"] {
        let json = dir.path().join(format!("{mode}.json"));
        let out = run(&["approx", s(&m), "--mode", mode, "--json-out", s(&json)]);
        assert_eq!(code(&out), 0, "{mode}");
        let r = read_json(&json);
        assert_eq!(
            keys(&r),
            set(&[
                "schema",
                "command",
                "model",
                "mode",
                "verdict",
                "reason",
                "system",
                "distances",
                "iterations",
                "objective_trace",
                "certificate",
                "timing_ms"
            ])
        );
        assert_eq!(r["mode"], mode);
        // the output-only witness C = (0, 1) sits at distance 0.1
        let total = r["distances"]["total"].as_f64().unwrap();
        assert!(total <= 0.1 + 1e-6, "{mode}: {total}");

        // the repaired model certifies on its own
        let fixed = dir.path().join(format!("{mode}_model.json"));
        std::fs::write(&fixed, serde_json::to_string(&r["system"]).unwrap()).unwrap();
        assert_eq!(code(&run(&["certify", s(&fixed)])), 0, "{mode}");
    }
}

#[test]
fn approx_outside_preconditions_exits_two() {
    let out = run(&["approx", s(&model("oscillatory.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_double_integrator() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    let out = run(&["synth", s(&model("double_integrator.json")), "--json-out", s(&json)]);
    assert_eq!(code(&out), 0);
    let r = read_json(&json);
    assert_eq!(
        keys(&r),
        set(&[
            "schema",
            "command",
            "model",
            "seed",
            "verdict",
            "reason",
            "gain",
            "closed_loop",
            "rounds",
            "spectral_abscissa",
            "certificate",
            "timing_ms"
        ])
    );
    let gain = r["gain"].as_array().unwrap();
    assert_eq!(gain.len(), 1);
    assert_eq!(gain[0].as_array().unwrap().len(), 2);
    assert!(r["spectral_abscissa"].as_f64().unwrap() < 0.0);

    let cl = dir.path().join("cl.json");
    std::fs::write(&cl, serde_json::to_string(&r["closed_loop"]).unwrap()).unwrap();
    assert_eq!(code(&run(&["certify", s(&cl)])), 0);
}

#[test]
fn synth_seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    let out = bin()
        .args(["synth", s(&model("double_integrator.json")), "--json-out", s(&json)])
        .env("SOCPOS_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&json)["seed"], 42);
}

#[test]
fn synth_blocked_plant_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    // negative high-frequency gain: no feedback makes the impulse response nonnegative
    std::fs::write(
        &m,
        r#"{"domain":"continuous","A":[[0,1],[0,0]],"B":[[0],[1]],"C":[[-1,0]],"D":[[0]]}"#,
    )
    .unwrap();
    let json = dir.path().join("s.json");
    let out = run(&["synth", s(&m), "--json-out", s(&json)]);
    assert_eq!(code(&out), 2);
    let r = read_json(&json);
    assert_eq!(r["verdict"], "not_certified");
    assert!(r["violation_trace"].is_array());
}

#[test]
fn reduce_weighted_chain() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let out = run(&["reduce", s(&model("chain4_weighted.json")), "--order", "2", "--json-out", s(&json)]);
    assert_eq!(code(&out), 0);
    let r = read_json(&json);
    assert_eq!(
        keys(&r),
        set(&[
            "schema",
            "command",
            "model",
            "order",
            "verdict",
            "reason",
            "system",
            "kept_indices",
            "hankel_values",
            "error_estimate",
            "certificate",
            "timing_ms"
        ])
    );
    assert_eq!(r["system"]["A"].as_array().unwrap().len(), 2);
    let reduced = dir.path().join("red.json");
    std::fs::write(&reduced, serde_json::to_string(&r["system"]).unwrap()).unwrap();
    assert_eq!(code(&run(&["certify", s(&reduced)])), 0);
}

#[test]
fn reduce_requires_a_certificate_and_valid_order() {
    assert_eq!(code(&run(&["reduce", s(&model("chain4.json")), "--order", "2"])), 2);
    assert_eq!(code(&run(&["reduce", s(&model("oscillatory.json")), "--order", "1"])), 3);
    assert_eq!(code(&run(&["reduce", s(&model("chain4_weighted.json")), "--order", "0"])), 1);
    assert_eq!(code(&run(&["reduce", s(&model("chain4_weighted.json")), "--order", "5"])), 1);
}

#[test]
fn simulate_impulse_and_step() {
    let out = run(&["simulate", s(&model("scalar.json")), "--horizon", "2", "--points", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(text.lines().next(), Some("t,h_11"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r[1] - (-r[0]).exp()).abs() < 1e-10);
    }

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = run(&[
        "simulate",
        s(&model("scalar.json")),
        "--step",
        "--horizon",
        "2",
        "--points",
        "3",
        "--csv-out",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,s_11"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[1] - (1.0 - (-2.0_f64).exp())).abs() < 1e-10);

    assert_eq!(code(&run(&["simulate", s(&model("scalar.json")), "--step", "--impulse"])), 1);
}

fn dir_bytes(d: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn corpus_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["corpus", "--count", "10", "--seed", "7", "--out-dir", s(d.path())]);
        assert_eq!(code(&out), 0);
    }
    let fa = dir_bytes(a.path());
    assert_eq!(fa.len(), 11);
    assert_eq!(fa, dir_bytes(b.path()));

    let index = read_json(&a.path().join("index.json"));
    let entries = index["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 10);
    let mut classes = BTreeSet::new();
    for e in entries {
        assert_eq!(keys(e), set(&["name", "file", "class", "seed", "order", "domain"]));
        let order = e["order"].as_u64().unwrap();
        assert!((2..=8).contains(&order));
        classes.insert(e["class"].as_str().unwrap().to_string());
        // every model file parses back through the certify front end
        let m = a.path().join(e["file"].as_str().unwrap());
        assert!([0, 2, 3].contains(&code(&run(&["certify", s(&m)]))));
    }
    assert_eq!(classes.len(), 4);

    let c = tempfile::tempdir().unwrap();
    run(&["corpus", "--count", "10", "--seed", "8", "--out-dir", s(c.path())]);
    assert_ne!(fa, dir_bytes(c.path()));
}

#[test]
fn corpus_rejects_bad_range() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["corpus", "--order-range", "5", "--out-dir", s(d.path())])), 1);
    assert_eq!(code(&run(&["corpus", "--classes", "nope", "--out-dir", s(d.path())])), 1);
}
