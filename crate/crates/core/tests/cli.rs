use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spherepose"));
    c.env_remove("SPHEREPOSE_OUT_DIR").env_remove("SPHEREPOSE_CACHE_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic_and_validates_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.syml"), dir.path().join("b.syml"));
    for p in [&a, &b] {
        let o = run(&["generate", "--shape", "cube", "--n", "100", "--seed", "7", "--out", s(p)]);
        assert!(o.status.success(), "{}", text(&o));
    }
    assert_eq!(sha(&a), sha(&b));
    let data = spherepose::symsol::Dataset::load(&a).unwrap();
    assert_eq!(data.len(), 100);
    assert!(data.config.contains("\"seed\":7"));

    let o = run(&["generate", "--shape", "bogus", "--n", "3", "--out", s(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(1));
    let msg = text(&o);
    for name in ["tet", "cube", "ico", "cone", "cyl", "tetX", "cylO", "sphX"] {
        assert!(msg.contains(name), "{msg}");
    }
    let o = run(&["generate", "--shape", "cube", "--n", "0", "--out", s(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["generate", "--shape", "tetX", "--n", "3", "--split", "test"])
        .env("SPHEREPOSE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.path().join("tetX_test.syml").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["generate", "--n", "3"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn selftest_passes_and_detects_an_injected_fault() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("all 8 checks passed"));

    let o = run(&["selftest", "--inject-fault", "3"]);
    assert_ne!(o.status.code(), Some(0));
    let msg = text(&o);
    assert!(msg.contains("FAIL wigner homomorphism"), "{msg}");
    assert!(msg.contains("failed checks: wigner homomorphism"), "{msg}");
}

#[test]
fn train_eval_viz_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cache = p("cache");
    let gen = |shape: &str, split: &str, n: &str, out: &Path| {
        let o = run(&["generate", "--shape", shape, "--n", n, "--seed", "3", "--split", split, "--out", s(out)]);
        assert!(o.status.success(), "{}", text(&o));
    };
    gen("cylO", "train", "8", &p("train.syml"));
    gen("cylO", "test", "4", &p("test.syml"));

    // the file sets lr and a small network; flags override lr again
    std::fs::write(
        p("cfg.json"),
        r#"{"model": {"lmax": 2, "encoder_channels": [4, 4], "channels": 2,
            "support_recursion": 1, "support_angle_deg": 30.0, "grid_recursion": 0},
            "train": {"lr": 0.5, "batch_size": 4, "epochs": 3}}"#,
    )
    .unwrap();
    let o = bin()
        .args(["--threads", "2", "train", "--data", s(&p("train.syml")), "--config", s(&p("cfg.json"))])
        .args(["--lr", "0.01", "--max-steps", "3", "--out", s(&p("run"))])
        .env("SPHEREPOSE_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("run").join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["train"]["lr"], 0.01);
    assert_eq!(cfg["train"]["batch_size"], 4);
    assert_eq!(cfg["train"]["momentum"], 0.9);
    assert_eq!(cfg["model"]["lmax"], 2);
    assert_eq!(cfg["model"]["image_height"], 32);
    let metrics = std::fs::read_to_string(p("run").join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    let ck = p("run").join("model.i2sc");
    assert!(ck.exists());
    assert!(cache.join("so3_r0.sogr").exists());

    let eval = |out: &Path| {
        let o = run(&["eval", "--checkpoint", s(&ck), "--data", s(&p("test.syml")), "--grid-recursion", "1", "--out", s(out)]);
        assert!(o.status.success(), "{}", text(&o));
    };
    eval(&p("e1.json"));
    eval(&p("e2.json"));
    assert_eq!(sha(&p("e1.json")), sha(&p("e2.json")));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("e1.json")).unwrap()).unwrap();
    assert_eq!(report["grid_recursion"], 1);
    assert_eq!(report["grid_size"], 576);
    assert_eq!(report["aggregate"]["count"], 4);
    assert_eq!(report["shapes"][0]["shape"], "cylO");
    assert!(report["aggregate"]["avg_log_likelihood"].as_f64().unwrap().is_finite());
    assert_eq!(report["config"]["train"]["lr"], 0.01);
    assert!(report["config"]["datasets"][0]["generation"]["seed"] == 3);

    let viz = |out: &Path| {
        let o = run(&["viz", "--checkpoint", s(&ck), "--data", s(&p("test.syml")), "--index", "1", "--out", s(out)]);
        assert!(o.status.success(), "{}", text(&o));
    };
    viz(&p("v1.svg"));
    viz(&p("v2.svg"));
    let svg = std::fs::read_to_string(p("v1.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<metadata>"));
    assert_eq!(sha(&p("v1.svg")), sha(&p("v2.svg")));
    let o = run(&["viz", "--checkpoint", s(&ck), "--data", s(&p("test.syml")), "--index", "4", "--out", s(&p("v3.svg"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("out of range"));

    // evaluation needs a test split
    let o = run(&["eval", "--checkpoint", s(&ck), "--data", s(&p("train.syml")), "--grid-recursion", "0"]);
    assert_eq!(o.status.code(), Some(1));
    // a corrupt checkpoint is a runtime failure
    std::fs::write(p("bad.i2sc"), b"nope").unwrap();
    let o = run(&["eval", "--checkpoint", s(&p("bad.i2sc")), "--data", s(&p("test.syml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_rejects_bad_configuration_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.syml");
    let o = run(&["generate", "--shape", "tet", "--n", "2", "--out", s(&data)]);
    assert!(o.status.success());
    for bad in [
        vec!["--n-so3-convs", "3"],
        vec!["--L", "0"],
        vec!["--lr", "-1"],
        vec!["--projection", "cubic"],
    ] {
        let o = bin()
            .args(["train", "--data", s(&data), "--out", s(&dir.path().join("r"))])
            .args(&bad)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(1), "{bad:?}: {}", text(&o));
    }
    std::fs::write(dir.path().join("c.json"), r#"{"model": {"lmaxx": 3}}"#).unwrap();
    let o = run(&["train", "--data", s(&data), "--config", s(&dir.path().join("c.json"))]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(!dir.path().join("r").join("model.i2sc").exists());
}
