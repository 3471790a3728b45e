use std::path::PathBuf;
use std::process::{Command, Output};

use erdos_selfridge::candidate::{render_candidate, Candidate};
use erdos_selfridge::combinatorics::tampered_fixture;
use num_bigint::BigInt;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_es-audit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cubic_box_search_csv() {
    let o = run(&["search", "--k", "3", "--l", "3", "--denoms", "10", "--numers", "100", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "k,l,x_num,x_den,y_num,y_den,trivial\n\
         3,3,-2,1,0,1,true\n\
         3,3,-1,1,0,1,true\n\
         3,3,0,1,0,1,true\n\
         3,3,-4,3,2,3,false\n\
         3,3,-2,3,-2,3,false\n"
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 nontrivial"));
}

#[test]
fn search_is_shard_independent() {
    let base = ["search", "--k", "5", "--l", "5", "--denoms", "32", "--numers", "200"];
    let outs: Vec<String> = ["1", "4", "16"]
        .iter()
        .map(|s| {
            let mut args = base.to_vec();
            args.extend(["--shards", s]);
            let o = run(&args);
            assert_eq!(o.status.code(), Some(0));
            assert!(String::from_utf8_lossy(&o.stderr).contains("trivial-only"));
            stdout(&o)
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn family_mode() {
    let o = run(&["search", "--k", "4", "--l", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let xs: Vec<(&str, &str)> =
        doc["points"].as_array().unwrap().iter().map(|p| (p["x"].as_str().unwrap(), p["y"].as_str().unwrap())).collect();
    assert_eq!(xs, [("-3/2", "-3/4"), ("-3/2", "3/4")]);

    let o = run(&["search", "--k", "10", "--l", "2"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["points"].as_array().unwrap().is_empty());
    assert!(doc["diagnostic"].as_str().unwrap().contains("-y^2"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["search", "--k", "3"]).status.code(), Some(64));
    assert_eq!(run(&["lemmas", "--run", "bogus"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn input_errors_exit_65() {
    let o = run(&["audit", &fixture("bad_line.txt")]);
    assert_eq!(o.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
    assert_eq!(run(&["audit", "/nonexistent/candidate.txt"]).status.code(), Some(65));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "precision = \"lots\"\n").unwrap();
    let o = run(&["audit", &fixture("non_power.txt"), "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(65));
}

#[test]
fn contradiction_exit_2_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = run(&["audit", &fixture("non_power.txt"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cert["version"], "1");
    assert_eq!(cert["verdict"]["stage"], "validation");
    assert_eq!(cert["verdict"]["values"]["product"], "24");
    let r = run(&["report", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("verdict: contradiction at validation"));
}

fn audit_bytes(path: &str, shards: &str) -> Vec<u8> {
    let o = run(&["audit", path, "--shards", shards]);
    assert_eq!(o.status.code(), Some(2));
    o.stdout
}

#[test]
fn certificates_are_byte_identical() {
    let speculative = fixture("speculative.txt");
    let first = audit_bytes(&speculative, "1");
    for shards in ["1", "1", "4", "16"] {
        assert_eq!(audit_bytes(&speculative, shards), first);
    }
}

#[test]
fn tampered_fixture_certificate() {
    let k = 10_000u32;
    let c = Candidate { n: None, d: BigInt::from(1), t: None, k, l: 3, terms: Some(tampered_fixture(k as u64)) };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.txt");
    std::fs::write(&path, render_candidate(&c)).unwrap();
    let path = path.to_str().unwrap();
    let a = audit_bytes(path, "1");
    assert_eq!(a, audit_bytes(path, "4"));
    let cert: Value = serde_json::from_slice(&a).unwrap();
    let stage = cert["stages"].as_array().unwrap().iter().find(|s| s["name"] == "mass_increment").unwrap();
    let collision = &stage["details"]["collision"];
    assert_eq!(collision["a0"], "19");
    assert!(!collision["a0_pairs"].as_array().unwrap().is_empty());
    assert!(stage["details"]["mordell_images"].as_array().is_some_and(|m| !m.is_empty()));
}

#[test]
fn lemma_report_is_seed_deterministic() {
    let a = run(&["lemmas", "--run", "gcd_pairs", "--trials", "5", "--seed", "11"]);
    let b = run(&["lemmas", "--run", "gcd_pairs", "--trials", "5", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("0.114499"));
}

#[test]
fn bounds_rows() {
    let o = run(&["bounds", "--l", "3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("faltings,inapplicable"));
    let o = run(&["bounds", "--l", "5", "--H", "17000", "--gamma", "-2", "--rank", "1", "--ball-L", "1"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ball = &doc["rows"][1]["values"];
    let prop: f64 = ball[5][1].as_str().unwrap().parse().unwrap();
    assert!((prop - 16.0 * 45f64.sqrt()).abs() < 1e-9);
}
