use std::process::{Command, Output};

use serde_json::Value;

fn freelie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freelie")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let out = freelie(args);
    let v = serde_json::from_slice(&out.stdout).expect("stdout is json");
    (out.status.code().unwrap(), v)
}

#[test]
fn kernel_suite_passes() {
    let out = freelie(&["verify", "--suite", "lemma-3.6", "--n", "4", "--k", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("holds") && !text.contains("FAILS"));
}

#[test]
fn density_fills_the_kernel() {
    let (code, v) = json(&["density", "--n", "4", "--k", "4", "--mode", "both", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["closure_dim"], v["result"]["ambient_dim"]);
    assert_eq!(v["result"]["ambient_dim"], 60);
    assert_eq!(v["result"]["agreed"], true);
}

#[test]
fn omega_three_trace_certificate() {
    let (code, v) = json(&["nontame", "--family", "omega", "--kappa", "3", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["command"], "nontame");
    assert_eq!(v["result"]["status"], "certified");
    assert_eq!(v["result"]["kind"], "trace-failure");
    assert_eq!(v["result"]["subject"]["algebra"], "Rn");
    assert_eq!(v["result"]["reduced_mod"], "z^4");
}

#[test]
fn nontame_outcomes() {
    let (code, v) = json(&["nontame", "--family", "phi", "--kappa", "1", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["status"], "external");
    assert_eq!(v["result"]["reason"], "external: relies on [10, Lemma 2.1]");
    let (code, v) = json(&["nontame", "--family", "phi", "--kappa", "4", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["kind"], "determinant-failure");
    let (code, v) = json(&["nontame", "--family", "omega", "--kappa", "4", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["status"], "not-certified");
    assert_eq!(freelie(&["nontame", "--family", "phi", "--algebra", "Rn", "--kappa", "2"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(freelie(&["dims", "--bogus"]).status.code(), Some(2));
    assert_eq!(freelie(&["verify", "--suite", "lemma-9.9"]).status.code(), Some(2));
    assert_eq!(freelie(&["eval", "--expr", "(b y1"]).status.code(), Some(2));
    let capped = freelie(&["dims", "--n", "7"]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(String::from_utf8(capped.stderr).unwrap().contains("--allow-large"));
}

#[test]
fn failed_identity_exits_one() {
    let out = freelie(&["verify", "--expr", "tau i=1 j=2 = tau i=1 j=3", "--maxdeg", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(freelie(&["verify", "--expr", "sigma i=1 j=2 sigma i=1 j=2 = id", "--maxdeg", "4"]).status.code(), Some(0));
}

#[test]
fn reproducible_json_is_byte_identical() {
    for args in [&["density", "--json", "--reproducible"][..], &["dims", "--json", "--reproducible", "--algebra", "Cn"][..]] {
        let (a, b) = (freelie(args), freelie(args));
        assert_eq!(a.stdout, b.stdout);
        let v: Value = serde_json::from_slice(&a.stdout).unwrap();
        assert!(v.get("timestamp").is_none());
    }
    let (_, v) = json(&["density", "--json"]);
    assert!(v["timestamp"].is_u64());
}

#[test]
fn eval_and_dims() {
    let (code, v) = json(&["eval", "--expr", "(b y1 (b y2 y3))", "--algebra", "free", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["normal_form"], "[y1,[y2,y3]]");
    let (_, v) = json(&["dims", "--n", "4", "--maxdeg", "5", "--algebra", "metabelian", "--json"]);
    // Metabelian degree d >= 2 has dimension (d-1) * C(n+d-2, d).
    let quot: Vec<u64> = v["result"]["degrees"].as_array().unwrap().iter().map(|r| r["quotient_dim"].as_u64().unwrap()).collect();
    assert_eq!(quot, vec![4, 6, 20, 45, 84]);
}

#[test]
fn decompositions() {
    let (code, v) = json(&["decomp", "--suite", "lemma-3.3", "--n", "5", "--k", "5", "--json"]);
    assert_eq!(code, 0);
    let variants = v["result"]["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    assert_eq!(variants[0]["report"]["holds"], false);
    assert_eq!(variants[1]["report"]["holds"], true);
    assert_eq!(variants[1]["lr_match"], true);
    assert_eq!(freelie(&["decomp", "--suite", "eq-3.1", "--n", "4", "--k", "6"]).status.code(), Some(0));
    let (_, v) = json(&["decomp", "--lambda", "1", "--mu", "1", "--n", "3", "--json"]);
    assert_eq!(v["result"]["expr"], "[1^2] + [2]");
    assert_eq!(v["result"]["dim"], "9");
}

#[test]
fn selftest_flag_runs_suites() {
    let (code, v) = json(&["nontame", "--selftest", "--cases", "10", "--json"]);
    assert_eq!(code, 0);
    let props = v["result"]["properties"].as_array().unwrap();
    assert!(props.iter().any(|p| p["suite"] == "obstruct"));
    assert!(props.iter().any(|p| p["suite"] == "assoc"));
}
