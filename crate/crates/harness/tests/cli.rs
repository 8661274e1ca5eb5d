use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bklab")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn list_presets_names_every_builtin() {
    let o = bklab(&["list-presets"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in ["mistake-forcing", "pac-sample", "threshold-negative", "threshold-large", "reduction-n2", "reduction-n3"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn unknown_preset_exits_2() {
    assert_eq!(code(&bklab(&["run-preset", "nope"])), 2);
}

#[test]
fn kernel_eval() {
    let o = bklab(&["kernel-eval", "--kind", "monotone", "--x", "1101", "--y", "0111"]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "4"));
    let o = bklab(&["kernel-eval", "--kind", "all", "--x", "10", "--y", "10"]);
    assert_eq!(stdout(&o).trim(), "4");
    assert_eq!(code(&bklab(&["kernel-eval", "--kind", "monotone", "--x", "1", "--y", "10"])), 2);
}

#[test]
fn perceptron_plot_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", r#"[{"x":"11","label":1},{"x":"00","label":-1},{"x":"11","label":1}]"#);
    let o = bklab(&["perceptron-run", "--kind", "monotone", "--stream", &s, "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,mistake,cumulative_mistakes");
    assert_eq!(lines.len(), 4);
}

#[test]
fn kwp_decide_rejects_inconsistent_stream_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", r#"[{"x":"10","label":1},{"x":"11","label":-1}]"#);
    let base = ["kwp-decide", "--stream", &s, "--z", "11", "--alpha", "2", "--theta", "4"];
    assert_eq!(code(&bklab(&base)), 2);
    let mut forced = base.to_vec();
    forced.push("--force");
    let o = bklab(&forced);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["monotone_consistent"], false);
}

#[test]
fn oversized_query_hits_the_guard() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", "[]");
    let z = "1".repeat(30);
    let args = ["kwp-decide", "--stream", &s, "--z", &z, "--alpha", "2", "--theta", "4"];
    assert_eq!(code(&bklab(&args)), 3);
}

#[test]
fn impossible_hard_set_exits_6() {
    let o = bklab(&["gen-hard-set", "--n", "4", "--w", "3", "--c", "0", "--t", "5", "--max-attempts", "50"]);
    assert_eq!(code(&o), 6);
}

#[test]
fn count_sat_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"vars":3,"clauses":[[1,2],[2,3]]}"#);
    let o = bklab(&["count-sat", "--cnf", &f]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "5"));
}

#[test]
fn build_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json").display().to_string();
    let o = bklab(&["build-reduction", "--n", "2", "--clauses", "1,2", "--K", "1", "--theta-exp", "425", "--out", &inst]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = bklab(&["verify-reduction", "--instance", &inst]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["trace"]["decision"], true);

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&inst).unwrap()).unwrap();
    doc["examples"].as_array_mut().unwrap().pop();
    let bad = write(dir.path(), "bad.json", &doc.to_string());
    assert_eq!(code(&bklab(&["verify-reduction", "--instance", &bad])), 4);
}

#[test]
fn small_theta_is_a_parameter_violation() {
    let o = bklab(&["build-reduction", "--n", "2", "--clauses", "1,2", "--K", "1", "--theta-exp", "12"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn run_preset_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = bklab(&["--out-dir", &out, "run-preset", "mistake-forcing", "threshold-negative", "--jobs", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("mistake-forcing,mistake-forcing,1,27,27,ok"));
    for f in ["trace.json", "report.json", "summary.csv", "plot.csv"] {
        assert!(dir.path().join("threshold-negative").join(f).exists());
    }
}
