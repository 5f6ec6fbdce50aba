use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use threshold_kmedians::harness::experiments::{generate_request_stream, run_dynamic_experiment, ExperimentConfig, ExperimentKind};
use threshold_kmedians::{CenterSet, Instance, Point, RngHandle};

fn tkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkm")).args(args).output().expect("spawn tkm")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_instance(path: &Path, centers: &[Vec<f64>], points: &[Vec<f64>]) {
    let inst = Instance::new(
        points.iter().map(|r| Point::new(r.clone()).unwrap()).collect(),
        CenterSet::from_coords(centers).unwrap(),
        1.0,
    )
    .unwrap();
    fs::write(path, inst.to_json()).unwrap();
}

#[test]
fn build_single_center_is_a_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("inst.json");
    let out = dir.path().join("tree.json");
    write_instance(&input, &[vec![0.5, 0.5]], &[vec![0.5, 0.5]]);
    let o = tkm(&["build", "--input", s(&input), "--seed", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().trim(), r#"{"leaf":0}"#);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("ratio = 1"), "{stdout}");
}

#[test]
fn build_malformed_json_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    let out = dir.path().join("tree.json");
    fs::write(&input, "{ not json").unwrap();
    let o = tkm(&["build", "--input", s(&input), "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn build_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("inst.json");
    let mut rng = RngHandle::new(3);
    let centers: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.uniform(), rng.uniform(), rng.uniform()]).collect();
    write_instance(&input, &centers, &centers);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        assert!(tkm(&["build", "--input", s(&input), "--p", "2", "--seed", "9", "--out", s(out)]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tkm(&["build"]).status.code(), Some(2));
    assert_eq!(tkm(&["frobnicate"]).status.code(), Some(2));
    let help = tkm(&["bench", "--help"]);
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("--config") && text.contains("--threads") && text.contains("--out"));
}

#[test]
fn dynamic_empty_stream() {
    let dir = tempfile::tempdir().unwrap();
    let reqs = dir.path().join("r.jsonl");
    let ledger = dir.path().join("l.csv");
    let fin = dir.path().join("t.json");
    fs::write(&reqs, "").unwrap();
    let o = tkm(&["dynamic", "--requests", s(&reqs), "--seed", "1", "--ledger", s(&ledger), "--final-tree", s(&fin)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(&ledger).unwrap(),
        "request_index,op,recourse,touched_nodes,rebuild_fired,wall_nanos\n"
    );
    assert_eq!(fs::read_to_string(&fin).unwrap().trim(), "null");
}

#[test]
fn dynamic_insert_then_delete_empties_tree() {
    let dir = tempfile::tempdir().unwrap();
    let reqs = dir.path().join("r.jsonl");
    let ledger = dir.path().join("l.csv");
    let fin = dir.path().join("t.json");
    fs::write(&reqs, "{\"op\":\"insert\",\"coords\":[0.1,0.2]}\n{\"op\":\"delete\",\"id\":0}\n").unwrap();
    let o = tkm(&["dynamic", "--requests", s(&reqs), "--seed", "1", "--ledger", s(&ledger), "--final-tree", s(&fin)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&fin).unwrap().trim(), "null");
    assert_eq!(fs::read_to_string(&ledger).unwrap().lines().count(), 3);
}

#[test]
fn dynamic_invalid_delete_names_request() {
    let dir = tempfile::tempdir().unwrap();
    let reqs = dir.path().join("r.jsonl");
    let ledger = dir.path().join("l.csv");
    fs::write(
        &reqs,
        "{\"op\":\"insert\",\"coords\":[0.1]}\n{\"op\":\"insert\",\"coords\":[0.3]}\n{\"op\":\"delete\",\"id\":7}\n",
    )
    .unwrap();
    let o = tkm(&["dynamic", "--requests", s(&reqs), "--seed", "1", "--ledger", s(&ledger)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("request 2"), "{err}");
    assert!(!ledger.exists());
}

#[test]
fn dynamic_malformed_line_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let reqs = dir.path().join("r.jsonl");
    let ledger = dir.path().join("l.csv");
    fs::write(&reqs, "{\"op\":\"insert\",\"coords\":[0.1]}\n{\"op\":\"jump\"}\n").unwrap();
    let o = tkm(&["dynamic", "--requests", s(&reqs), "--seed", "1", "--ledger", s(&ledger)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn dynamic_ledger_matches_experiment() {
    let (k, d, seed, requests) = (16, 2, 21u64, 300);
    let mut cfg = ExperimentConfig::new(ExperimentKind::Dynamic, k, seed);
    cfg.d = d;
    cfg.requests = requests;
    cfg.checkpoint_every = 0;
    let report = run_dynamic_experiment(&cfg).unwrap();
    let expected: usize = report.trials[0].ledger.iter().map(|r| r.recourse).sum();

    let stream = generate_request_stream(k, d, requests, &mut RngHandle::new(seed).split(threshold_kmedians::harness::experiments::STREAM_KEY));
    let dir = tempfile::tempdir().unwrap();
    let reqs = dir.path().join("r.jsonl");
    let ledger = dir.path().join("l.csv");
    let body: String = stream.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(&reqs, body).unwrap();
    let o = tkm(&["dynamic", "--requests", s(&reqs), "--seed", &seed.to_string(), "--ledger", s(&ledger)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(&ledger).unwrap();
    let total: usize = rdr.records().map(|r| r.unwrap()[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, expected);
}

#[test]
fn bench_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("o.csv");

    fs::write(&cfg, r#"{"experiment":"competitive","k":4,"d":3,"seed":5,"trials":1}"#).unwrap();
    let o = tkm(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);

    fs::write(&cfg, r#"{"experiment":"coupling","k":2,"seed":5,"trials":100}"#).unwrap();
    let o = tkm(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("chi-square trivially satisfied"));

    fs::write(&cfg, r#"{"experiment":"lower_bound","k":8,"p":1,"seed":5,"trials":10}"#).unwrap();
    let o = tkm(&["bench", "--config", s(&cfg), "--out", s(&out), "--threads", "2"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("d = 134") && text.contains("separation check passed on"), "{text}");

    fs::write(&cfg, r#"{"experiment":"coupling","k":9,"d":7,"seed":5,"trials":0}"#).unwrap();
    let o = tkm(&["bench", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("trials") && err.contains("k <= 6") && err.contains("d <= 3"), "{err}");
}
