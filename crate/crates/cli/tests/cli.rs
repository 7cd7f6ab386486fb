use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bilip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilip"))
        .args(args)
        .env("BILIP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn gen_kary(dir: &TempDir, name: &str, k: &str, depth: &str) -> String {
    let out = path(dir, name);
    let res = bilip(&["gen-tree", "--kind", "kary", "--k", k, "--depth", depth, "--out", &out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn gen_tree_writes_ternary_tree() {
    let dir = TempDir::new().unwrap();
    let t = gen_kary(&dir, "t.json", "3", "6");
    assert_eq!(read_json(&t)["vertices"].as_array().unwrap().len(), 1093);
}

#[test]
fn missing_out_is_usage_error() {
    assert_eq!(code(&bilip(&["gen-tree", "--kind", "kary", "--k", "3", "--depth", "2"])), 2);
    assert_eq!(code(&bilip(&["no-such-command"])), 2);
}

#[test]
fn fill_level_sizes() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.json");
    let res = bilip(&["fill", "--space", "cantor13", "--levels", "4", "--scale", "1/3", "--out", &f]);
    assert_eq!(code(&res), 0);
    let v = read_json(&f);
    let mut sizes = [0usize; 4];
    for rec in v["vertices"].as_array().unwrap() {
        sizes[rec["level"].as_u64().unwrap() as usize] += 1;
        assert!(rec["center"]["den"].as_i64().unwrap() > 0);
    }
    assert_eq!(sizes, [1, 2, 4, 8]);
    assert_eq!(code(&bilip(&["fill", "--space", "sphere", "--levels", "2", "--out", &f])), 2);
}

#[test]
fn cheeger_certificate() {
    let dir = TempDir::new().unwrap();
    let t = gen_kary(&dir, "t.json", "2", "4");
    let out = path(&dir, "c.json");
    let res = bilip(&["cheeger", "--graph", &t, "--collar", "1", "--exact-max", "12", "--out", &out]);
    assert_eq!(code(&res), 0);
    let v = read_json(&out);
    let cert = &v["certificate"];
    assert_eq!(cert["method"], "exact");
    assert!(cert["best_ratio"]["num"].as_i64().unwrap() > 0);
    let fail = bilip(&["cheeger", "--graph", &t, "--collar", "1", "--certify", "1/10"]);
    assert_eq!(code(&fail), 1);
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{\"vertices\": 3}").unwrap();
    assert_eq!(code(&bilip(&["cheeger", "--graph", &bad])), 2);
}

#[test]
fn ends_checks() {
    let dir = TempDir::new().unwrap();
    let t = gen_kary(&dir, "t.json", "3", "4");
    let res = bilip(&["ends", "--graph", &t, "--check", "ultrametric,doubling,perfect"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    // a dead end makes the tree incomplete
    let s = path(&dir, "s.json");
    let mut v = read_json(&t);
    let n = v["vertices"].as_array().unwrap().len();
    v["vertices"].as_array_mut().unwrap().push(serde_json::json!({"id": n, "level": 1, "parent": 0}));
    v["edges"].as_array_mut().unwrap().push(serde_json::json!([0, n]));
    std::fs::write(&s, v.to_string()).unwrap();
    let res = bilip(&["ends", "--graph", &s]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("complete core"));
}

#[test]
fn promote_identity() {
    let dir = TempDir::new().unwrap();
    let a = gen_kary(&dir, "a.json", "2", "5");
    let out = path(&dir, "m.json");
    let res = bilip(&["promote", "--from", &a, "--to", &a, "--map", "identity", "--out", &out]);
    assert_eq!(code(&res), 0);
    let v = read_json(&out);
    assert_eq!(v["r"], 0);
    assert_eq!(v["bilipschitz"], serde_json::json!({"num": 1, "den": 1}));
    let b = gen_kary(&dir, "b.json", "2", "4");
    assert_eq!(code(&bilip(&["promote", "--from", &a, "--to", &b, "--map", "identity"])), 2);
}

#[test]
fn promote_ternary_to_quaternary() {
    let dir = TempDir::new().unwrap();
    let t3 = gen_kary(&dir, "t3.json", "3", "7");
    let t4 = gen_kary(&dir, "t4.json", "4", "6");
    let out = path(&dir, "m.json");
    let res = bilip(&["promote", "--from", &t3, "--to", &t4, "--rmax", "10", "--collar", "2", "--out", &out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(read_json(&out)["confinement_width"].as_u64().unwrap() <= 2);
}

#[test]
fn stretched_versus_binary_fails() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "s.json");
    let res = bilip(&["gen-tree", "--kind", "stretched", "--k", "2", "--depth", "12", "--out", &s]);
    assert_eq!(code(&res), 0);
    let b = gen_kary(&dir, "b.json", "2", "12");
    let res = bilip(&["promote", "--from", &s, "--to", &b, "--rmax", "3"]);
    assert_eq!(code(&res), 1);
}

#[test]
fn qi_writes_constants() {
    let dir = TempDir::new().unwrap();
    let a = gen_kary(&dir, "a.json", "2", "4");
    let b = gen_kary(&dir, "b.json", "4", "2");
    let out = path(&dir, "map.json");
    assert_eq!(code(&bilip(&["qi", "--from", &a, "--to", &b, "--mode", "exact", "--out", &out])), 0);
    let v = read_json(&out);
    assert_eq!(v["map"].as_array().unwrap().len(), 31);
    assert!(v["constants"]["exact"].as_bool().unwrap());
    // the map file drives promotion
    assert_eq!(code(&bilip(&["promote", "--from", &a, "--to", &b, "--map", &out, "--collar", "1"])), 0);
}

#[test]
fn export_round_trips() {
    let dir = TempDir::new().unwrap();
    let t = gen_kary(&dir, "t.json", "2", "3");
    let again = path(&dir, "t2.json");
    assert_eq!(code(&bilip(&["export", "--graph", &t, "--format", "json", "--out", &again])), 0);
    assert_eq!(std::fs::read(&t).unwrap(), std::fs::read(&again).unwrap());

    let dot = path(&dir, "t.dot");
    assert_eq!(code(&bilip(&["export", "--graph", &t, "--format", "dot", "--out", &dot])), 0);
    let text = std::fs::read_to_string(&dot).unwrap();
    let ids: std::collections::BTreeSet<&str> = text
        .lines()
        .filter(|l| !l.contains("--") && !l.contains('{') && !l.contains('}'))
        .flat_map(|l| l.split(';'))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    assert_eq!(ids.len(), 15);

    let csv = path(&dir, "t.csv");
    assert_eq!(code(&bilip(&["export", "--graph", &t, "--format", "csv", "--out", &csv])), 0);
    let rows: Vec<String> = std::fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.split(',').count() == 8));

    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(code(&bilip(&["export", "--graph", &bad, "--format", "dot", "--out", &dot])), 2);
}

fn write_config(dir: &Path, out_dir: &Path) -> String {
    let cfg = serde_json::json!({
        "name": "ternary-to-quaternary",
        "seed": 11,
        "output_dir": out_dir,
        "source": {"kind": "kary", "k": 3, "depth": 5},
        "target": {"kind": "kary", "k": 4, "depth": 4},
        "analyze": {"collar": 1, "families": ["balls", "level-bands", "descendant-subtrees"], "ends": true},
        "promote": {"map": "induced", "r_start": 0, "r_max": 8, "collar": 1},
        "verify": {"whyte": true}
    });
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn verify_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (o1, o2) = (dir.path().join("run1"), dir.path().join("run2"));
    let cfg = write_config(dir.path(), &o1);
    assert_eq!(code(&bilip(&["verify", "--config", &cfg])), 0);
    assert_eq!(code(&bilip(&["verify", "--config", &cfg, "--out", &o2.to_string_lossy()])), 0);
    for name in ["source.json", "target.json", "map.json", "matching.json"] {
        assert_eq!(std::fs::read(o1.join(name)).unwrap(), std::fs::read(o2.join(name)).unwrap(), "{name}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(o1.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["config"]["name"], "ternary-to-quaternary");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, std::fs::read_to_string(&cfg).unwrap().replacen("\"seed\"", "\"sed\"", 1)).unwrap();
    assert_eq!(code(&bilip(&["verify", "--config", &bad.to_string_lossy()])), 2);
}
