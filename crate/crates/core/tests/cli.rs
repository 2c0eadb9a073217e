use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ufl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ufl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn gen_writes_text_header() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ufl(dir.path(), &["gen", "--n", "5", "--d", "3", "--out", "x.txt"]).status.success());
    let text = read(dir.path(), "x.txt");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("5 3"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn binary_points_and_map_magic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(ufl(p, &["gen", "--n", "6", "--d", "4", "--binary", "--out", "x.bin"]).status.success());
    let bytes = fs::read(p.join("x.bin")).unwrap();
    assert_eq!(&bytes[..4], b"UFLP");
    assert_eq!(bytes.len(), 4 + 4 + 4 + 6 * 4 * 8);
    let out = ufl(p, &["reduce", "x.bin", "--m", "3", "--map-out", "m.bin", "--out", "r.txt"]);
    assert!(out.status.success());
    assert!(read(p, "r.txt").starts_with("6 3\n"));
    let map = fs::read(p.join("m.bin")).unwrap();
    assert_eq!(&map[..4], b"RLMG");
    assert_eq!(map.len(), 4 + 4 + 4 + 8);
}

#[test]
fn solution_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("x.txt"), "2 1\n0\n10\n").unwrap();
    let out = ufl(p, &["solve", "x.txt", "--method", "oracle", "--out", "s.csv"]);
    assert!(out.status.success());
    assert_eq!(
        read(p, "s.csv"),
        "facility_index,x0\n0,0\n1,10\n\npoint_id,facility_index,distance\n0,0,0\n1,1,0\n"
    );
}

#[test]
fn ptas_trace_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(ufl(p, &["gen", "--n", "8", "--out", "x.txt"]).status.success());
    let out = ufl(p, &["solve", "x.txt", "--trace", "t.jsonl", "--out", "s.csv"]);
    assert!(out.status.success());
    let trace = read(p, "t.jsonl");
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    for key in ["part", "level", "event_G", "event_H", "k_star", "v", "adopted"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn partition_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(ufl(p, &["gen", "--n", "30", "--out", "x.txt"]).status.success());
    let out = ufl(p, &["partition", "x.txt", "--moves", "m.csv", "--out", "p.csv"]);
    assert!(out.status.success());
    let csv = read(p, "p.csv");
    assert!(csv.starts_with("part_index,point_id,provenance_cluster,level,is_last\n"));
    assert_eq!(csv.lines().count(), 31);
    assert!(read(p, "m.csv").starts_with("level,point_id,from_cluster,to_cluster\n"));
}

#[test]
fn verify_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify", "--trials", "2", "--mc-seeds", "20", "--cut-seeds", "20", "--tail-seeds", "200",
        "--size-seeds", "2", "--out", "r.json",
    ];
    let ok = ufl(dir.path(), &args);
    assert_eq!(ok.status.code(), Some(0));
    let mut corrupt = args.to_vec();
    corrupt.push("--corrupt-hierarchy");
    let bad = ufl(dir.path(), &corrupt);
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "r.json")).unwrap();
    let mono = report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "cut_monotonicity")
        .unwrap();
    assert_eq!(mono["pass"], false);
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = ufl(dir.path(), &["solve", "missing.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ufl(dir.path(), &["gen", "--eps", "2"]);
    assert!(!out.status.success());
    let out = ufl(dir.path(), &["solve", "missing.txt", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}
