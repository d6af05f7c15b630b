use std::path::Path;
use std::process::Command as Proc;

use bats_cli::config::{ExperimentConfig, Problem};
use bats_cli::formats::*;
use bats_cli::{run, Command};
use bats_core::degree::DegreeDistribution;
use bats_core::net::NetworkTopology;
use bats_core::rank::RankDistribution;
use serde_json::Value;

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn small_endtoend() -> ExperimentConfig {
    ExperimentConfig { m: 8, t: 4, k_prime: 96, batches: 60, trials: 3, hops: vec![0.1], max_degree: Some(100), seed: 11, ..Default::default() }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn rank_file_round_trip() {
    let h = RankDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let f = RankDistFile::from_dist(&h);
    let text = String::from_utf8(to_json_bytes(&f)).unwrap();
    assert!(text.contains("\"M\": 3"));
    let back: RankDistFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_dist().unwrap().as_slice(), h.as_slice());
    let short = RankDistFile { m: 4, h: vec![0.5, 0.5] };
    assert!(short.to_dist().is_err());
}

#[test]
fn degree_file_round_trip() {
    let psi = DegreeDistribution::new(vec![0.0, 0.5, 0.25, 0.25]).unwrap();
    let f = DegreeDistFile::from_dist(&psi);
    let back: DegreeDistFile = serde_json::from_slice(&to_json_bytes(&f)).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.to_dist().unwrap().as_slice(), psi.as_slice());
}

#[test]
fn topology_file_round_trip() {
    let t = NetworkTopology::butterfly(0.1).unwrap();
    let f = TopologyFile::from_topology(&t);
    let back: TopologyFile = serde_json::from_slice(&to_json_bytes(&f)).unwrap();
    let t2 = back.to_topology().unwrap();
    assert_eq!(t2.nodes.len(), t.nodes.len());
    assert_eq!(t2.links.len(), t.links.len());
    assert_eq!(TopologyFile::from_topology(&t2), f);

    let mut dup = f.clone();
    dup.nodes.push(dup.nodes[0].clone());
    assert!(dup.to_topology().is_err());
    let mut dangling = f;
    dangling.links[0].to = "nowhere".into();
    assert!(dangling.to_topology().is_err());
}

#[test]
fn trace_csv_round_trip_keeps_comments() {
    let meta = CsvMeta { config_hash: "abc".into(), seed: 9 };
    let rows = vec![
        TraceRow { batch_id: 0, destination: "d".into(), columns: 4, rank: 3 },
        TraceRow { batch_id: 1, destination: "d/1".into(), columns: 0, rank: 0 },
    ];
    let bytes = trace_csv(&meta, &rows).unwrap();
    assert!(bytes.starts_with(b"# config=abc seed=9\nbatch_id,destination,columns,rank\n"));
    assert_eq!(read_trace_csv(&bytes).unwrap(), rows);
    let (comments, _, _) = parse_csv(&bytes).unwrap();
    assert_eq!(comments, ["config=abc seed=9"]);
}

#[test]
fn evolution_csv_round_trip() {
    let mut cfg = ExperimentConfig { grid_points: 50, ..Default::default() };
    cfg.theta = Some(0.5);
    let out = run(Command::Evolve, &cfg).unwrap();
    let (comments, _, _) = parse_csv(&out.primary).unwrap();
    assert!(comments[0].starts_with("config="));
    assert_eq!(comments[1], "theta=0.5");
    let (xs, ys) = read_evolution_csv(&out.primary).unwrap();
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 50);
}

#[test]
fn same_seed_same_bytes() {
    let sim = ExperimentConfig { batches: 50, seed: 3, ..Default::default() };
    let a = run(Command::Simulate, &sim).unwrap();
    let b = run(Command::Simulate, &sim).unwrap();
    assert_eq!(a.primary, b.primary);
    assert_eq!(a.extra, b.extra);
    let other = run(Command::Simulate, &ExperimentConfig { seed: 4, ..sim }).unwrap();
    assert_ne!(a.primary, other.primary);

    let e2e = small_endtoend();
    assert_eq!(run(Command::EndToEnd, &e2e).unwrap().primary, run(Command::EndToEnd, &e2e).unwrap().primary);
}

#[test]
fn analyze_expected_ranks() {
    let out = run(Command::Analyze, &ExperimentConfig::default()).unwrap();
    let doc = json(&out.primary);
    let s = doc["distributions"][0]["sum_r_hbar"].as_f64().unwrap();
    assert!((s - 12.57).abs() <= 0.02, "{s}");
    assert_eq!(doc["schema"], 1);

    let clean = ExperimentConfig { hops: vec![0.0], ..Default::default() };
    let doc = json(&run(Command::Analyze, &clean).unwrap().primary);
    let e = doc["distributions"][0]["sum_r_h"].as_f64().unwrap();
    assert!((e - 16.0).abs() < 1e-9, "{e}");
}

#[test]
fn vector_overhead_peak_in_middle() {
    let mut cfg = ExperimentConfig { t: 1024, ..Default::default() };
    cfg.rank_sweep.m_values = vec![4, 8, 16, 24, 32, 48, 64, 96, 128, 256];
    cfg.rank_sweep.hop_counts = vec![4];
    let out = run(Command::Analyze, &cfg).unwrap();
    let (comments, header, rows) = parse_csv(&out.extra[0].1).unwrap();
    assert_eq!(out.extra[0].0, "sweep.csv");
    assert!(comments.contains(&"T=1024".to_string()));
    let col = header.iter().position(|h| h == "with_vector_overhead").unwrap();
    let best = rows.iter().max_by(|a, b| a[col].parse::<f64>().unwrap().total_cmp(&b[col].parse().unwrap())).unwrap();
    let m: usize = best[0].parse().unwrap();
    assert!((16..=64).contains(&m), "peak at M = {m}");
}

#[test]
fn optimize_problems() {
    let dir = tempfile::tempdir().unwrap();
    let zero = RankDistFile::from_dist(&RankDistribution::point_mass(16, 0));
    let zp = write(dir.path(), "zero.json", &to_json_bytes(&zero));
    let cfg = ExperimentConfig { rank_files: vec![zp], lp_grid: Some(40), ..Default::default() };
    let rep = json(&run(Command::Optimize, &cfg).unwrap().extra[0].1);
    assert_eq!(rep["value"].as_f64().unwrap(), 0.0);

    let h = bats_core::rank::line_rank_dist(16, &[0.2, 0.1], 256).unwrap();
    let hp = write(dir.path(), "h.json", &to_json_bytes(&RankDistFile::from_dist(&h)));
    let p1 = ExperimentConfig { rank_files: vec![hp.clone()], lp_grid: Some(40), ..Default::default() };
    let p2 = ExperimentConfig { problem: Problem::P2, ..p1.clone() };
    let v1 = json(&run(Command::Optimize, &p1).unwrap().extra[0].1)["value"].as_f64().unwrap();
    let v2 = json(&run(Command::Optimize, &p2).unwrap().extra[0].1)["value"].as_f64().unwrap();
    assert!((v1 - v2).abs() < 1e-6, "{v1} vs {v2}");
    let psi: DegreeDistFile = serde_json::from_slice(&run(Command::Optimize, &p1).unwrap().primary).unwrap();
    assert!((psi.to_dist().unwrap().as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn optimize_percentage_three_receivers() {
    let dir = tempfile::tempdir().unwrap();
    let files = [0.1, 0.2, 0.3]
        .iter()
        .map(|&e| {
            let h = bats_core::rank::line_rank_dist(16, &[0.2, e], 256).unwrap();
            write(dir.path(), &format!("h{e}.json"), &to_json_bytes(&RankDistFile::from_dist(&h)))
        })
        .collect();
    let cfg = ExperimentConfig { rank_files: files, problem: Problem::P3, ..Default::default() };
    let rep = json(&run(Command::Optimize, &cfg).unwrap().extra[0].1);
    let v = rep["eta_bar_value"].as_f64().unwrap();
    assert!((v - 0.949).abs() <= 0.003, "{v}");
}

#[test]
fn evolve_edges() {
    let cfg = ExperimentConfig { theta: Some(0.0), grid_points: 200, ..Default::default() };
    let (_, ys) = read_evolution_csv(&run(Command::Evolve, &cfg).unwrap().primary).unwrap();
    assert!(ys.iter().all(|&y| y >= -1e-12));

    let high = ExperimentConfig { theta: Some(40.0), grid_points: 200, ..Default::default() };
    let out = run(Command::Evolve, &high).unwrap();
    let x = out.summary["first_crossing"].as_f64().expect("curve crosses zero");
    assert!(x < 0.2, "{x}");
}

#[test]
fn lossless_endtoend_has_no_receiving_overhead() {
    let cfg = ExperimentConfig { hops: vec![0.0], ..small_endtoend() };
    let r = json(&run(Command::EndToEnd, &cfg).unwrap().primary);
    assert_eq!(r["aggregate"]["failures"], 0);
    assert_eq!(r["aggregate"]["payload_mismatches"], 0);
    assert_eq!(r["aggregate"]["receiving_overhead"]["max"].as_f64().unwrap(), 0.0);
    assert_eq!(r["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_over_eps() {
    let mut cfg = ExperimentConfig::default();
    cfg.sweep.command = "analyze".into();
    cfg.sweep.parameter = "eps".into();
    cfg.sweep.values = vec![0.0, 0.5];
    cfg.rank_sweep.m_values = vec![16];
    cfg.rank_sweep.hop_counts = vec![1];
    let out = run(Command::Sweep, &cfg).unwrap();
    let text = String::from_utf8(out.primary).unwrap();
    assert!(text.contains("0.5"));
    cfg.sweep.parameter = "batches".into();
    cfg.sweep.values = vec![1.5];
    assert!(run(Command::Sweep, &cfg).is_err());
}

#[test]
fn binary_writes_files_and_rejects_bad_config() {
    let bin = env!("CARGO_BIN_EXE_bats");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", br#"{"M": 8, "hops": [0.1], "batches": 20}"#);
    let out = dir.path().join("trace.csv");
    let st = Proc::new(bin).args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).args(["--seed", "5"]).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let rows = read_trace_csv(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.rank <= 8));
    assert!(dir.path().join("trace.summary.json").exists());

    for bad in [&br#"{"eta": 2.0}"#[..], br#"{"colour": 1}"#, br#"{"scheme": "smoke-signal"}"#, b"not json"] {
        let p = write(dir.path(), "bad.json", bad);
        let st = Proc::new(bin).args(["analyze", "--config"]).arg(&p).output().unwrap();
        assert!(!st.status.success());
        assert!(String::from_utf8_lossy(&st.stderr).contains("error"));
    }
}
