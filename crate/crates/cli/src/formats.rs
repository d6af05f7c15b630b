//! On-disk documents: rank and degree distributions, topologies, CSV
//! outputs and the overhead report.

use std::io::Write;
use std::path::Path;

use bats_core::degree::DegreeDistribution;
use bats_core::evolution::EvolutionCurve;
use bats_core::net::{Link, NetworkTopology, NodeSpec, Role};
use bats_core::rank::RankDistribution;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDistFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub h: Vec<f64>,
}

impl RankDistFile {
    pub fn from_dist(h: &RankDistribution) -> Self {
        RankDistFile { m: h.m(), h: h.as_slice().to_vec() }
    }

    pub fn to_dist(&self) -> Result<RankDistribution> {
        if self.h.len() != self.m + 1 {
            return Err(CliError::Config(format!("rank distribution has {} entries, expected M+1 = {}", self.h.len(), self.m + 1)));
        }
        Ok(RankDistribution::new(self.h.clone())?)
    }
}

/// `psi[i]` is the probability of degree `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistFile {
    #[serde(rename = "D")]
    pub d: usize,
    pub psi: Vec<f64>,
}

impl DegreeDistFile {
    pub fn from_dist(psi: &DegreeDistribution) -> Self {
        DegreeDistFile { d: psi.max_degree(), psi: psi.as_slice().to_vec() }
    }

    pub fn to_dist(&self) -> Result<DegreeDistribution> {
        if self.psi.len() != self.d {
            return Err(CliError::Config(format!("degree distribution has {} entries, expected D = {}", self.psi.len(), self.d)));
        }
        Ok(DegreeDistribution::new(self.psi.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeFile {
    pub id: String,
    pub role: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFile {
    pub from: String,
    pub to: String,
    pub eps: f64,
    #[serde(default)]
    pub latency: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: Vec<NodeFile>,
    pub links: Vec<LinkFile>,
}

fn role_name(r: Role) -> &'static str {
    match r {
        Role::Source => "source",
        Role::Intermediate => "intermediate",
        Role::Destination => "destination",
    }
}

impl TopologyFile {
    pub fn from_topology(t: &NetworkTopology) -> Self {
        TopologyFile {
            nodes: t.nodes.iter().map(|n| NodeFile { id: n.name.clone(), role: role_name(n.role).into() }).collect(),
            links: t
                .links
                .iter()
                .map(|l| LinkFile { from: t.nodes[l.from].name.clone(), to: t.nodes[l.to].name.clone(), eps: l.eps, latency: l.latency })
                .collect(),
        }
    }

    pub fn to_topology(&self) -> Result<NetworkTopology> {
        let mut nodes = Vec::new();
        for n in &self.nodes {
            let role = match n.role.as_str() {
                "source" => Role::Source,
                "intermediate" => Role::Intermediate,
                "destination" => Role::Destination,
                other => return Err(CliError::Config(format!("node {}: unknown role {other:?}", n.id))),
            };
            if nodes.iter().any(|x: &NodeSpec| x.name == n.id) {
                return Err(CliError::Config(format!("duplicate node id {:?}", n.id)));
            }
            nodes.push(NodeSpec { name: n.id.clone(), role });
        }
        let find = |id: &str| nodes.iter().position(|n| n.name == id).ok_or_else(|| CliError::Config(format!("link references unknown node {id:?}")));
        let mut links = Vec::new();
        for l in &self.links {
            links.push(Link { from: find(&l.from)?, to: find(&l.to)?, eps: l.eps, latency: l.latency });
        }
        Ok(NetworkTopology::new(nodes, links)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::Json { path: path.into(), source })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// Provenance line written above every CSV header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl CsvMeta {
    pub fn comment(&self) -> String {
        format!("# config={} seed={}", self.config_hash, self.seed)
    }
}

/// A CSV document: comment lines, a header row, then records.
pub fn csv_bytes(meta: &CsvMeta, extra_comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{}", meta.comment()).expect("vec write");
    for c in extra_comments {
        writeln!(out, "# {c}").expect("vec write");
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv flush: {e}")))
}

/// Comment lines (without `# `) and records of a CSV document.
pub fn parse_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<String>, Vec<Vec<String>>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Config(format!("csv is not utf-8: {e}")))?;
    let comments = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim().to_string()).collect();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((comments, header, rows))
}

/// `x, rho0` rows; the first zero crossing, if any, is noted in a comment.
pub fn evolution_csv(meta: &CsvMeta, curve: &EvolutionCurve) -> Result<Vec<u8>> {
    let crossing = match curve.first_crossing() {
        Some(x) => format!("first_crossing={x}"),
        None => "first_crossing=none".into(),
    };
    let extra = [format!("theta={}", curve.theta), crossing];
    let rows: Vec<Vec<String>> = curve.grid.iter().zip(&curve.rho0).map(|(x, r)| vec![x.to_string(), r.to_string()]).collect();
    csv_bytes(meta, &extra, &["x", "rho0"], &rows)
}

pub fn read_evolution_csv(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, header, rows) = parse_csv(bytes)?;
    if header != ["x", "rho0"] {
        return Err(CliError::Config(format!("unexpected evolution header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| CliError::Config(format!("bad number {s:?}: {e}")));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in rows {
        xs.push(num(&r[0])?);
        ys.push(num(&r[1])?);
    }
    Ok((xs, ys))
}

/// One row of a simulation trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub batch_id: u32,
    pub destination: String,
    pub columns: usize,
    pub rank: usize,
}

pub const TRACE_HEADER: [&str; 4] = ["batch_id", "destination", "columns", "rank"];

pub fn trace_csv(meta: &CsvMeta, rows: &[TraceRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.batch_id.to_string(), r.destination.clone(), r.columns.to_string(), r.rank.to_string()]).collect();
    csv_bytes(meta, &[], &TRACE_HEADER, &rows)
}

pub fn read_trace_csv(bytes: &[u8]) -> Result<Vec<TraceRow>> {
    let (_, header, rows) = parse_csv(bytes)?;
    if header != TRACE_HEADER {
        return Err(CliError::Config(format!("unexpected trace header {header:?}")));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|e| CliError::Config(format!("bad integer {s:?}: {e}")));
    rows.into_iter()
        .map(|r| Ok(TraceRow { batch_id: int(&r[0])? as u32, destination: r[1].clone(), columns: int(&r[2])?, rank: int(&r[3])? }))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Option<Stats> {
        let v: Vec<f64> = xs.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Stats { min, mean: v.iter().sum::<f64>() / v.len() as f64, max })
    }
}

/// Outcome at one destination in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub destination: String,
    pub group: usize,
    pub decoded: bool,
    /// Every recovered input equals the transmitted one.
    pub payload_ok: bool,
    /// Packets in the shortest decodable prefix.
    pub packets: Option<usize>,
    pub receiving_overhead: Option<usize>,
    pub coding_overhead: Option<i64>,
    pub inactivations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub records: usize,
    pub failures: usize,
    pub payload_mismatches: usize,
    pub receiving_overhead: Option<Stats>,
    pub coding_overhead: Option<Stats>,
    pub inactivations: Option<Stats>,
}

impl Aggregate {
    pub fn of(records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.decoded).collect();
        Aggregate {
            records: records.len(),
            failures: records.len() - ok.len(),
            payload_mismatches: ok.iter().filter(|r| !r.payload_ok).count(),
            receiving_overhead: Stats::of(ok.iter().filter_map(|r| r.receiving_overhead).map(|x| x as f64)),
            coding_overhead: Stats::of(ok.iter().filter_map(|r| r.coding_overhead).map(|x| x as f64)),
            inactivations: Stats::of(ok.iter().filter_map(|r| r.inactivations).map(|x| x as f64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReportFile {
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub scheme: String,
    pub k_prime: usize,
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub q: u32,
    #[serde(rename = "T")]
    pub t: usize,
    pub batches: usize,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}
