//! The subcommands. Each is a pure function of the config (seed
//! included) and returns the bytes it would write.

use std::path::{Path, PathBuf};

use bats_core::degree::{achievable_theta, optimize_p1, optimize_p2, optimize_p3, optimize_p4, DegreeDistribution, Optimum};
use bats_core::evolution::{density_evolution, uniform_grid};
use bats_core::net::run_scheme_ranks;
use bats_core::rank::RankDistribution;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Problem};
use crate::error::{io_err, CliError, Result};
use crate::experiments::{self, EndToEnd};
use crate::formats::{self, Aggregate, CsvMeta, DegreeDistFile, OverheadReportFile, SCHEMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Optimize,
    Evolve,
    Simulate,
    EndToEnd,
    Sweep,
}

impl Command {
    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "analyze" => Command::Analyze,
            "optimize" => Command::Optimize,
            "evolve" => Command::Evolve,
            "simulate" => Command::Simulate,
            "endtoend" => Command::EndToEnd,
            "sweep" => Command::Sweep,
            _ => return None,
        })
    }
}

/// What a command produced: the main document, sibling documents keyed by
/// file-name suffix, and a JSON summary (used by `sweep`).
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub primary: Vec<u8>,
    pub extra: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl Output {
    /// Writes the main document to `out` (stdout when absent) and every
    /// sibling next to it as `<stem>.<suffix>`.
    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        use std::io::Write;
        let Some(out) = out else {
            std::io::stdout().write_all(&self.primary).map_err(io_err("<stdout>"))?;
            return Ok(());
        };
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        std::fs::write(out, &self.primary).map_err(io_err(out))?;
        for (suffix, bytes) in &self.extra {
            let p = sibling(out, suffix);
            std::fs::write(&p, bytes).map_err(io_err(&p))?;
        }
        Ok(())
    }
}

/// `dir/report.json` + `sweep.csv` → `dir/report.sweep.csv`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Output> {
    cfg.validate()?;
    let meta = CsvMeta { config_hash: cfg.hash()?, seed: cfg.seed };
    match cmd {
        Command::Analyze => analyze(cfg, &meta),
        Command::Optimize => optimize(cfg, &meta),
        Command::Evolve => evolve(cfg, &meta),
        Command::Simulate => simulate(cfg, &meta),
        Command::EndToEnd => endtoend(cfg, &meta),
        Command::Sweep => sweep(cfg, &meta),
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    formats::to_json_bytes(v)
}

fn header(meta: &CsvMeta, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("config_hash".into(), json!(meta.config_hash));
    m.insert("seed".into(), json!(meta.seed));
    m
}

fn analyze(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let hs = cfg.rank_distributions()?;
    let reports: Vec<_> = hs.iter().map(|h| experiments::rank_report(h, cfg.q, if cfg.rank_files.is_empty() { &cfg.hops } else { &[] })).collect();
    let rs = &cfg.rank_sweep;
    let rows = experiments::rank_sweep(&rs.m_values, &rs.hop_counts, rs.eps, cfg.q, cfg.t)?;
    let mut doc = header(meta, "analyze");
    doc.insert("T".into(), json!(cfg.t));
    doc.insert("distributions".into(), json!(reports));
    doc.insert("sweep".into(), json!(rows));
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.m.to_string(), r.hops.to_string(), r.eps.to_string(), r.normalized_rank.to_string(), r.with_vector_overhead.to_string()])
        .collect();
    let csv = formats::csv_bytes(meta, &[format!("T={}", cfg.t)], &["M", "hops", "eps", "normalized_rank", "with_vector_overhead"], &csv_rows)?;
    let summary = json!({
        "sum_r_hbar": reports.iter().map(|r| r.sum_r_hbar).collect::<Vec<_>>(),
        "sum_r_h": reports.iter().map(|r| r.sum_r_h).collect::<Vec<_>>(),
    });
    Ok(Output { primary: json_bytes(&doc), extra: vec![("sweep.csv".into(), csv)], summary })
}

fn solve(cfg: &ExperimentConfig, hs: &[RankDistribution]) -> Result<Optimum> {
    let s = cfg.lp_settings();
    let single = || -> Result<&RankDistribution> {
        match hs {
            [h] => Ok(h),
            _ => Err(CliError::Config(format!("{:?} takes exactly one rank distribution, got {}", cfg.problem, hs.len()))),
        }
    };
    Ok(match cfg.problem {
        Problem::P1 => optimize_p1(single()?, cfg.q, cfg.eta, s)?,
        Problem::P2 => optimize_p2(hs, cfg.q, cfg.eta, s)?,
        Problem::P3 => optimize_p3(hs, cfg.q, cfg.eta, s)?,
        Problem::P4 => {
            let p = &cfg.penalty;
            optimize_p4(single()?, cfg.q, cfg.eta, p.k.unwrap_or(cfg.k_prime as f64), p.c, p.c_prime, s)?
        }
    })
}

fn optimize(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let hs = cfg.rank_distributions()?;
    let o = solve(cfg, &hs)?;
    let sums: Vec<f64> = hs.iter().map(|h| bats_core::rank::effective_dist(h, cfg.q).weighted_sum()).collect();
    let per = experiments::evaluate_optimum(&o, &hs, cfg.q, cfg.eta, |i| if cfg.problem == Problem::P3 { o.value * sums[i] } else { o.value });
    let psi = DegreeDistFile::from_dist(&o.psi);
    let mut doc = header(meta, "optimize");
    doc.insert("problem".into(), json!(cfg.problem));
    doc.insert("q".into(), json!(cfg.q));
    doc.insert("eta".into(), json!(cfg.eta));
    doc.insert("value".into(), json!(o.value));
    doc.insert("eta_bar_value".into(), json!((1.0 - cfg.eta) * o.value));
    doc.insert("lp_value".into(), json!(o.lp_value));
    doc.insert("status".into(), json!(format!("{:?}", o.status)));
    doc.insert("fixup_applied".into(), json!(o.fixup_applied));
    doc.insert("empty_support".into(), json!(o.empty_support));
    doc.insert("distributions".into(), json!(per));
    doc.insert("psi".into(), json!(psi));
    let summary = json!({ "value": o.value, "eta_bar_value": (1.0 - cfg.eta) * o.value, "status": format!("{:?}", o.status) });
    Ok(Output { primary: json_bytes(&psi), extra: vec![("report.json".into(), json_bytes(&doc))], summary })
}

/// The configured `Ψ`, or the P1 optimum for the first rank distribution.
fn degree_distribution(cfg: &ExperimentConfig, h: &RankDistribution) -> Result<DegreeDistribution> {
    match cfg.degree_distribution()? {
        Some(p) => Ok(p),
        None => Ok(optimize_p1(h, cfg.q, cfg.eta, cfg.lp_settings())?.psi),
    }
}

fn evolve(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let h = cfg.rank_distributions()?.swap_remove(0);
    let psi = degree_distribution(cfg, &h)?;
    let theta = match cfg.theta {
        Some(t) => t,
        None => achievable_theta(&psi, &h, cfg.q, cfg.eta, cfg.grid_points),
    };
    if theta == 0.0 {
        // ρ₀(x) = (1−x)Ω(x): evaluate directly, the curve type needs θ > 0
        let eff = bats_core::rank::effective_dist(&h, cfg.q);
        let grid = uniform_grid(cfg.grid_points);
        let rho0 = grid.iter().map(|&x| (1.0 - x) * bats_core::degree::omega(x, &eff, &psi)).collect();
        let curve = bats_core::evolution::EvolutionCurve { theta, grid, rho0, rho_dr: Vec::new() };
        return evolve_output(meta, &curve);
    }
    let curve = density_evolution(&psi, &h, cfg.q, theta, &uniform_grid(cfg.grid_points))?;
    evolve_output(meta, &curve)
}

fn evolve_output(meta: &CsvMeta, curve: &bats_core::evolution::EvolutionCurve) -> Result<Output> {
    let crossing = curve.first_crossing();
    let summary = json!({ "theta": curve.theta, "first_crossing": crossing, "min_rho0": curve.min_rho0() });
    Ok(Output { primary: formats::evolution_csv(meta, curve)?, extra: Vec::new(), summary })
}

fn simulate(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let topo = cfg.topology()?;
    let run = run_scheme_ranks(&topo, &cfg.scheme_config()?)?;
    let rows = experiments::trace_rows(&run);
    let dests = experiments::destination_summaries(&run)?;
    let buffers: Vec<Value> = (0..run.topology.nodes.len())
        .filter(|&v| run.max_buffer[v] > 0 || run.buffer_cap[v].is_some())
        .map(|v| json!({ "node": run.topology.nodes[v].name, "max_buffer": run.max_buffer[v], "cap": run.buffer_cap[v] }))
        .collect();
    let mut doc = header(meta, "simulate");
    doc.insert("scheme".into(), json!(cfg.scheme));
    doc.insert("M".into(), json!(cfg.m));
    doc.insert("q".into(), json!(cfg.q));
    doc.insert("batches".into(), json!(cfg.batches));
    doc.insert("destinations".into(), json!(dests));
    doc.insert("buffers".into(), json!(buffers));
    let summary = json!({
        "expected_rank": dests.iter().map(|d| (d.destination.clone(), json!(d.expected_rank))).collect::<serde_json::Map<_, _>>(),
    });
    Ok(Output { primary: formats::trace_csv(meta, &rows)?, extra: vec![("summary.json".into(), json_bytes(&doc))], summary })
}

/// The end-to-end setup a config describes.
pub fn endtoend_spec(cfg: &ExperimentConfig) -> Result<EndToEnd> {
    let topology = cfg.topology()?;
    let scheme = cfg.scheme_config()?;
    let psi = match cfg.degree_distribution()? {
        Some(p) => p,
        None => {
            let h = bats_core::rank::line_rank_dist(scheme.outer_width(), &cfg.hops, cfg.q)?;
            optimize_p1(&h, cfg.q, cfg.eta, cfg.lp_settings())?.psi
        }
    };
    Ok(EndToEnd { topology, scheme, psi, k_prime: cfg.k_prime, precode: cfg.precode_spec(0)? })
}

pub fn endtoend_report(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<OverheadReportFile> {
    let spec = endtoend_spec(cfg)?;
    let records = spec.run(cfg.seed, cfg.trials)?;
    Ok(OverheadReportFile {
        schema: SCHEMA,
        config_hash: meta.config_hash.clone(),
        seed: meta.seed,
        scheme: cfg.scheme.clone(),
        k_prime: cfg.k_prime,
        k: spec.k(),
        m: cfg.m,
        q: cfg.q,
        t: cfg.t,
        batches: cfg.batches,
        aggregate: Aggregate::of(&records),
        trials: records,
    })
}

fn endtoend(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let report = endtoend_report(cfg, meta)?;
    let summary = serde_json::to_value(&report.aggregate).expect("serializable");
    Ok(Output { primary: json_bytes(&report), extra: Vec::new(), summary })
}

fn sweep(cfg: &ExperimentConfig, meta: &CsvMeta) -> Result<Output> {
    let sw = &cfg.sweep;
    let inner = Command::from_name(&sw.command).ok_or_else(|| CliError::Config(format!("unknown sweep command {:?}", sw.command)))?;
    if inner == Command::Sweep {
        return Err(CliError::Config("sweeps do not nest".into()));
    }
    let mut points = Vec::new();
    for &v in &sw.values {
        let c = cfg.with_param(&sw.parameter, v)?;
        let out = run(inner, &c)?;
        points.push(json!({ "value": v, "result": out.summary }));
    }
    let mut doc = header(meta, "sweep");
    doc.insert("sweep_command".into(), json!(sw.command));
    doc.insert("parameter".into(), json!(sw.parameter));
    doc.insert("points".into(), Value::Array(points.clone()));
    Ok(Output { primary: json_bytes(&doc), extra: Vec::new(), summary: Value::Array(points) })
}
