//! Experiment configuration as read from `--config`.

use std::path::{Path, PathBuf};

use bats_core::codec::{PrecodeMode, PrecodeSpec};
use bats_core::degree::LpSettings;
use bats_core::net::{NetworkTopology, SchemeConfig, SchemeTag};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};
use crate::formats::{read_json, DegreeDistFile, RankDistFile, TopologyFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    P1,
    P2,
    P3,
    P4,
}

/// Weights of the penalized program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    /// Number of input packets; defaults to `k_prime`.
    pub k: Option<f64>,
    pub c: f64,
    pub c_prime: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { k: None, c: 1.0, c_prime: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecodeConfig {
    /// `"sparse"` or `"none"`.
    pub mode: String,
    pub rate: f64,
    pub weight: usize,
}

impl Default for PrecodeConfig {
    fn default() -> Self {
        let d = PrecodeSpec::default();
        PrecodeConfig { mode: "sparse".into(), rate: d.rate, weight: d.weight }
    }
}

/// `M` values, hop counts and link erasure for the expected-rank sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSweepConfig {
    pub m_values: Vec<usize>,
    pub hop_counts: Vec<usize>,
    pub eps: f64,
}

impl Default for RankSweepConfig {
    fn default() -> Self {
        RankSweepConfig { m_values: vec![1, 2, 4, 8, 16, 32, 64, 128], hop_counts: (1..=8).collect(), eps: 0.2 }
    }
}

/// The `sweep` command: run `command` once per value of `parameter`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSweepConfig {
    pub command: String,
    /// A numeric top-level field, or `"eps"` for every link erasure.
    pub parameter: String,
    pub values: Vec<f64>,
}

impl Default for ParamSweepConfig {
    fn default() -> Self {
        ParamSweepConfig { command: "analyze".into(), parameter: "M".into(), values: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    #[serde(rename = "M")]
    pub m: usize,
    pub q: u32,
    /// Payload symbols per packet.
    #[serde(rename = "T")]
    pub t: usize,
    pub k_prime: usize,
    pub eta: f64,
    pub theta: Option<f64>,
    /// Erasure probabilities of a line network, used when no rank or
    /// topology file is given.
    pub hops: Vec<f64>,
    pub rank_files: Vec<PathBuf>,
    pub degree_file: Option<PathBuf>,
    pub topology_file: Option<PathBuf>,
    pub problem: Problem,
    pub penalty: PenaltyConfig,
    pub lp_grid: Option<usize>,
    pub max_degree: Option<usize>,
    pub grid_points: usize,
    pub scheme: String,
    pub batches: usize,
    pub m_tilde: Option<usize>,
    pub homogenize: Option<u32>,
    pub precode: PrecodeConfig,
    pub rank_sweep: RankSweepConfig,
    pub sweep: ParamSweepConfig,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: None,
            m: 16,
            q: 256,
            t: 64,
            k_prime: 256,
            eta: 0.01,
            theta: None,
            hops: vec![0.2, 0.1],
            rank_files: Vec::new(),
            degree_file: None,
            topology_file: None,
            problem: Problem::P1,
            penalty: PenaltyConfig::default(),
            lp_grid: None,
            max_degree: None,
            grid_points: 1000,
            scheme: "line".into(),
            batches: 100,
            m_tilde: None,
            homogenize: None,
            precode: PrecodeConfig::default(),
            rank_sweep: RankSweepConfig::default(),
            sweep: ParamSweepConfig::default(),
            seed: 0,
            trials: 1,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths inside it are taken relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.rank_files.iter_mut().for_each(fix);
        cfg.degree_file.iter_mut().for_each(fix);
        cfg.topology_file.iter_mut().for_each(fix);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.m == 0 {
            return bad("M must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if self.hops.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("hop erasure probabilities must lie in [0, 1]".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if SchemeTag::from_name(&self.scheme).is_none() {
            let names: Vec<&str> = SchemeTag::ALL.iter().map(|s| s.name()).collect();
            return bad(format!("unknown scheme {:?}; expected one of {}", self.scheme, names.join(", ")));
        }
        bats_core::Field::with_order(self.q)?;
        self.precode_spec(0)?.validate()?;
        Ok(())
    }

    pub fn lp_settings(&self) -> LpSettings {
        let mut s = LpSettings::default();
        if let Some(g) = self.lp_grid {
            s.grid = g;
        }
        s.max_degree = self.max_degree;
        s
    }

    pub fn precode_spec(&self, seed: u64) -> Result<PrecodeSpec> {
        let mode = match self.precode.mode.as_str() {
            "sparse" => PrecodeMode::SystematicSparse,
            "none" => return Ok(PrecodeSpec::none()),
            other => return Err(CliError::Config(format!("unknown precode mode {other:?}"))),
        };
        Ok(PrecodeSpec { mode, rate: self.precode.rate, weight: self.precode.weight, seed })
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let tag = SchemeTag::from_name(&self.scheme).ok_or_else(|| CliError::Config(format!("unknown scheme {:?}", self.scheme)))?;
        let mut c = SchemeConfig::new(tag, self.m, self.q, self.batches, self.seed);
        c.t = self.t;
        c.m_tilde = self.m_tilde;
        c.homogenize = self.homogenize;
        c.validate()?;
        Ok(c)
    }

    /// The topology file if given, otherwise the built-in network the
    /// scheme runs on, with `hops` supplying the erasure probabilities.
    pub fn topology(&self) -> Result<NetworkTopology> {
        if let Some(p) = &self.topology_file {
            return read_json::<TopologyFile>(p)?.to_topology();
        }
        let eps = |i: usize| self.hops.get(i).or(self.hops.last()).copied().unwrap_or(0.0);
        let tag = SchemeTag::from_name(&self.scheme).ok_or_else(|| CliError::Config(format!("unknown scheme {:?}", self.scheme)))?;
        Ok(match tag {
            SchemeTag::Butterfly | SchemeTag::ButterflySplit => NetworkTopology::butterfly(eps(0))?,
            SchemeTag::TreeMulticast => NetworkTopology::three_layer(eps(0))?,
            SchemeTag::TwoWayRelay | SchemeTag::TwoWayRelayPnc => NetworkTopology::line(&[eps(0), eps(1)])?,
            _ => NetworkTopology::line(&self.hops)?,
        })
    }

    pub fn rank_distributions(&self) -> Result<Vec<bats_core::rank::RankDistribution>> {
        if self.rank_files.is_empty() {
            return Ok(vec![bats_core::rank::line_rank_dist(self.m, &self.hops, self.q)?]);
        }
        self.rank_files.iter().map(|p| read_json::<RankDistFile>(p)?.to_dist()).collect()
    }

    pub fn degree_distribution(&self) -> Result<Option<bats_core::degree::DegreeDistribution>> {
        self.degree_file.as_ref().map(|p| read_json::<DegreeDistFile>(p)?.to_dist()).transpose()
    }

    /// SHA-256 over the canonical config (without `out`) and the bytes of
    /// every referenced input file.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&c).expect("serializable"));
        let files = self.rank_files.iter().chain(&self.degree_file).chain(&self.topology_file);
        for p in files {
            h.update(std::fs::read(p).map_err(io_err(p))?);
        }
        Ok(hex::encode(h.finalize()))
    }

    /// A copy with one numeric field replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        if name == "eps" {
            if c.topology_file.is_some() {
                return Err(CliError::Config("sweeping eps needs a hop list, not a topology file".into()));
            }
            c.hops.iter_mut().for_each(|e| *e = value);
            c.rank_sweep.eps = value;
        } else {
            let mut v = serde_json::to_value(&c).expect("serializable");
            let slot = v.get_mut(name).ok_or_else(|| CliError::Config(format!("unknown sweep parameter {name:?}")))?;
            if slot.is_u64() && (value.fract() != 0.0 || value < 0.0) {
                return Err(CliError::Config(format!("parameter {name} takes non-negative integers, got {value}")));
            }
            *slot =
                if slot.is_u64() || (slot.is_null() && value.fract() == 0.0) { serde_json::json!(value as u64) } else { serde_json::json!(value) };
            c = serde_json::from_value(v).map_err(|e| CliError::Config(format!("parameter {name} = {value}: {e}")))?;
        }
        c.validate()?;
        Ok(c)
    }
}
