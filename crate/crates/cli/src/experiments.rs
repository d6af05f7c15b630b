//! Experiments shared by the commands and the acceptance run.

use std::collections::BTreeMap;

use bats_core::beta::{beta_fn, choose, inc_beta};
use bats_core::codec::{
    build_decoder, decode_shortest_prefix, precode_encode, BatchCode, Decoder, Packet, PrecodeSpec, ReceivedBatch, Selection, VarState,
};
use bats_core::degree::{
    achievable_theta, grid, normalized_theta, omega, optimize_p1, optimize_p2, optimize_p3, sample_rank_distribution, theta_bounds,
    DegreeDistribution, LpSettings, Optimum,
};
use bats_core::matrix::row_reduce;
use bats_core::net::{homogenize, max_flow, run_scheme, DestinationTrace, Link, NetworkTopology, NodeSpec, Role, SchemeConfig, SchemeRun};
use bats_core::rank::{effective_dist, expected_rank, line_rank_dist, RankDistribution};
use bats_core::rng::{derive_key, domain, mix64};
use bats_core::{Field, FieldMatrix, RandomStream};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::formats::{RankDistFile, TraceRow, TrialRecord};

/// Seed of trial `i` under a master seed.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    mix64(seed ^ derive_key(domain::TRIAL, i as u64))
}

// ---------------------------------------------------------------- analysis

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub q: u32,
    pub hops: Vec<f64>,
    pub h: Vec<f64>,
    /// `ħ_r` for `r = 0..=M`.
    pub hbar: Vec<f64>,
    pub hbar_prime: Vec<f64>,
    pub sum_r_hbar: f64,
    pub sum_r_h: f64,
}

pub fn rank_report(h: &RankDistribution, q: u32, hops: &[f64]) -> RankReport {
    let eff = effective_dist(h, q);
    RankReport {
        m: h.m(),
        q,
        hops: hops.to_vec(),
        h: h.as_slice().to_vec(),
        hbar: (0..=h.m()).map(|r| eff.hbar(r)).collect(),
        hbar_prime: (0..=h.m()).map(|r| eff.hbar_prime(r)).collect(),
        sum_r_hbar: eff.weighted_sum(),
        sum_r_h: expected_rank(h),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankSweepRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub hops: usize,
    pub eps: f64,
    /// `Σ r h_r / M`.
    pub normalized_rank: f64,
    /// `(1 − M/T) Σ r h_r / M`.
    pub with_vector_overhead: f64,
}

/// Normalized expected rank of a line of `k` identical hops for every
/// `(M, k)` pair.
pub fn rank_sweep(ms: &[usize], ks: &[usize], eps: f64, q: u32, t: usize) -> Result<Vec<RankSweepRow>> {
    let mut rows = Vec::new();
    for &m in ms {
        for &k in ks {
            let h = line_rank_dist(m, &vec![eps; k], q)?;
            let nr = expected_rank(&h) / m as f64;
            rows.push(RankSweepRow { m, hops: k, eps, normalized_rank: nr, with_vector_overhead: (1.0 - m as f64 / t as f64) * nr });
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------ optimization

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerDistribution {
    pub sum_r_hbar: f64,
    /// Largest `θ` the returned `Ψ` supports on this distribution.
    pub theta: f64,
    /// `(1−η)θ / Σ rħ_r`.
    pub normalized: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `min_x Ω(x) + θ* ln(1−x)` on the verification grid, `θ*` the
    /// rate the program asked of this distribution.
    pub margin: f64,
}

/// Per-distribution view of an optimum; `target(i)` is the rate the
/// program required of distribution `i`.
pub fn evaluate_optimum(o: &Optimum, hs: &[RankDistribution], q: u32, eta: f64, target: impl Fn(usize) -> f64) -> Vec<PerDistribution> {
    let xs = grid(eta, 1000);
    hs.iter()
        .enumerate()
        .map(|(i, h)| {
            let eff = effective_dist(h, q);
            let theta = achievable_theta(&o.psi, h, q, eta, 1000);
            let (lower_bound, upper_bound) = theta_bounds(h, q, eta);
            let tgt = target(i);
            let margin = xs.iter().map(|&x| omega(x, &eff, &o.psi) + tgt * (1.0 - x).ln()).fold(f64::INFINITY, f64::min);
            PerDistribution {
                sum_r_hbar: eff.weighted_sum(),
                theta,
                normalized: normalized_theta(theta, h, q, eta),
                lower_bound,
                upper_bound,
                margin,
            }
        })
        .collect()
}

// -------------------------------------------------------------- simulation

/// Destination label used in traces: the node name, with `/group` for
/// every outer code but the first.
pub fn destination_label(run: &SchemeRun, tr: &DestinationTrace) -> String {
    let name = &run.topology.nodes[tr.node].name;
    if tr.group == 0 {
        name.clone()
    } else {
        format!("{name}/{}", tr.group)
    }
}

pub fn trace_rows(run: &SchemeRun) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for tr in &run.traces {
        let label = destination_label(run, tr);
        for b in &tr.batches {
            rows.push(TraceRow { batch_id: b.id, destination: label.clone(), columns: b.packets.len(), rank: b.h.rank() });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DestinationSummary {
    pub destination: String,
    pub group: usize,
    pub batches: usize,
    pub columns: usize,
    pub expected_rank: f64,
    pub rank_distribution: RankDistFile,
}

pub fn destination_summaries(run: &SchemeRun) -> Result<Vec<DestinationSummary>> {
    run.traces
        .iter()
        .map(|tr| {
            let h = tr.rank_distribution()?;
            Ok(DestinationSummary {
                destination: destination_label(run, tr),
                group: tr.group,
                batches: tr.batches.len(),
                columns: tr.columns(),
                expected_rank: expected_rank(&h),
                rank_distribution: RankDistFile::from_dist(&h),
            })
        })
        .collect()
}

// -------------------------------------------------------------- end to end

/// Everything fixed across the trials of an end-to-end run.
#[derive(Clone, Debug)]
pub struct EndToEnd {
    pub topology: NetworkTopology,
    /// `seed` is replaced per trial.
    pub scheme: SchemeConfig,
    pub psi: DegreeDistribution,
    pub k_prime: usize,
    /// `seed` is replaced per trial.
    pub precode: PrecodeSpec,
}

struct OuterCode {
    code: BatchCode,
    inputs: Vec<Vec<u8>>,
    intermediate: Vec<Vec<u8>>,
}

impl EndToEnd {
    pub fn k(&self) -> usize {
        self.precode.intermediate_count(self.k_prime)
    }

    /// Precode, batch encoding, the inner code, then shortest-prefix
    /// inactivation decoding at every destination of every outer code.
    pub fn trial(&self, seed: u64, trial: usize) -> Result<Vec<TrialRecord>> {
        let ts = trial_seed(seed, trial);
        let field = Field::with_order(self.scheme.q)?;
        let t = self.scheme.t;
        let precode = PrecodeSpec { seed: ts, ..self.precode };
        let k = precode.intermediate_count(self.k_prime);
        let mut cfg = self.scheme.clone();
        cfg.seed = ts;
        let mut codes: BTreeMap<usize, OuterCode> = BTreeMap::new();
        let run = {
            let mut source = |g: usize, id: u32, w: usize| -> bats_core::Result<Vec<Packet>> {
                if let std::collections::btree_map::Entry::Vacant(e) = codes.entry(g) {
                    let mut s = RandomStream::derive(ts, domain::PAYLOAD, g as u64);
                    let inputs: Vec<Vec<u8>> = (0..self.k_prime)
                        .map(|_| {
                            let mut p = vec![0u8; t];
                            s.fill_elements(field, &mut p);
                            p
                        })
                        .collect();
                    let intermediate = precode_encode(field, &inputs, &precode)?;
                    let code = BatchCode::new(field, k, w, mix64(ts ^ derive_key(domain::BATCH, g as u64)), self.psi.clone())?;
                    e.insert(OuterCode { code, inputs, intermediate });
                }
                let oc = &codes[&g];
                if oc.code.m != w {
                    return Err(bats_core::Error::InvalidParameter(format!("outer code {g} has width {}, scheme asked for {w}", oc.code.m)));
                }
                Ok(oc.code.batch(id, &oc.intermediate)?.packets)
            };
            run_scheme(&self.topology, &cfg, &mut source)?
        };
        let checks = precode.checks(field, self.k_prime);
        let mut out = Vec::new();
        for tr in &run.traces {
            let oc = &codes[&tr.group];
            let received: Vec<ReceivedBatch> =
                tr.batches.iter().map(|b| ReceivedBatch::from_packets(&oc.code, t, b.id, &b.packets)).collect::<bats_core::Result<_>>()?;
            let destination = destination_label(&run, tr);
            let rec = match decode_shortest_prefix(field, k, self.k_prime, t, &received, &checks)? {
                Some(pd) => {
                    let payload_ok = (0..self.k_prime).all(|v| pd.decoder.payload(v) == Some(&oc.inputs[v][..]));
                    TrialRecord {
                        trial,
                        destination,
                        group: tr.group,
                        decoded: true,
                        payload_ok,
                        packets: Some(pd.packets),
                        receiving_overhead: Some(pd.report.receiving_overhead),
                        coding_overhead: Some(pd.report.coding_overhead),
                        inactivations: Some(pd.report.inactivations),
                    }
                }
                None => TrialRecord {
                    trial,
                    destination,
                    group: tr.group,
                    decoded: false,
                    payload_ok: false,
                    packets: None,
                    receiving_overhead: None,
                    coding_overhead: None,
                    inactivations: None,
                },
            };
            out.push(rec);
        }
        Ok(out)
    }

    /// Trials in parallel, records in trial order.
    pub fn run(&self, seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
        let per: Vec<Vec<TrialRecord>> = (0..trials).into_par_iter().map(|i| self.trial(seed, i)).collect::<Result<_>>()?;
        Ok(per.into_iter().flatten().collect())
    }
}

// --------------------------------------------------- rank/degree studies

/// Rank distributions at the three destinations of the two-hop
/// broadcast network: first hop 0.2, second hop 0.1 / 0.2 / 0.3.
pub fn broadcast_rank_distributions() -> Result<Vec<RankDistribution>> {
    [0.1, 0.2, 0.3].iter().map(|&e| Ok(line_rank_dist(16, &[0.2, e], 256)?)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossRates {
    pub sums: Vec<f64>,
    /// `rates[i][j]`: `(1−η)θ` of the distribution optimized for
    /// destination `i`, evaluated on destination `j`.
    pub rates: Vec<Vec<f64>>,
}

pub fn cross_rates() -> Result<CrossRates> {
    let hs = broadcast_rank_distributions()?;
    let eta = 0.01;
    let sums = hs.iter().map(|h| effective_dist(h, 256).weighted_sum()).collect();
    let mut rates = Vec::new();
    for h in &hs {
        let o = optimize_p1(h, 256, eta, LpSettings::default())?;
        rates.push(hs.iter().map(|h2| (1.0 - eta) * achievable_theta(&o.psi, h2, 256, eta, 1000)).collect());
    }
    Ok(CrossRates { sums, rates })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Percentages {
    /// `(1−η)α̂`.
    pub value: f64,
    /// Percentage of `Σ rħ_r` achieved at each destination.
    pub per_node: Vec<f64>,
}

pub fn p3_percentages() -> Result<Percentages> {
    let hs = broadcast_rank_distributions()?;
    let eta = 0.01;
    let o = optimize_p3(&hs, 256, eta, LpSettings::default())?;
    let per_node = hs.iter().map(|h| 100.0 * normalized_theta(achievable_theta(&o.psi, h, 256, eta, 1000), h, 256, eta)).collect();
    Ok(Percentages { value: (1.0 - eta) * o.value, per_node })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomRankStudy {
    pub etas: Vec<f64>,
    /// `theta_hat[e][s]`: P1 optimum for sample `s` at `etas[e]`.
    pub theta_hat: Vec<Vec<f64>>,
    pub theta_tilde: Vec<Vec<f64>>,
}

/// P1 on `samples` uniformly drawn rank distributions with `h_0 = 0`.
pub fn random_rank_study(m: usize, samples: usize, etas: &[f64], seed: u64) -> Result<RandomRankStudy> {
    let mut s = RandomStream::derive(seed, domain::SAMPLE, 0);
    let hs: Vec<RankDistribution> = (0..samples).map(|_| sample_rank_distribution(m, &mut s)).collect();
    let per: Vec<Vec<(f64, f64)>> = hs
        .par_iter()
        .map(|h| {
            etas.iter()
                .map(|&eta| {
                    let o = optimize_p1(h, 256, eta, LpSettings::default())?;
                    Ok((o.value, normalized_theta(o.value, h, 256, eta)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let pick = |f: fn(&(f64, f64)) -> f64| (0..etas.len()).map(|e| per.iter().map(|v| f(&v[e])).collect()).collect();
    Ok(RandomRankStudy { etas: etas.to_vec(), theta_hat: pick(|p| p.0), theta_tilde: pick(|p| p.1) })
}

/// `(lower, θ̂, upper)` for random rank distributions.
pub fn bound_sandwich(m: usize, samples: usize, eta: f64, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    let mut s = RandomStream::derive(seed, domain::SAMPLE, 1);
    let hs: Vec<RankDistribution> = (0..samples).map(|_| sample_rank_distribution(m, &mut s)).collect();
    hs.par_iter()
        .map(|h| {
            let (lo, hi) = theta_bounds(h, 256, eta);
            Ok((lo, optimize_p1(h, 256, eta, LpSettings::default())?.value, hi))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniversalRates {
    /// `(1−η)α̂` of the relaxed percentage program over every point mass
    /// and some sampled distributions.
    pub percentage_all: f64,
    /// `(1−η)θ̂` of the relaxed multicast program over the point mass at
    /// `μ` and sampled members of the mean-`μ` set.
    pub multicast_sampled: f64,
    /// The same program over every extreme point of the mean-`μ` set.
    pub multicast_extreme: f64,
}

/// Extreme points of `{h : Σ r h_r ≥ μ}`: point masses at ranks `≥ μ`
/// and two-point distributions with mean exactly `μ`.
pub fn mean_set_extreme_points(m: usize, mu: usize) -> Vec<RankDistribution> {
    let mut hs: Vec<RankDistribution> = (mu..=m).map(|r| RankDistribution::point_mass(m, r)).collect();
    for i in 0..mu {
        for j in mu + 1..=m {
            let mut h = vec![0.0; m + 1];
            h[i] = (j - mu) as f64 / (j - i) as f64;
            h[j] = (mu - i) as f64 / (j - i) as f64;
            hs.push(RankDistribution::new(h).expect("two-point distribution"));
        }
    }
    hs
}

/// `count` uniform draws (with `h_0 = 0`) whose mean rank is at least `mu`.
pub fn sample_mean_set(m: usize, mu: usize, count: usize, stream: &mut RandomStream) -> Vec<RankDistribution> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h = sample_rank_distribution(m, stream);
        if expected_rank(&h) >= mu as f64 {
            out.push(h);
        }
    }
    out
}

/// Both programs on finite constraint subsets; the LP optima over those
/// subsets (and the coarse `x` grid) bound the true optima from above.
/// Constraints are linear in `h`, so the extreme-point program is the
/// exact one up to the `x` grid.
pub fn universal_rates(m: usize, mu: usize, samples: usize, seed: u64) -> Result<UniversalRates> {
    let eta = 0.01;
    let mut s = RandomStream::derive(seed, domain::SAMPLE, 2);
    let mut hs: Vec<RankDistribution> = (1..=m).map(|r| RankDistribution::point_mass(m, r)).collect();
    hs.extend((0..samples).map(|_| sample_rank_distribution(m, &mut s)));
    let p3 = optimize_p3(&hs, 256, eta, LpSettings::default())?;
    let mut sampled = vec![RankDistribution::point_mass(m, mu)];
    sampled.extend(sample_mean_set(m, mu, samples, &mut s));
    let p2 = optimize_p2(&sampled, 256, eta, LpSettings::default())?;
    let exact = optimize_p2(&mean_set_extreme_points(m, mu), 256, eta, LpSettings::default())?;
    Ok(UniversalRates {
        percentage_all: (1.0 - eta) * p3.lp_value,
        multicast_sampled: (1.0 - eta) * p2.lp_value,
        multicast_extreme: (1.0 - eta) * exact.lp_value,
    })
}

// ------------------------------------------------------ BP vs evolution

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BpRun {
    pub batches: usize,
    pub recovered: usize,
    /// `sup_t |R₀(t)/n − ρ₀(t/K)|` over the recorded steps with
    /// `t ≤ 0.9K`; `NaN` when not measured.
    pub sup_distance: f64,
}

/// Plain BP with one variable decoded per step (random decodable edge),
/// transfer matrices drawn from `h`.
pub fn bp_run(psi: &DegreeDistribution, h: &RankDistribution, q: u32, k: usize, n: usize, seed: u64, rho0: Option<&[f64]>) -> Result<BpRun> {
    let field = Field::with_order(q)?;
    let m = h.m();
    let code = BatchCode::new(field, k, m, seed, psi.clone())?;
    let mut s = RandomStream::derive(seed, domain::CHANNEL, 0);
    let mut d = Decoder::new(field, k, 1, Selection::RandomEdge(seed));
    for id in 0..n as u32 {
        let header = code.header(id);
        let r = h.sample(s.unit());
        let hm = loop {
            let c = FieldMatrix::random(field, m, r, &mut s);
            if c.rank() == r {
                break c;
            }
        };
        if r > 0 && header.degree() > 0 {
            d.add_batch(&header, &hm, &FieldMatrix::zeros(field, 1, r))?;
        }
    }
    d.record_r0();
    d.run_bp();
    let sup_distance = match (rho0, d.r0_trace()) {
        (Some(rho), Some(tr)) => tr.iter().zip(rho).map(|(&r, &p)| (r as f64 / n as f64 - p).abs()).fold(0.0, f64::max),
        _ => f64::NAN,
    };
    Ok(BpRun { batches: n, recovered: d.decoded_count(), sup_distance })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BpStudy {
    pub k: usize,
    pub theta_hat: f64,
    /// Largest `θ` keeping `ρ₀ ≥ 0` on `[0, 1−η]` for the optimized `Ψ`.
    pub theta_crossing: f64,
    pub below: Vec<BpRun>,
    pub above: Vec<BpRun>,
}

/// BP at `θ = 0.95 θ̂` (with the `R₀` trajectory compared to `ρ₀`) and at
/// `θ = 1.05 θ_c`.
pub fn bp_study(h: &RankDistribution, q: u32, eta: f64, k: usize, trials: usize, seed: u64) -> Result<BpStudy> {
    let o = optimize_p1(h, q, eta, LpSettings::default())?;
    let theta_crossing = achievable_theta(&o.psi, h, q, eta, 20_000);
    let eff = effective_dist(h, q);
    let n_below = (k as f64 / (0.95 * o.value)).ceil() as usize;
    let theta = k as f64 / n_below as f64;
    let last = (0.9 * k as f64) as usize;
    let rho0: Vec<f64> = (0..=last)
        .into_par_iter()
        .map(|t| {
            let x = t as f64 / k as f64;
            (1.0 - x) * (omega(x, &eff, &o.psi) + theta * (1.0 - x).ln())
        })
        .collect();
    let below = (0..trials).into_par_iter().map(|i| bp_run(&o.psi, h, q, k, n_below, trial_seed(seed, i), Some(&rho0))).collect::<Result<_>>()?;
    let n_above = (k as f64 / (1.05 * theta_crossing)).floor() as usize;
    let above = (0..trials).into_par_iter().map(|i| bp_run(&o.psi, h, q, k, n_above, trial_seed(seed ^ 0xABCD, i), None)).collect::<Result<_>>()?;
    Ok(BpStudy { k, theta_hat: o.value, theta_crossing, below, above })
}

// ------------------------------------------------- incomplete beta suite

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn exact_choose(n: u64, k: u64) -> i128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// `I_{a,b}(x)` from its binomial-sum form.
fn inc_beta_sum(a: u64, b: u64, x: f64) -> f64 {
    let n = a + b - 1;
    (a..=n).map(|j| exact_choose(n, j) as f64 * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32)).sum()
}

pub fn incomplete_beta_suite() -> Vec<Check> {
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for a in 1..=20u64 {
        for b in 1..=12u64 {
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                worst = worst.max((inc_beta(a, b, x) - inc_beta_sum(a, b, x)).abs());
            }
        }
    }
    out.push(Check { name: "binomial form", ok: worst < 1e-12, detail: format!("max error {worst:.2e}") });

    let mut worst: f64 = 0.0;
    for (a, b) in [(1, 1), (2, 3), (4, 2), (7, 9), (20, 3), (3, 20)] {
        let got = simpson(|x| inc_beta(a, b, x), 4000);
        worst = worst.max((got - b as f64 / (a + b) as f64).abs());
    }
    out.push(Check { name: "integral over [0,1]", ok: worst < 1e-8, detail: format!("max error {worst:.2e}") });

    let mut worst: f64 = 0.0;
    for a in 1..=40u64 {
        for b in 1..=15u64 {
            for i in 0..=40 {
                let x = i as f64 / 40.0;
                let rhs = inc_beta(a, b, x) - x.powi(a as i32) * (1.0 - x).powi(b as i32) / (a as f64 * beta_fn(a, b));
                worst = worst.max((inc_beta(a + 1, b, x) - rhs).abs());
            }
        }
    }
    out.push(Check { name: "step in first parameter", ok: worst < 1e-11, detail: format!("max error {worst:.2e}") });

    let mut bad = 0;
    for a in 1..=40u64 {
        for b in 1..=15u64 {
            let mut prev = 0.0;
            for i in 1..200 {
                let x = i as f64 / 200.0;
                let den = inc_beta(a, b, x);
                if den < 1e-250 {
                    continue;
                }
                let ratio = inc_beta(a + 1, b, x) / den;
                if ratio < prev - 1e-12 {
                    bad += 1;
                }
                prev = ratio;
            }
        }
    }
    out.push(Check { name: "ratio monotone in x", ok: bad == 0, detail: format!("{bad} decreases") });

    let (mut bad, mut tight): (usize, f64) = (0, 0.0);
    for b in 1..=12u64 {
        for eta in [0.01, 0.05, 0.2, 0.5, 0.8] {
            let a_min = (((b - 1) as f64 * (1.0 - eta) / eta) - 1.0).ceil().max(1.0) as u64;
            for a in [a_min, a_min + 1, a_min + 7, a_min + 40] {
                for i in 1..=100 {
                    let x = (1.0 - eta) * i as f64 / 100.0;
                    let den = inc_beta(a, b, x);
                    if den < 1e-250 {
                        continue;
                    }
                    let ratio = inc_beta(a + 1, b, x) / den;
                    if ratio > 1.0 - eta / b as f64 + 1e-12 {
                        bad += 1;
                    }
                    if b == 1 && i == 100 {
                        tight = tight.max((ratio - (1.0 - eta)).abs());
                    }
                }
            }
        }
    }
    out.push(Check { name: "ratio bound", ok: bad == 0 && tight < 1e-13, detail: format!("{bad} violations, b=1 equality error {tight:.2e}") });

    let mut worst: f64 = 0.0;
    for x in [0.1, 0.5, 0.9] {
        for r in [1u64, 2, 5] {
            let s: f64 = (r + 1..=600).map(|d| inc_beta(d - r, r, x) / (d - 1) as f64).sum();
            worst = worst.max((s + (1.0 - x).ln()).abs());
        }
    }
    out.push(Check { name: "truncated log series", ok: worst < 1e-6, detail: format!("max error {worst:.2e}") });

    let mut bad = 0;
    for m in 0..=8u64 {
        for n in 0..=m {
            let exact: i128 = (0..=n).map(|j| if (n - j) % 2 == 0 { 1 } else { -1 } * exact_choose(j + m, n) * exact_choose(n, j)).sum();
            let float: f64 = (0..=n).map(|j| if (n - j) % 2 == 0 { 1.0 } else { -1.0 } * choose(j + m, n) * choose(n, j)).sum();
            if exact != 1 || float != 1.0 {
                bad += 1;
            }
        }
    }
    out.push(Check { name: "alternating binomial sum", ok: bad == 0, detail: format!("{bad} failures") });
    out
}

// ------------------------------------------------ decoder order checks

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderStudy {
    pub instances: usize,
    pub order_mismatches: usize,
    pub payload_errors: usize,
    /// Variables BP decoded that elimination cannot determine.
    pub beyond_elimination: usize,
}

struct SmallInstance {
    field: Field,
    k: usize,
    t: usize,
    inputs: Vec<Vec<u8>>,
    batches: Vec<ReceivedBatch>,
}

fn small_instance(seed: u64) -> Result<SmallInstance> {
    let mut s = RandomStream::new(seed, 0x5EED);
    let field = Field::gf2();
    let k = 2 + s.below(29);
    let m = 1 + s.below(4);
    let t = 3;
    let w: Vec<f64> = (0..k.min(8)).map(|_| s.unit()).collect();
    let code = BatchCode::new(field, k, m, seed, DegreeDistribution::from_weights(w)?)?;
    let inputs: Vec<Vec<u8>> = (0..k).map(|_| (0..t).map(|_| s.element(field)).collect()).collect();
    let mut batches = Vec::new();
    for id in 0..(1 + s.below(k + 4)) as u32 {
        let batch = code.batch(id, &inputs)?;
        let c = s.below(m + 1);
        let h = FieldMatrix::random(field, m, c, &mut s);
        let packets: Vec<Packet> = (0..c)
            .map(|j| {
                let mut p = Packet { batch_id: id, coding_vector: vec![0; m], payload: vec![0; t] };
                for (i, src) in batch.packets.iter().enumerate() {
                    field.axpy(&mut p.coding_vector, h.get(i, j), &src.coding_vector);
                    field.axpy(&mut p.payload, h.get(i, j), &src.payload);
                }
                p
            })
            .collect();
        batches.push(ReceivedBatch::from_packets(&code, t, id, &packets)?);
    }
    Ok(SmallInstance { field, k, t, inputs, batches })
}

/// Variables the stacked linear system determines uniquely.
fn elimination_determined(inst: &SmallInstance) -> Result<Vec<bool>> {
    let k = inst.k;
    let mut rows = Vec::new();
    let mut n = 0;
    for b in &inst.batches {
        let gh = b.header.generator.mul(&b.h)?;
        for col in 0..gh.cols() {
            let mut r = vec![0u8; k];
            for (i, &v) in b.header.contributors.iter().enumerate() {
                r[v as usize] = gh.get(i, col);
            }
            rows.extend(r);
            n += 1;
        }
    }
    let piv = row_reduce(inst.field, &mut rows, n, k, k);
    let mut det = vec![false; k];
    for (p, &c) in piv.iter().enumerate() {
        if rows[p * k..(p + 1) * k].iter().enumerate().all(|(j, &x)| (j == c) == (x != 0)) {
            det[c] = true;
        }
    }
    Ok(det)
}

pub fn order_study(instances: usize, seed: u64) -> Result<OrderStudy> {
    let mut st = OrderStudy { instances, order_mismatches: 0, payload_errors: 0, beyond_elimination: 0 };
    for i in 0..instances {
        let inst = small_instance(trial_seed(seed, i))?;
        let mut sets = Vec::new();
        for sel in [Selection::LowestIndex, Selection::RandomEdge(i as u64)] {
            let mut d = build_decoder(inst.field, inst.k, inst.t, &inst.batches, &[], sel)?;
            d.run_bp();
            for v in 0..inst.k {
                if d.state(v) == VarState::Decoded && d.payload(v) != Some(&inst.inputs[v][..]) {
                    st.payload_errors += 1;
                }
            }
            sets.push((0..inst.k).map(|v| d.state(v) == VarState::Decoded).collect::<Vec<_>>());
        }
        if sets[0] != sets[1] {
            st.order_mismatches += 1;
        }
        let det = elimination_determined(&inst)?;
        st.beyond_elimination += (0..inst.k).filter(|&v| sets[0][v] && !det[v]).count();
    }
    Ok(st)
}

// ---------------------------------------------------- homogenization

/// Minimum `s–t` cut by enumerating every vertex set containing `s`.
pub fn brute_force_min_cut(topo: &NetworkTopology, s: usize, t: usize) -> f64 {
    let n = topo.nodes.len();
    assert!(n <= 20, "enumeration is exponential");
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask & (1 << s) == 0 || mask & (1 << t) != 0 {
            continue;
        }
        let cut: f64 = topo.links.iter().filter(|l| mask & (1 << l.from) != 0 && mask & (1 << l.to) == 0).map(|l| 1.0 - l.eps).sum();
        best = best.min(cut);
    }
    best
}

/// Random DAG over nodes in index order; erasures in tenths.
pub fn random_dag(s: &mut RandomStream) -> Result<NetworkTopology> {
    let n = 4 + s.below(5);
    let mut nodes: Vec<NodeSpec> = (0..n).map(|i| NodeSpec { name: format!("n{i}"), role: Role::Intermediate }).collect();
    nodes[0].role = Role::Source;
    nodes[n - 1].role = Role::Destination;
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if s.bernoulli(0.5) {
                links.push(Link { from: i, to: j, eps: s.below(10) as f64 / 10.0, latency: 0 });
            }
        }
    }
    Ok(NetworkTopology::new(nodes, links)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogenizationStudy {
    /// Parallel links replacing the 0.2 and 0.1 hops with `N = 10`.
    pub example_links: (usize, usize),
    pub example_eps_ok: bool,
    pub dags: usize,
    pub cut_mismatches: usize,
}

pub fn homogenization_study(dags: usize, seed: u64) -> Result<HomogenizationStudy> {
    let line = homogenize(&NetworkTopology::line(&[0.2, 0.1])?, 10)?;
    let example_links = (line.links.iter().filter(|l| l.from == 0).count(), line.links.iter().filter(|l| l.from == 1).count());
    let example_eps_ok = line.links.iter().all(|l| (l.eps - 0.9).abs() < 1e-12);
    let mut s = RandomStream::derive(seed, domain::SAMPLE, 3);
    let mut cut_mismatches = 0;
    for _ in 0..dags {
        let topo = random_dag(&mut s)?;
        let t = topo.nodes.len() - 1;
        let oracle = brute_force_min_cut(&topo, 0, t);
        let g = homogenize(&topo, 10)?;
        let flow = max_flow(&g, 0, t, |l| 1.0 - l.eps).0;
        if (oracle - flow).abs() > 1e-9 {
            cut_mismatches += 1;
        }
    }
    Ok(HomogenizationStudy { example_links, example_eps_ok, dags, cut_mismatches })
}
