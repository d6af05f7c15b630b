//! The inner-code schemes and their destination traces.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::codec::Packet;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matrix::FieldMatrix;
use crate::net::engine::{run_flow, Flow, FlowLink, FlowOutput, NodeKind};
use crate::net::link::{apply_link, expand_batch, recode, unit_batch};
use crate::net::topology::{edge_disjoint_paths, edge_disjoint_trees, homogenize, NetworkTopology, Role};
use crate::rank::{empirical_rank_dist, RankDistribution};
use crate::rng::{derive_key, RandomStream};

const NET_DOMAIN: u64 = 0x4e45_5453_494d_0009;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeTag {
    /// Recoding hop by hop along a line.
    Line,
    /// One outer code per edge-disjoint path.
    UnicastSplit,
    /// One outer code, batches round-robin over the paths.
    UnicastJoint,
    /// Relay recodes and forwards each direction separately.
    TwoWayRelay,
    /// Relay forwards the physical-layer sum of both batches.
    TwoWayRelayPnc,
    /// Edge-disjoint multicast trees.
    TreeMulticast,
    /// Butterfly with joint recoding at `c` (latency absorbed by its buffer).
    Butterfly,
    /// Butterfly carrying two outer codes, one per destination.
    ButterflySplit,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 8] = [
        SchemeTag::Line,
        SchemeTag::UnicastSplit,
        SchemeTag::UnicastJoint,
        SchemeTag::TwoWayRelay,
        SchemeTag::TwoWayRelayPnc,
        SchemeTag::TreeMulticast,
        SchemeTag::Butterfly,
        SchemeTag::ButterflySplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeTag::Line => "line",
            SchemeTag::UnicastSplit => "unicast-split",
            SchemeTag::UnicastJoint => "unicast-joint",
            SchemeTag::TwoWayRelay => "two-way-relay",
            SchemeTag::TwoWayRelayPnc => "two-way-relay-pnc",
            SchemeTag::TreeMulticast => "tree-multicast",
            SchemeTag::Butterfly => "butterfly",
            SchemeTag::ButterflySplit => "butterfly-split",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeTag,
    pub m: usize,
    pub q: u32,
    pub t: usize,
    /// Batches per outer code.
    pub batches: usize,
    pub seed: u64,
    /// Outer batch size when smaller than the inner `m`.
    pub m_tilde: Option<usize>,
    /// Run on the homogenized network with this granularity.
    pub homogenize: Option<u32>,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeTag, m: usize, q: u32, batches: usize, seed: u64) -> Self {
        SchemeConfig { scheme, m, q, t: 0, batches, seed, m_tilde: None, homogenize: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.batches == 0 {
            return Err(Error::InvalidParameter("M and the batch count must be positive".into()));
        }
        if let Some(mt) = self.m_tilde {
            if mt == 0 || mt > self.m {
                return Err(Error::InvalidParameter(format!("M̃ = {mt} must lie in 1..={}", self.m)));
            }
            if !matches!(self.scheme, SchemeTag::Line | SchemeTag::UnicastSplit | SchemeTag::UnicastJoint | SchemeTag::TreeMulticast) {
                return Err(Error::InvalidParameter(format!("M̃ is not supported by {}", self.scheme.name())));
            }
        }
        if self.homogenize.is_some() && !matches!(self.scheme, SchemeTag::UnicastSplit | SchemeTag::UnicastJoint | SchemeTag::TreeMulticast) {
            return Err(Error::InvalidParameter(format!("homogenization is not supported by {}", self.scheme.name())));
        }
        Field::with_order(self.q).map(|_| ())
    }

    /// Number of coding-vector entries in a source batch of one outer code.
    pub fn outer_width(&self) -> usize {
        match self.scheme {
            SchemeTag::Butterfly => 2 * self.m,
            _ => self.m_tilde.unwrap_or(self.m),
        }
    }
}

/// What a destination received for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceBatch {
    pub id: u32,
    pub packets: Vec<Packet>,
    /// Sending node of each packet.
    pub from: Vec<usize>,
    /// Coding vectors as columns.
    pub h: FieldMatrix,
}

/// Everything one destination received of one outer code, every batch of
/// that code listed in id order (unreached batches have no columns).
#[derive(Clone, Debug, PartialEq)]
pub struct DestinationTrace {
    pub node: usize,
    pub group: usize,
    pub width: usize,
    pub batches: Vec<TraceBatch>,
}

impl DestinationTrace {
    pub fn ranks(&self) -> Vec<usize> {
        self.batches.iter().map(|b| b.h.rank()).collect()
    }

    pub fn rank_distribution(&self) -> Result<RankDistribution> {
        empirical_rank_dist(&self.ranks(), self.width)
    }

    pub fn columns(&self) -> usize {
        self.batches.iter().map(|b| b.packets.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SchemeRun {
    pub traces: Vec<DestinationTrace>,
    /// Per topology node, the largest buffer occupancy seen by any one of
    /// its inner-code instances.
    pub max_buffer: Vec<usize>,
    /// Per topology node, the capacity the scheme allows.
    pub buffer_cap: Vec<Option<usize>>,
    /// The topology actually simulated (after homogenization).
    pub topology: NetworkTopology,
    pub field: Field,
}

impl SchemeRun {
    pub fn trace(&self, node: usize, group: usize) -> Option<&DestinationTrace> {
        self.traces.iter().find(|t| t.node == node && t.group == group)
    }
}

/// Produces source batch `id` of outer code `group`; `width` packets with
/// unit coding vectors.
pub type BatchSource<'a> = dyn FnMut(usize, u32, usize) -> Result<Vec<Packet>> + 'a;

/// Runs `cfg.scheme` with rank-only sources (unit coding vectors, `cfg.t`
/// zero payload symbols).
pub fn run_scheme_ranks(topo: &NetworkTopology, cfg: &SchemeConfig) -> Result<SchemeRun> {
    let t = cfg.t;
    run_scheme(topo, cfg, &mut |_, id, w| Ok(unit_batch(id, w, t)))
}

pub fn run_scheme(topo: &NetworkTopology, cfg: &SchemeConfig, source: &mut BatchSource) -> Result<SchemeRun> {
    cfg.validate()?;
    topo.validate()?;
    let field = Field::with_order(cfg.q)?;
    let topo = match cfg.homogenize {
        Some(n) => homogenize(topo, n)?,
        None => topo.clone(),
    };
    let mut stream = RandomStream::new(cfg.seed, derive_key(NET_DOMAIN, cfg.scheme as u64));
    let mut expand = RandomStream::new(cfg.seed, derive_key(NET_DOMAIN, 0x100 + cfg.scheme as u64));
    let m = cfg.m;
    let width = cfg.outer_width();
    let mut run = SchemeRun {
        traces: Vec::new(),
        max_buffer: vec![0; topo.nodes.len()],
        buffer_cap: vec![None; topo.nodes.len()],
        topology: topo.clone(),
        field,
    };

    // source for one outer code, with the M̃ → M expansion when configured
    let mut emit = |group: usize, id: u32, expand_rng: &mut RandomStream| -> Result<Vec<Packet>> {
        let batch = source(group, id, width)?;
        check_batch(&batch, id, width)?;
        Ok(if cfg.m_tilde.is_some() { expand_batch(field, &batch, m, expand_rng) } else { batch })
    };

    match cfg.scheme {
        SchemeTag::Line => {
            let path = line_path(&topo)?;
            let flow = path_flow(&topo, &path, cfg.batches, 1, 0);
            let out = run_flow(&flow, field, m, &mut |id| emit(0, id, &mut expand), &mut stream)?;
            collect(&mut run, &flow, out, 0, width);
            for &l in &path[..path.len() - 1] {
                run.buffer_cap[topo.links[l].to] = Some(m - 1);
            }
        }
        SchemeTag::UnicastSplit | SchemeTag::UnicastJoint => {
            let s = topo.source()?;
            let t = single_destination(&topo)?;
            let paths = edge_disjoint_paths(&topo, s, t);
            if paths.is_empty() {
                return Err(Error::Topology("destination unreachable from the source".into()));
            }
            let joint = cfg.scheme == SchemeTag::UnicastJoint;
            let l_paths = paths.len();
            for (i, path) in paths.iter().enumerate() {
                let (count, stride, offset, group) =
                    if joint { (cfg.batches.saturating_sub(i).div_ceil(l_paths), l_paths as u32, i as u32, 0) } else { (cfg.batches, 1, 0, i) };
                if count == 0 {
                    continue;
                }
                let flow = path_flow(&topo, path, count, stride, offset);
                let mut fs = stream.fork(i as u64);
                let out = run_flow(&flow, field, m, &mut |id| emit(group, id, &mut expand), &mut fs)?;
                collect(&mut run, &flow, out, group, width);
                for &l in &path[..path.len() - 1] {
                    run.buffer_cap[topo.links[l].to] = Some(m - 1);
                }
            }
        }
        SchemeTag::TreeMulticast => {
            let trees = edge_disjoint_trees(&topo)?;
            if trees.is_empty() {
                return Err(Error::Topology("no destination reachable from the source".into()));
            }
            let n_trees = trees.len();
            let dests = topo.with_role(Role::Destination);
            for (i, tree) in trees.iter().enumerate() {
                let count = cfg.batches.saturating_sub(i).div_ceil(n_trees);
                if count == 0 {
                    continue;
                }
                let flow = tree_flow(&topo, &tree.links, count, n_trees as u32, i as u32);
                let mut fs = stream.fork(i as u64);
                let out = run_flow(&flow, field, m, &mut |id| emit(0, id, &mut expand), &mut fs)?;
                collect(&mut run, &flow, out, 0, width);
                for &l in &tree.links {
                    let v = topo.links[l].to;
                    if !topo.out_links(v).is_empty() {
                        run.buffer_cap[v] = Some(m - 1);
                    }
                }
            }
            // destinations no tree reaches still get an (empty) trace
            for d in dests {
                if run.trace(d, 0).is_none() {
                    let mut tr = DestinationTrace { node: d, group: 0, width, batches: Vec::new() };
                    fill_missing(&mut tr, field, cfg.batches);
                    run.traces.push(tr);
                }
            }
        }
        SchemeTag::Butterfly | SchemeTag::ButterflySplit => {
            let b = butterfly_shape(&topo)?;
            let split = cfg.scheme == SchemeTag::ButterflySplit;
            let flow = butterfly_flow(&topo, &b, cfg.batches, split)?;
            let mut known: BTreeMap<(usize, u32), Vec<Packet>> = BTreeMap::new();
            let out = if split {
                run_flow(
                    &flow,
                    field,
                    m,
                    &mut |id| {
                        let a = source(0, id, m)?;
                        let bb = source(1, id, m)?;
                        check_batch(&a, id, m)?;
                        check_batch(&bb, id, m)?;
                        let mut both: Vec<Packet> = a.iter().map(|p| pad(p, 0, 2 * m)).collect();
                        both.extend(bb.iter().map(|p| pad(p, m, 2 * m)));
                        known.insert((0, id), a);
                        known.insert((1, id), bb);
                        Ok(both)
                    },
                    &mut stream,
                )?
            } else {
                run_flow(&flow, field, m, &mut |id| emit(0, id, &mut expand), &mut stream)?
            };
            let lat_gap = {
                let la = topo.links[b.sa].latency + topo.links[b.ac].latency;
                let lb = topo.links[b.sb].latency + topo.links[b.bc].latency;
                la.abs_diff(lb) as usize
            };
            run.buffer_cap[b.c] = Some(2 * m - 2 + 2 * lat_gap);
            run.buffer_cap[b.d] = Some(m - 1);
            if !split {
                collect(&mut run, &flow, out, 0, width);
            } else {
                for (v, &mb) in out.max_buffer.iter().enumerate() {
                    let node = flow.nodes[v].topo;
                    run.max_buffer[node] = run.max_buffer[node].max(mb);
                }
                for (&v, got) in &out.received {
                    let node = flow.nodes[v].topo;
                    let (own, own_parent) = if node == b.t { (0, b.a) } else { (1, b.b) };
                    let other = 1 - own;
                    let mut direct = DestinationTrace { node, group: own, width: m, batches: Vec::new() };
                    let mut mixed = DestinationTrace { node, group: other, width: m, batches: Vec::new() };
                    for (&id, pk) in got {
                        let mut dp = Vec::new();
                        let mut mp = Vec::new();
                        for (from, p) in pk {
                            if *from == own_parent {
                                dp.push((*from, half(p, own * m, m)));
                            } else {
                                // successive cancellation: `own` is decoded first
                                let c = cancel(field, p, own * m, m, &known[&(own, id)])?;
                                mp.push((*from, half(&c, other * m, m)));
                            }
                        }
                        direct.batches.push(trace_batch(field, id, dp, m));
                        mixed.batches.push(trace_batch(field, id, mp, m));
                    }
                    fill_missing(&mut direct, field, cfg.batches);
                    fill_missing(&mut mixed, field, cfg.batches);
                    run.traces.push(direct);
                    run.traces.push(mixed);
                }
                for d in [b.t, b.u] {
                    for g in 0..2 {
                        if run.trace(d, g).is_none() {
                            let mut tr = DestinationTrace { node: d, group: g, width: m, batches: Vec::new() };
                            fill_missing(&mut tr, field, cfg.batches);
                            run.traces.push(tr);
                        }
                    }
                }
            }
        }
        SchemeTag::TwoWayRelay | SchemeTag::TwoWayRelayPnc => {
            let (s, a, t, e_sa, e_at) = relay_shape(&topo)?;
            relay(&mut run, field, cfg, source, &mut stream, (s, a, t), (e_sa, e_at))?;
        }
    }
    for tr in &mut run.traces {
        fill_missing(tr, field, cfg.batches);
    }
    run.traces.sort_by_key(|t| (t.node, t.group));
    Ok(run)
}

fn check_batch(batch: &[Packet], id: u32, width: usize) -> Result<()> {
    if batch.len() != width || batch.iter().any(|p| p.batch_id != id || p.coding_vector.len() != width) {
        return Err(Error::InvalidParameter(format!("source batch {id} must have {width} packets with {width}-entry coding vectors")));
    }
    Ok(())
}

fn pad(p: &Packet, at: usize, width: usize) -> Packet {
    let mut cv = vec![0; width];
    cv[at..at + p.coding_vector.len()].copy_from_slice(&p.coding_vector);
    Packet { batch_id: p.batch_id, coding_vector: cv, payload: p.payload.clone() }
}

fn half(p: &Packet, at: usize, m: usize) -> Packet {
    Packet { batch_id: p.batch_id, coding_vector: p.coding_vector[at..at + m].to_vec(), payload: p.payload.clone() }
}

/// Removes the contribution of a known batch whose coding vectors occupy
/// `at .. at+m` of `p`'s coding vector.
fn cancel(field: Field, p: &Packet, at: usize, m: usize, known: &[Packet]) -> Result<Packet> {
    let mut out = p.clone();
    for j in 0..m {
        let c = p.coding_vector[at + j];
        if c == 0 {
            continue;
        }
        let src = known
            .iter()
            .find(|k| k.coding_vector.iter().enumerate().all(|(i, &x)| x == u8::from(i == j)))
            .ok_or_else(|| Error::InvalidParameter("cancellation needs source packets with unit coding vectors".into()))?;
        field.axpy(&mut out.payload, c, &src.payload);
        out.coding_vector[at + j] = 0;
    }
    Ok(out)
}

fn trace_batch(field: Field, id: u32, pk: Vec<(usize, Packet)>, width: usize) -> TraceBatch {
    let mut h = FieldMatrix::zeros(field, width, pk.len());
    for (j, (_, p)) in pk.iter().enumerate() {
        for (i, &x) in p.coding_vector.iter().enumerate() {
            h.set(i, j, x);
        }
    }
    let (from, packets) = pk.into_iter().unzip();
    TraceBatch { id, packets, from, h }
}

/// Adds empty entries for ids `0..batches` the trace lacks.
fn fill_missing(tr: &mut DestinationTrace, field: Field, batches: usize) {
    let have: alloc::collections::BTreeSet<u32> = tr.batches.iter().map(|b| b.id).collect();
    for id in 0..batches as u32 {
        if !have.contains(&id) {
            tr.batches.push(trace_batch(field, id, Vec::new(), tr.width));
        }
    }
    tr.batches.sort_by_key(|b| b.id);
}

/// Merges a flow's sink output into the per-destination traces.
fn collect(run: &mut SchemeRun, flow: &Flow, out: FlowOutput, group: usize, width: usize) {
    for (v, &mb) in out.max_buffer.iter().enumerate() {
        let node = flow.nodes[v].topo;
        run.max_buffer[node] = run.max_buffer[node].max(mb);
    }
    for v in 0..flow.nodes.len() {
        if flow.nodes[v].kind == NodeKind::Sink {
            let node = flow.nodes[v].topo;
            if run.trace(node, group).is_none() {
                run.traces.push(DestinationTrace { node, group, width, batches: Vec::new() });
            }
        }
    }
    for (v, got) in out.received {
        let node = flow.nodes[v].topo;
        let tr = run.traces.iter_mut().find(|t| t.node == node && t.group == group).expect("sink trace created");
        for (id, pk) in got {
            tr.batches.push(trace_batch(run.field, id, pk, width));
        }
    }
}

fn single_destination(topo: &NetworkTopology) -> Result<usize> {
    match topo.with_role(Role::Destination)[..] {
        [t] => Ok(t),
        _ => Err(Error::Topology("expected exactly one destination".into())),
    }
}

/// Links of a line network from the source to its single destination.
fn line_path(topo: &NetworkTopology) -> Result<Vec<usize>> {
    let s = topo.source()?;
    let t = single_destination(topo)?;
    let mut path = Vec::new();
    let mut v = s;
    while v != t {
        match topo.out_links(v)[..] {
            [l] => {
                path.push(l);
                v = topo.links[l].to;
            }
            _ => return Err(Error::Topology(format!("node {} does not have exactly one outgoing link", topo.nodes[v].name))),
        }
    }
    if path.len() + 1 != topo.nodes.len() || !topo.out_links(t).is_empty() {
        return Err(Error::Topology("not a line network".into()));
    }
    Ok(path)
}

fn flow_link(topo: &NetworkTopology, l: usize, from: usize, to: usize) -> FlowLink {
    FlowLink { from, to, eps: topo.links[l].eps, latency: topo.links[l].latency }
}

fn path_flow(topo: &NetworkTopology, path: &[usize], batches: usize, stride: u32, offset: u32) -> Flow {
    let mut nodes = vec![(topo.links[path[0]].from, NodeKind::Source { split: false })];
    let mut links = Vec::new();
    for (i, &l) in path.iter().enumerate() {
        let kind = if i + 1 == path.len() { NodeKind::Sink } else { NodeKind::Recoder { distinct: false, per_input: false } };
        nodes.push((topo.links[l].to, kind));
        links.push(flow_link(topo, l, i, i + 1));
    }
    Flow::new(nodes, links, batches, stride, offset)
}

/// `links` in breadth-first order from the root.
fn tree_flow(topo: &NetworkTopology, links: &[usize], batches: usize, stride: u32, offset: u32) -> Flow {
    let root = topo.links[links[0]].from;
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    index.insert(root, 0);
    let mut nodes = vec![(root, NodeKind::Source { split: false })];
    let mut flinks = Vec::new();
    for &l in links {
        let to = topo.links[l].to;
        let i = nodes.len();
        index.insert(to, i);
        let leaf = !links.iter().any(|&k| topo.links[k].from == to);
        nodes.push((to, if leaf { NodeKind::Sink } else { NodeKind::Recoder { distinct: false, per_input: false } }));
        flinks.push(flow_link(topo, l, index[&topo.links[l].from], i));
    }
    Flow::new(nodes, flinks, batches, stride, offset)
}

struct ButterflyShape {
    s: usize,
    a: usize,
    b: usize,
    c: usize,
    d: usize,
    t: usize,
    u: usize,
    sa: usize,
    sb: usize,
    ac: usize,
    bc: usize,
    at: usize,
    bu: usize,
    cd: usize,
    dt: usize,
    du: usize,
}

fn butterfly_shape(topo: &NetworkTopology) -> Result<ButterflyShape> {
    let bad = || Error::Topology("not a butterfly network".into());
    let link = |from: usize, to: usize| -> Result<usize> {
        match topo.links.iter().enumerate().filter(|(_, l)| l.from == from && l.to == to).map(|(i, _)| i).collect::<Vec<_>>()[..] {
            [i] => Ok(i),
            _ => Err(bad()),
        }
    };
    let s = topo.source()?;
    let outs = topo.out_links(s);
    if outs.len() != 2 || topo.nodes.len() != 7 || topo.links.len() != 9 {
        return Err(bad());
    }
    let (a, b) = (topo.links[outs[0]].to, topo.links[outs[1]].to);
    let kids = |v: usize| -> Vec<usize> { topo.out_links(v).into_iter().map(|l| topo.links[l].to).collect() };
    let (ka, kb) = (kids(a), kids(b));
    let c = *ka.iter().find(|x| kb.contains(x)).ok_or_else(bad)?;
    let d = match kids(c)[..] {
        [d] => d,
        _ => return Err(bad()),
    };
    let t = *ka.iter().find(|&&x| x != c).ok_or_else(bad)?;
    let u = *kb.iter().find(|&&x| x != c).ok_or_else(bad)?;
    let dests = topo.with_role(Role::Destination);
    if !(dests.contains(&t) && dests.contains(&u)) {
        return Err(bad());
    }
    Ok(ButterflyShape {
        s,
        a,
        b,
        c,
        d,
        t,
        u,
        sa: link(s, a)?,
        sb: link(s, b)?,
        ac: link(a, c)?,
        bc: link(b, c)?,
        at: link(a, t)?,
        bu: link(b, u)?,
        cd: link(c, d)?,
        dt: link(d, t)?,
        du: link(d, u)?,
    })
}

/// Flow nodes `s a b c d t u`. Nodes `a`, `b` send distinct packets on their
/// two out-links (to `c` first). Node `c` recodes jointly, or per input and
/// adds (`split`). Node `d` sends the same packet to both destinations.
fn butterfly_flow(topo: &NetworkTopology, b: &ButterflyShape, batches: usize, split: bool) -> Result<Flow> {
    let relay = NodeKind::Recoder { distinct: true, per_input: false };
    let nodes = vec![
        (b.s, NodeKind::Source { split: true }),
        (b.a, relay),
        (b.b, relay),
        (b.c, NodeKind::Recoder { distinct: false, per_input: split }),
        (b.d, NodeKind::Recoder { distinct: false, per_input: false }),
        (b.t, NodeKind::Sink),
        (b.u, NodeKind::Sink),
    ];
    let links = vec![
        flow_link(topo, b.sa, 0, 1),
        flow_link(topo, b.sb, 0, 2),
        flow_link(topo, b.ac, 1, 3),
        flow_link(topo, b.at, 1, 5),
        flow_link(topo, b.bc, 2, 3),
        flow_link(topo, b.bu, 2, 6),
        flow_link(topo, b.cd, 3, 4),
        flow_link(topo, b.dt, 4, 5),
        flow_link(topo, b.du, 4, 6),
    ];
    Ok(Flow::new(nodes, links, batches, 1, 0))
}

/// `(s, a, t, ε(s,a), ε(a,t))` of a three-node relay network.
fn relay_shape(topo: &NetworkTopology) -> Result<(usize, usize, usize, f64, f64)> {
    let path = line_path(topo)?;
    match path[..] {
        [x, y] => {
            let (lx, ly) = (&topo.links[x], &topo.links[y]);
            Ok((lx.from, lx.to, ly.to, lx.eps, ly.eps))
        }
        _ => Err(Error::Topology("a two-way relay network has exactly three nodes".into())),
    }
}

/// Both relay variants, one round per batch pair. The relay channel is shared,
/// so slot timing does not change what is received; each link `(x,a)` has
/// the same erasure probability in both directions.
fn relay(
    run: &mut SchemeRun,
    field: Field,
    cfg: &SchemeConfig,
    source: &mut BatchSource,
    stream: &mut RandomStream,
    (s, a, t): (usize, usize, usize),
    (e_sa, e_at): (f64, f64),
) -> Result<()> {
    let m = cfg.m;
    let pnc = cfg.scheme == SchemeTag::TwoWayRelayPnc;
    // trace at t holds group 0 (from s), trace at s holds group 1
    let mut at_t = DestinationTrace { node: t, group: 0, width: m, batches: Vec::new() };
    let mut at_s = DestinationTrace { node: s, group: 1, width: m, batches: Vec::new() };
    for id in 0..cfg.batches as u32 {
        let xa = source(0, id, m)?;
        let xb = source(1, id, m)?;
        check_batch(&xa, id, m)?;
        check_batch(&xb, id, m)?;
        // relay output: combined packet with flags (carries A, carries B)
        let mut out: Vec<(Packet, bool, bool)> = Vec::new();
        if pnc {
            let mut heard = Vec::new();
            for j in 0..m {
                let ok_a = !stream.bernoulli(e_sa);
                let ok_b = !stream.bernoulli(e_at);
                let mut p = Packet { batch_id: id, coding_vector: vec![0; 2 * m], payload: vec![0; cfg.t] };
                match (ok_a, ok_b) {
                    (true, true) => {
                        let (alpha, beta) = (stream.nonzero_element(field), stream.nonzero_element(field));
                        add_scaled(field, &mut p, alpha, &pad(&xa[j], 0, 2 * m));
                        add_scaled(field, &mut p, beta, &pad(&xb[j], m, 2 * m));
                    }
                    (true, false) => p = pad(&xa[j], 0, 2 * m),
                    (false, true) => p = pad(&xb[j], m, 2 * m),
                    (false, false) => continue,
                }
                heard.push(p);
            }
            run.max_buffer[a] = run.max_buffer[a].max(heard.len().saturating_sub(1));
            out.extend(recode(field, &heard, m, stream).into_iter().map(|p| (p, true, true)));
        } else {
            let ra = apply_link(xa.clone(), e_sa, stream);
            let rb = apply_link(xb.clone(), e_at, stream);
            run.max_buffer[a] = run.max_buffer[a].max(ra.len().saturating_sub(1)).max(rb.len().saturating_sub(1));
            let ca = recode(field, &ra, m, stream);
            let cb = recode(field, &rb, m, stream);
            for j in 0..m {
                let mut p = Packet { batch_id: id, coding_vector: vec![0; 2 * m], payload: vec![0; cfg.t] };
                let (ha, hb) = (j < ca.len(), j < cb.len());
                if ha {
                    add_scaled(field, &mut p, 1, &pad(&ca[j], 0, 2 * m));
                }
                if hb {
                    add_scaled(field, &mut p, 1, &pad(&cb[j], m, 2 * m));
                }
                if ha || hb {
                    out.push((p, ha, hb));
                }
            }
        }
        let mut to_t = Vec::new();
        let mut to_s = Vec::new();
        for (p, ha, hb) in &out {
            if !stream.bernoulli(e_at) && *ha {
                let c = cancel(field, p, m, m, &xb)?;
                to_t.push((a, half(&c, 0, m)));
            }
            if !stream.bernoulli(e_sa) && *hb {
                let c = cancel(field, p, 0, m, &xa)?;
                to_s.push((a, half(&c, m, m)));
            }
        }
        at_t.batches.push(trace_batch(field, id, to_t, m));
        at_s.batches.push(trace_batch(field, id, to_s, m));
    }
    run.buffer_cap[a] = Some(m - 1);
    run.traces.push(at_t);
    run.traces.push(at_s);
    Ok(())
}

fn add_scaled(field: Field, dst: &mut Packet, c: u8, src: &Packet) {
    field.axpy(&mut dst.coding_vector, c, &src.coding_vector);
    field.axpy(&mut dst.payload, c, &src.payload);
}
