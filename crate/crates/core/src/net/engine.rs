//! Slot-synchronous pipeline for one flow of batches.
//!
//! Every node follows the line-network timing: a recoding node emits batch
//! `b` during slots `start + bM .. start + (b+1)M`, and recodes at the first
//! of them from whatever it buffered for that batch, the in-slot arrival
//! included. `start` is the latest arrival of the last packet of batch 0
//! over the node's in-links, so the `(i−1)(M−1)` pipeline delay of a line
//! falls out of the rule.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::codec::Packet;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::net::link::recode;
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NodeKind {
    /// `split`: out-link `k` carries packets `kM .. (k+1)M` of a batch;
    /// otherwise every out-link carries the same packet.
    Source {
        split: bool,
    },
    /// `distinct`: a separate set of `M` recoded packets per out-link.
    /// `per_input`: recode each in-link's packets on their own and add the
    /// results position-wise.
    Recoder {
        distinct: bool,
        per_input: bool,
    },
    Sink,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowNode {
    pub topo: usize,
    pub kind: NodeKind,
    pub ins: Vec<usize>,
    pub outs: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowLink {
    pub from: usize,
    pub to: usize,
    pub eps: f64,
    pub latency: u32,
}

/// Nodes in topological order; batch `b` of the flow has id
/// `b·stride + offset`.
#[derive(Clone, Debug)]
pub(crate) struct Flow {
    pub nodes: Vec<FlowNode>,
    pub links: Vec<FlowLink>,
    pub batches: usize,
    pub stride: u32,
    pub offset: u32,
}

impl Flow {
    pub fn new(nodes: Vec<(usize, NodeKind)>, links: Vec<FlowLink>, batches: usize, stride: u32, offset: u32) -> Self {
        let mut nodes: Vec<FlowNode> = nodes.into_iter().map(|(topo, kind)| FlowNode { topo, kind, ins: Vec::new(), outs: Vec::new() }).collect();
        for (i, l) in links.iter().enumerate() {
            nodes[l.from].outs.push(i);
            nodes[l.to].ins.push(i);
        }
        Flow { nodes, links, batches, stride, offset }
    }

    pub fn id(&self, b: usize) -> u32 {
        b as u32 * self.stride + self.offset
    }
}

pub(crate) struct FlowOutput {
    /// Per sink (flow node index): batch id → `(sending topology node, packet)`.
    pub received: BTreeMap<usize, BTreeMap<u32, Vec<(usize, Packet)>>>,
    /// Largest number of packets held after a slot's transmissions.
    pub max_buffer: Vec<usize>,
}

pub(crate) fn run_flow(
    flow: &Flow,
    field: Field,
    m: usize,
    source: &mut dyn FnMut(u32) -> Result<Vec<Packet>>,
    stream: &mut RandomStream,
) -> Result<FlowOutput> {
    let n = flow.nodes.len();
    let mut start = vec![0u64; n];
    for v in 0..n {
        if let NodeKind::Recoder { .. } = flow.nodes[v].kind {
            let arrival = flow.nodes[v].ins.iter().map(|&l| start[flow.links[l].from] + flow.links[l].latency as u64).max().unwrap_or(0);
            start[v] = arrival + (m as u64 - 1);
        }
    }
    let span = (flow.batches * m) as u64;
    let max_lat = flow.links.iter().map(|l| l.latency as u64).max().unwrap_or(0);
    let horizon = start.iter().max().copied().unwrap_or(0) + span + max_lat + 1;

    let mut pending: Vec<VecDeque<(u64, Packet)>> = vec![VecDeque::new(); flow.links.len()];
    let mut buffer: Vec<Vec<(usize, Packet)>> = vec![Vec::new(); n];
    let mut coded: Vec<Vec<Option<Packet>>> = vec![Vec::new(); n];
    let mut current: Vec<Packet> = Vec::new();
    let mut out = FlowOutput { received: BTreeMap::new(), max_buffer: vec![0; n] };

    for s in 0..horizon {
        for v in 0..n {
            let node = &flow.nodes[v];
            for &l in &node.ins {
                while pending[l].front().is_some_and(|(at, _)| *at <= s) {
                    let (_, p) = pending[l].pop_front().expect("front checked");
                    let from = flow.nodes[flow.links[l].from].topo;
                    if node.kind == NodeKind::Sink {
                        out.received.entry(v).or_default().entry(p.batch_id).or_default().push((from, p));
                    } else {
                        buffer[v].push((l, p));
                    }
                }
            }
            let mut sends: Vec<(usize, Packet)> = Vec::new();
            match node.kind {
                NodeKind::Sink => {}
                NodeKind::Source { split } => {
                    if s < span {
                        let (b, j) = ((s / m as u64) as usize, (s % m as u64) as usize);
                        if j == 0 {
                            current = source(flow.id(b))?;
                            let want = if split { m * node.outs.len() } else { m };
                            if current.len() != want {
                                return Err(Error::InvalidParameter(alloc::format!("source batch has {} packets, expected {want}", current.len())));
                            }
                        }
                        for (k, &l) in node.outs.iter().enumerate() {
                            let idx = if split { k * m + j } else { j };
                            sends.push((l, current[idx].clone()));
                        }
                    }
                }
                NodeKind::Recoder { distinct, per_input } => {
                    if s >= start[v] && s < start[v] + span {
                        let off = s - start[v];
                        let (b, j) = ((off / m as u64) as usize, (off % m as u64) as usize);
                        if j == 0 {
                            let id = flow.id(b);
                            let mine: Vec<(usize, Packet)> = buffer[v].iter().filter(|(_, p)| p.batch_id == id).cloned().collect();
                            // packets of this or earlier batches are consumed or stale
                            buffer[v].retain(|(_, p)| p.batch_id > id);
                            let copies = if distinct { node.outs.len() } else { 1 };
                            coded[v] = if per_input {
                                combine_per_input(field, &node.ins, &mine, m, stream)
                            } else {
                                let pk: Vec<Packet> = mine.into_iter().map(|x| x.1).collect();
                                recode(field, &pk, m * copies, stream).into_iter().map(Some).collect()
                            };
                        }
                        for (k, &l) in node.outs.iter().enumerate() {
                            let idx = if distinct { k * m + j } else { j };
                            if let Some(Some(p)) = coded[v].get(idx) {
                                sends.push((l, p.clone()));
                            }
                        }
                        if j + 1 == m {
                            coded[v].clear();
                        }
                        let copies = if distinct { node.outs.len() } else { 1 };
                        let held = coded[v].len().saturating_sub((j + 1) * copies) + buffer[v].len();
                        out.max_buffer[v] = out.max_buffer[v].max(held);
                    } else {
                        out.max_buffer[v] = out.max_buffer[v].max(buffer[v].len());
                    }
                }
            }
            for (l, p) in sends {
                let link = &flow.links[l];
                if !stream.bernoulli(link.eps) {
                    pending[l].push_back((s + link.latency as u64, p));
                }
            }
        }
    }
    Ok(out)
}

fn combine_per_input(field: Field, ins: &[usize], mine: &[(usize, Packet)], m: usize, stream: &mut RandomStream) -> Vec<Option<Packet>> {
    let mut acc: Vec<Option<Packet>> = vec![None; m];
    for &l in ins {
        let pk: Vec<Packet> = mine.iter().filter(|x| x.0 == l).map(|x| x.1.clone()).collect();
        for (slot, p) in acc.iter_mut().zip(recode(field, &pk, m, stream)) {
            match slot {
                None => *slot = Some(p),
                Some(a) => {
                    field.axpy(&mut a.coding_vector, 1, &p.coding_vector);
                    field.axpy(&mut a.payload, 1, &p.payload);
                }
            }
        }
    }
    acc
}
