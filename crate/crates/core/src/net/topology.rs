//! Network graphs, max-flow, and the homogenized network.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Source,
    Intermediate,
    Destination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub eps: f64,
    /// Delivery delay in slots.
    pub latency: u32,
}

/// A directed acyclic multigraph; parallel links are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<Link>,
}

impl NetworkTopology {
    pub fn new(nodes: Vec<NodeSpec>, links: Vec<Link>) -> Result<Self> {
        let t = NetworkTopology { nodes, links };
        t.validate()?;
        Ok(t)
    }

    /// `s → v1 → … → t` with one link per entry of `eps`.
    pub fn line(eps: &[f64]) -> Result<Self> {
        let n = eps.len() + 1;
        let nodes = (0..n)
            .map(|i| NodeSpec {
                name: format!("v{i}"),
                role: if i == 0 {
                    Role::Source
                } else if i == n - 1 {
                    Role::Destination
                } else {
                    Role::Intermediate
                },
            })
            .collect();
        let links = eps.iter().enumerate().map(|(i, &e)| Link { from: i, to: i + 1, eps: e, latency: 0 }).collect();
        Self::new(nodes, links)
    }

    /// Nodes `s, a, c, b, d, t, u` with links
    /// `sa sb at ac bc bu cd dt du`, all with erasure `eps`.
    pub fn butterfly(eps: f64) -> Result<Self> {
        let names = [
            ("s", Role::Source),
            ("a", Role::Intermediate),
            ("b", Role::Intermediate),
            ("c", Role::Intermediate),
            ("d", Role::Intermediate),
            ("t", Role::Destination),
            ("u", Role::Destination),
        ];
        let nodes = names.iter().map(|&(n, role)| NodeSpec { name: n.into(), role }).collect();
        let pairs = [(0, 1), (0, 2), (1, 5), (1, 3), (2, 3), (2, 6), (3, 4), (4, 5), (4, 6)];
        let links = pairs.iter().map(|&(from, to)| Link { from, to, eps, latency: 0 }).collect();
        Self::new(nodes, links)
    }

    /// Source, three middle nodes, three destinations; middle node `i`
    /// feeds destinations `i` and `i+1 mod 3`.
    pub fn three_layer(eps: f64) -> Result<Self> {
        let mut nodes = vec![NodeSpec { name: "s".into(), role: Role::Source }];
        for i in 0..3 {
            nodes.push(NodeSpec { name: format!("m{i}"), role: Role::Intermediate });
        }
        for i in 0..3 {
            nodes.push(NodeSpec { name: format!("t{i}"), role: Role::Destination });
        }
        let mut links = Vec::new();
        for i in 0..3 {
            links.push(Link { from: 0, to: 1 + i, eps, latency: 0 });
        }
        for i in 0..3 {
            links.push(Link { from: 1 + i, to: 4 + i, eps, latency: 0 });
            links.push(Link { from: 1 + i, to: 4 + (i + 1) % 3, eps, latency: 0 });
        }
        Self::new(nodes, links)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for l in &self.links {
            if l.from >= n || l.to >= n {
                return Err(Error::Topology(format!("link {}→{} references a missing node", l.from, l.to)));
            }
            if l.from == l.to {
                return Err(Error::Topology(format!("self-loop at node {}", l.from)));
            }
            if !(0.0..=1.0).contains(&l.eps) {
                return Err(Error::Topology(format!("erasure probability {} outside [0,1]", l.eps)));
            }
            if self.nodes[l.to].role == Role::Source {
                return Err(Error::Topology(format!("source node {} has an incoming link", self.nodes[l.to].name)));
            }
        }
        if self.topological_order().is_none() {
            return Err(Error::Topology("network has a cycle".into()));
        }
        Ok(())
    }

    /// Kahn order, ties by node index.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for l in &self.links {
            indeg[l.to] += 1;
        }
        let mut ready: alloc::collections::BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for l in self.links.iter().filter(|l| l.from == v) {
                indeg[l.to] -= 1;
                if indeg[l.to] == 0 {
                    ready.insert(l.to);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].role == role).collect()
    }

    pub fn source(&self) -> Result<usize> {
        match self.with_role(Role::Source)[..] {
            [s] => Ok(s),
            _ => Err(Error::Topology("expected exactly one source".into())),
        }
    }

    pub fn out_links(&self, v: usize) -> Vec<usize> {
        (0..self.links.len()).filter(|&i| self.links[i].from == v).collect()
    }

    pub fn in_links(&self, v: usize) -> Vec<usize> {
        (0..self.links.len()).filter(|&i| self.links[i].to == v).collect()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }
}

/// Edmonds–Karp max-flow from `s` to `t` with per-link capacity `cap`.
/// Returns the flow value and the flow on every link.
pub fn max_flow(topo: &NetworkTopology, s: usize, t: usize, cap: impl Fn(&Link) -> f64) -> (f64, Vec<f64>) {
    let caps: Vec<f64> = topo.links.iter().map(&cap).collect();
    let mut flow = vec![0.0; topo.links.len()];
    let n = topo.nodes.len();
    // residual arcs: (link, forward?)
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (i, l) in topo.links.iter().enumerate() {
        adj[l.from].push((i, true));
        adj[l.to].push((i, false));
    }
    let tol = 1e-12;
    let mut total = 0.0;
    loop {
        let mut prev: Vec<Option<(usize, bool)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &(i, fwd) in &adj[v] {
                let l = &topo.links[i];
                let (w, room) = if fwd { (l.to, caps[i] - flow[i]) } else { (l.from, flow[i]) };
                if !seen[w] && room > tol {
                    seen[w] = true;
                    prev[w] = Some((i, fwd));
                    queue.push_back(w);
                }
            }
        }
        if !seen[t] {
            return (total, flow);
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while let Some((i, fwd)) = prev[v] {
            let l = &topo.links[i];
            push = push.min(if fwd { caps[i] - flow[i] } else { flow[i] });
            v = if fwd { l.from } else { l.to };
        }
        let mut v = t;
        while let Some((i, fwd)) = prev[v] {
            let l = &topo.links[i];
            if fwd {
                flow[i] += push;
                v = l.from;
            } else {
                flow[i] -= push;
                v = l.to;
            }
        }
        total += push;
    }
}

/// Min-cut capacity with link capacity `1 − ε`.
pub fn min_cut(topo: &NetworkTopology, s: usize, t: usize) -> f64 {
    max_flow(topo, s, t, |l| 1.0 - l.eps).0
}

/// A maximum set of edge-disjoint `s → t` paths, each a list of link indices.
pub fn edge_disjoint_paths(topo: &NetworkTopology, s: usize, t: usize) -> Vec<Vec<usize>> {
    let (_, flow) = max_flow(topo, s, t, |_| 1.0);
    let mut used: Vec<bool> = flow.iter().map(|&f| f > 0.5).collect();
    let mut paths = Vec::new();
    loop {
        let mut path = Vec::new();
        let mut v = s;
        while v != t {
            match (0..topo.links.len()).find(|&i| used[i] && topo.links[i].from == v) {
                Some(i) => {
                    used[i] = false;
                    path.push(i);
                    v = topo.links[i].to;
                }
                None => break,
            }
        }
        if v != t || path.is_empty() {
            return paths;
        }
        paths.push(path);
    }
}

/// A multicast tree: `links` in breadth-first order from the source, and the
/// destinations it reaches.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub links: Vec<usize>,
    pub leaves: Vec<usize>,
}

/// Edge-disjoint trees rooted at the source. Each tree leaves the source
/// through a single unused link and is the union of breadth-first shortest
/// paths, over unused links, to every destination reachable that way.
pub fn edge_disjoint_trees(topo: &NetworkTopology) -> Result<Vec<Tree>> {
    let s = topo.source()?;
    let dests = topo.with_role(Role::Destination);
    let n = topo.nodes.len();
    let mut used = vec![false; topo.links.len()];
    let mut trees = Vec::new();
    for first in topo.out_links(s) {
        if used[first] {
            continue;
        }
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let root = topo.links[first].to;
        seen[root] = true;
        parent[root] = Some(first);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for i in topo.out_links(v) {
                let w = topo.links[i].to;
                if !used[i] && !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(i);
                    queue.push_back(w);
                }
            }
        }
        let leaves: Vec<usize> = dests.iter().copied().filter(|&d| seen[d]).collect();
        if leaves.is_empty() {
            continue;
        }
        let mut keep = vec![false; topo.links.len()];
        for &d in &leaves {
            let mut v = d;
            while let Some(i) = parent[v] {
                keep[i] = true;
                v = topo.links[i].from;
            }
        }
        // breadth-first link order so parents precede children
        let mut links = Vec::new();
        let mut frontier = VecDeque::from([first]);
        while let Some(i) = frontier.pop_front() {
            links.push(i);
            used[i] = true;
            for j in topo.out_links(topo.links[i].to) {
                if keep[j] && parent[topo.links[j].to] == Some(j) {
                    frontier.push_back(j);
                }
            }
        }
        trees.push(Tree { links, leaves });
    }
    Ok(trees)
}

/// Replaces every link of erasure `ε` by `(1−ε)·N` parallel links of
/// erasure `1 − 1/N`.
pub fn homogenize(topo: &NetworkTopology, n: u32) -> Result<NetworkTopology> {
    if n == 0 {
        return Err(Error::InvalidParameter("homogenization granularity must be positive".into()));
    }
    let eps = 1.0 - 1.0 / n as f64;
    let mut links = Vec::new();
    for l in &topo.links {
        let x = (1.0 - l.eps) * n as f64;
        let k = libm::round(x);
        if (x - k).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("(1−ε)·N = {x} is not an integer for ε = {}; choose another N", l.eps)));
        }
        for _ in 0..k as usize {
            links.push(Link { from: l.from, to: l.to, eps, latency: l.latency });
        }
    }
    NetworkTopology::new(topo.nodes.clone(), links)
}
