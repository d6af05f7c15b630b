//! BP and inactivation decoding on the residual Tanner graph.
//!
//! Each check node keeps its original combined matrix `G_iH_i` (`d × c`) and
//! received payloads `Y_i` (`T × c`). Decoding a neighbour kills the matching
//! row; payload subtraction is deferred until the check is solved. Values
//! are carried in extended form `[payload (T) | coefficients on the inactive
//! variables]`, so a variable decoded after an inactivation is known as an
//! affine function of the inactive ones until the final elimination.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::codec::batch::BatchHeader;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matrix::{row_reduce, FieldMatrix};
use crate::rng::RandomStream;

/// Which decodable check supplies the next variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Lowest check index (batches keep their arrival order).
    LowestIndex,
    /// A uniformly random decodable check.
    RandomCheck(u64),
    /// A uniformly random edge among decodable checks, i.e. one variable at
    /// a time with checks weighted by residual degree.
    RandomEdge(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    Decoded { var: u32, check: u32 },
    Inactivated { var: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarState {
    Undecoded,
    Decoded,
    Inactive(u32),
}

/// Why the final elimination could not finish.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeFailure {
    pub decoded: usize,
    pub inactive: usize,
    /// Missing rank of the inactive system.
    pub deficit: usize,
}

#[derive(Clone, Debug)]
struct Check {
    contributors: Vec<u32>,
    gh: FieldMatrix,
    y: FieldMatrix,
    alive: Vec<bool>,
    degree: usize,
    rank_cap: usize,
    decodable: bool,
    /// Extended values of the rows alive when the check was solved.
    solution: Option<Vec<Option<Vec<u8>>>>,
}

/// Binary indexed tree of nonnegative integer weights.
#[derive(Clone, Debug, Default)]
struct Fenwick {
    tree: Vec<u64>,
    weight: Vec<u64>,
}

impl Fenwick {
    fn push(&mut self) {
        self.weight.push(0);
        self.tree.push(0);
        let n = self.tree.len();
        // rebuild the new node from the children it covers
        let lsb = n & n.wrapping_neg();
        let mut s = 0;
        let mut j = n - 1;
        while j > n - lsb {
            s += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree[n - 1] = s;
    }

    fn set(&mut self, i: usize, w: u64) {
        let old = self.weight[i];
        self.weight[i] = w;
        let mut j = i + 1;
        while j <= self.tree.len() {
            self.tree[j - 1] = self.tree[j - 1].wrapping_add(w.wrapping_sub(old));
            j += j & j.wrapping_neg();
        }
    }

    fn total(&self) -> u64 {
        let mut j = self.tree.len();
        let mut s = 0;
        while j > 0 {
            s += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Index whose cumulative range contains `u < total`.
    fn find(&self, mut u: u64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= u {
                u -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

#[derive(Clone, Debug)]
pub struct Decoder {
    field: Field,
    k: usize,
    t: usize,
    selection: Selection,
    rng: Option<RandomStream>,
    checks: Vec<Check>,
    var_checks: Vec<Vec<(u32, u32)>>,
    state: Vec<VarState>,
    ext: Vec<Vec<u8>>,
    inactive: Vec<u32>,
    ready: BTreeSet<u32>,
    weights: Fenwick,
    r0: usize,
    decoded: usize,
    events: Vec<Event>,
    r0_trace: Option<Vec<usize>>,
}

impl Decoder {
    /// Decoder for `k` variables with payloads of `t` symbols.
    pub fn new(field: Field, k: usize, t: usize, selection: Selection) -> Self {
        let rng = match selection {
            Selection::LowestIndex => None,
            Selection::RandomCheck(s) | Selection::RandomEdge(s) => Some(RandomStream::new(s, 0x5345_4c45_4354)),
        };
        Decoder {
            field,
            k,
            t,
            selection,
            rng,
            checks: Vec::new(),
            var_checks: vec![Vec::new(); k],
            state: vec![VarState::Undecoded; k],
            ext: vec![Vec::new(); k],
            inactive: Vec::new(),
            ready: BTreeSet::new(),
            weights: Fenwick::default(),
            r0: 0,
            decoded: 0,
            events: Vec::new(),
            r0_trace: None,
        }
    }

    /// Adds the check `Σ_j b_{contributors[j]} gh[j,·] = y`, where `gh` is
    /// `d × c` and `y` is `t × c`. Must be called before decoding starts.
    pub fn add_check(&mut self, contributors: Vec<u32>, gh: FieldMatrix, y: FieldMatrix) -> Result<usize> {
        let d = contributors.len();
        if d == 0 {
            return Err(Error::InvalidParameter("check node without contributors".into()));
        }
        if gh.rows() != d || y.cols() != gh.cols() || y.rows() != self.t {
            return Err(Error::DimensionMismatch { expected: (d, gh.cols()), found: gh.shape() });
        }
        if contributors.iter().any(|&v| v as usize >= self.k) {
            return Err(Error::InvalidParameter("contributor index out of range".into()));
        }
        if !self.events.is_empty() {
            return Err(Error::InvalidParameter("checks must be added before decoding".into()));
        }
        let idx = self.checks.len();
        for (row, &v) in contributors.iter().enumerate() {
            self.var_checks[v as usize].push((idx as u32, row as u32));
        }
        let rank_cap = gh.rank();
        self.checks.push(Check { contributors, gh, y, alive: vec![true; d], degree: d, rank_cap, decodable: false, solution: None });
        self.weights.push();
        self.refresh(idx);
        Ok(idx)
    }

    /// Adds a received batch: `h` holds the coding vectors (`M × c`), `y`
    /// the payloads (`T × c`).
    pub fn add_batch(&mut self, header: &BatchHeader, h: &FieldMatrix, y: &FieldMatrix) -> Result<usize> {
        let gh = header.generator.mul(h)?;
        self.add_check(header.contributors.clone(), gh, y.clone())
    }

    /// Adds zero-valued constraints `Σ coeff·b = 0`, such as precode parities.
    pub fn add_constraints(&mut self, rows: &[Vec<(u32, u8)>]) -> Result<()> {
        for row in rows {
            let contributors: Vec<u32> = row.iter().map(|&(i, _)| i).collect();
            let coeffs: Vec<u8> = row.iter().map(|&(_, a)| a).collect();
            let gh = FieldMatrix::from_vec(self.field, coeffs.len(), 1, coeffs)?;
            self.add_check(contributors, gh, FieldMatrix::zeros(self.field, self.t, 1))?;
        }
        Ok(())
    }

    /// Start recording `R₀` (edges on decodable checks) after every event.
    pub fn record_r0(&mut self) {
        self.r0_trace = Some(vec![self.r0]);
    }

    pub fn num_vars(&self) -> usize {
        self.k
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn decoded_count(&self) -> usize {
        self.decoded
    }

    pub fn inactive_count(&self) -> usize {
        self.inactive.len()
    }

    pub fn state(&self, v: usize) -> VarState {
        self.state[v]
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Current `R₀`.
    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn r0_trace(&self) -> Option<&[usize]> {
        self.r0_trace.as_deref()
    }

    /// Residual degree of check `i`.
    pub fn check_degree(&self, i: usize) -> usize {
        self.checks[i].degree
    }

    /// Number of rows of check `i` still present in its combined matrix.
    pub fn check_rows(&self, i: usize) -> usize {
        self.checks[i].alive.iter().filter(|&&a| a).count()
    }

    pub fn check_contributors(&self, i: usize) -> &[u32] {
        &self.checks[i].contributors
    }

    pub fn is_decodable(&self, i: usize) -> bool {
        self.checks[i].decodable
    }

    /// Payload of a decoded variable, once it no longer depends on inactive
    /// variables.
    pub fn payload(&self, v: usize) -> Option<&[u8]> {
        match self.state[v] {
            VarState::Decoded if self.ext[v][self.t..].iter().all(|&x| x == 0) => Some(&self.ext[v][..self.t]),
            _ => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.decoded == self.k
    }

    fn set_weight(&mut self, i: usize) {
        let c = &self.checks[i];
        let w = match (c.decodable, self.selection) {
            (false, _) => 0,
            (true, Selection::RandomEdge(_)) => c.degree as u64,
            (true, _) => 1,
        };
        if self.rng.is_some() {
            self.weights.set(i, w);
        }
    }

    /// Re-tests decodability of a non-decodable check.
    fn refresh(&mut self, i: usize) {
        let c = &self.checks[i];
        if c.decodable || c.degree == 0 || c.degree > c.rank_cap {
            return;
        }
        let cols = c.gh.cols();
        let mut rows = Vec::with_capacity(c.degree * cols);
        for (r, _) in c.alive.iter().enumerate().filter(|(_, &a)| a) {
            rows.extend_from_slice(c.gh.row(r));
        }
        let rank = row_reduce(self.field, &mut rows, c.degree, cols, cols).len();
        if rank == c.degree {
            let deg = c.degree;
            self.checks[i].decodable = true;
            self.ready.insert(i as u32);
            self.r0 += deg;
            self.set_weight(i);
        }
    }

    /// Removes variable `v` from all of its checks.
    fn substitute(&mut self, v: usize) {
        let links = core::mem::take(&mut self.var_checks[v]);
        for &(ci, row) in &links {
            let ci = ci as usize;
            let c = &mut self.checks[ci];
            debug_assert!(c.alive[row as usize]);
            c.alive[row as usize] = false;
            c.degree -= 1;
            if c.decodable {
                self.r0 -= 1;
                if c.degree == 0 {
                    c.decodable = false;
                    self.ready.remove(&(ci as u32));
                }
                self.set_weight(ci);
            } else {
                self.refresh(ci);
            }
        }
        self.var_checks[v] = links;
    }

    fn width(&self) -> usize {
        self.t + self.inactive.len()
    }

    /// Solves a decodable check against the current extended values.
    fn solve(&mut self, ci: usize) {
        let f = self.field;
        let w = self.width();
        let c = &self.checks[ci];
        let cols = c.gh.cols();
        let alive: Vec<usize> = (0..c.contributors.len()).filter(|&r| c.alive[r]).collect();
        let d = alive.len();
        // transposed system: one row per column of G_iH_i, [alive coefficients | residual]
        let width = d + w;
        let mut aug = vec![0u8; cols * width];
        for col in 0..cols {
            let row = &mut aug[col * width..(col + 1) * width];
            for (j, &r) in alive.iter().enumerate() {
                row[j] = c.gh.get(r, col);
            }
            for i in 0..self.t {
                row[d + i] = c.y.get(i, col);
            }
        }
        for (r, &v) in c.contributors.iter().enumerate() {
            if c.alive[r] {
                continue;
            }
            let e = &self.ext[v as usize];
            for col in 0..cols {
                let g = c.gh.get(r, col);
                if g != 0 {
                    let n = e.len();
                    f.axpy(&mut aug[col * width + d..col * width + d + n], g, e);
                }
            }
        }
        let pivots = row_reduce(f, &mut aug, cols, width, d);
        debug_assert_eq!(pivots.len(), d);
        let mut sol = vec![None; c.contributors.len()];
        for (p, &pc) in pivots.iter().enumerate() {
            sol[alive[pc]] = Some(aug[p * width + d..(p + 1) * width].to_vec());
        }
        self.checks[ci].solution = Some(sol);
    }

    fn pick(&mut self) -> Option<(usize, usize)> {
        let ci = match self.selection {
            Selection::LowestIndex => *self.ready.iter().next()? as usize,
            _ => {
                let total = self.weights.total();
                if total == 0 {
                    return None;
                }
                let u = self.rng.as_mut().expect("random selection").below(total as usize) as u64;
                self.weights.find(u)
            }
        };
        let c = &self.checks[ci];
        let alive: Vec<usize> = (0..c.contributors.len()).filter(|&r| c.alive[r]).collect();
        let row = match self.selection {
            Selection::LowestIndex => alive[0],
            _ => alive[self.rng.as_mut().expect("random selection").below(alive.len())],
        };
        Some((ci, row))
    }

    /// Decodes one variable from a decodable check; `None` at a stall.
    pub fn step(&mut self) -> Option<u32> {
        let (ci, row) = self.pick()?;
        if self.checks[ci].solution.is_none() {
            self.solve(ci);
        }
        let c = &mut self.checks[ci];
        let v = c.contributors[row];
        let value = c.solution.as_mut().and_then(|s| s[row].take()).expect("solved row");
        self.ext[v as usize] = value;
        self.state[v as usize] = VarState::Decoded;
        self.decoded += 1;
        self.events.push(Event::Decoded { var: v, check: ci as u32 });
        self.substitute(v as usize);
        if let Some(tr) = self.r0_trace.as_mut() {
            tr.push(self.r0);
        }
        Some(v)
    }

    /// BP until no check is decodable. Returns the number of variables
    /// decoded by this call.
    pub fn run_bp(&mut self) -> usize {
        let before = self.decoded;
        while self.step().is_some() {}
        self.decoded - before
    }

    /// Marks the undecoded variable with the most edges inactive.
    pub fn inactivate(&mut self) -> Option<u32> {
        let v = (0..self.k)
            .filter(|&v| self.state[v] == VarState::Undecoded)
            .max_by(|&a, &b| self.var_checks[a].len().cmp(&self.var_checks[b].len()).then(b.cmp(&a)))?;
        let j = self.inactive.len();
        self.inactive.push(v as u32);
        let mut e = vec![0u8; self.t + j + 1];
        e[self.t + j] = 1;
        self.ext[v] = e;
        self.state[v] = VarState::Inactive(j as u32);
        self.events.push(Event::Inactivated { var: v as u32 });
        self.substitute(v);
        Some(v as u32)
    }

    /// Solves for the inactive variables from every check equation and
    /// back-substitutes. Requires every variable decoded or inactive.
    pub fn finish(&mut self) -> core::result::Result<(), DecodeFailure> {
        let f = self.field;
        let n_in = self.inactive.len();
        let fail = |deficit| DecodeFailure { decoded: self.decoded, inactive: n_in, deficit };
        if self.state.contains(&VarState::Undecoded) {
            return Err(fail(self.k - self.decoded - n_in));
        }
        if n_in == 0 {
            return Ok(());
        }
        let t = self.t;
        let w = n_in + t;
        let mut aug: Vec<u8> = Vec::new();
        let mut rows = 0;
        let mut acc = vec![0u8; t + n_in];
        for c in &self.checks {
            for col in 0..c.gh.cols() {
                acc.iter_mut().for_each(|x| *x = 0);
                for (r, &v) in c.contributors.iter().enumerate() {
                    let g = c.gh.get(r, col);
                    if g != 0 {
                        let e = &self.ext[v as usize];
                        f.axpy(&mut acc[..e.len()], g, e);
                    }
                }
                if acc[t..].iter().all(|&x| x == 0) {
                    continue;
                }
                // Σ_j a_j z_j = y − p
                let start = aug.len();
                aug.resize(start + w, 0);
                aug[start..start + n_in].copy_from_slice(&acc[t..]);
                for i in 0..t {
                    aug[start + n_in + i] = f.add(c.y.get(i, col), acc[i]);
                }
                rows += 1;
            }
        }
        let pivots = row_reduce(f, &mut aug, rows, w, n_in);
        if pivots.len() < n_in {
            return Err(fail(n_in - pivots.len()));
        }
        let z: Vec<&[u8]> = (0..n_in).map(|p| &aug[p * w + n_in..(p + 1) * w]).collect();
        for v in 0..self.k {
            let e = &self.ext[v];
            let mut p = e[..t].to_vec();
            for (j, &c) in e[t..].iter().enumerate() {
                if c != 0 {
                    f.axpy(&mut p, c, z[j]);
                }
            }
            self.ext[v] = p;
            if let VarState::Inactive(_) = self.state[v] {
                self.state[v] = VarState::Decoded;
                self.decoded += 1;
            }
        }
        Ok(())
    }
}

/// BP to the fixpoint; returns the number of decoded variables.
pub fn bp_decode(decoder: &mut Decoder) -> usize {
    decoder.run_bp();
    decoder.decoded_count()
}

/// BP with inactivations on stalls, then the inactive system. Returns the
/// number of inactivations.
pub fn inactivation_decode(decoder: &mut Decoder) -> core::result::Result<usize, DecodeFailure> {
    loop {
        decoder.run_bp();
        if decoder.decoded_count() + decoder.inactive_count() == decoder.num_vars() {
            break;
        }
        decoder.inactivate();
    }
    decoder.finish()?;
    Ok(decoder.inactive_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenwick_sampling() {
        let mut fw = Fenwick::default();
        for _ in 0..11 {
            fw.push();
        }
        fw.set(3, 2);
        fw.set(7, 5);
        fw.set(10, 1);
        assert_eq!(fw.total(), 8);
        let picks: Vec<usize> = (0..8).map(|u| fw.find(u)).collect();
        assert_eq!(picks, [3, 3, 7, 7, 7, 7, 7, 10]);
        fw.push();
        fw.set(11, 4);
        assert_eq!(fw.find(8), 11);
    }

    #[test]
    fn single_contributor() {
        let f = Field::gf256();
        let mut d = Decoder::new(f, 3, 2, Selection::LowestIndex);
        let gh = FieldMatrix::from_rows(f, &[&[7, 0]]).unwrap();
        let b = [9u8, 200];
        // y = b·gh
        let y = FieldMatrix::from_rows(f, &[&[f.mul(b[0], 7), 0], &[f.mul(b[1], 7), 0]]).unwrap();
        d.add_check(vec![1], gh, y).unwrap();
        assert_eq!(bp_decode(&mut d), 1);
        assert_eq!(d.payload(1).unwrap(), &b);
    }
}
