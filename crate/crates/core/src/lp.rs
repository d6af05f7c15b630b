//! Dense two-phase tableau simplex.
//!
//! Problems are stated as: maximize `c·x` subject to rows `a·x {≤,≥,=} b`
//! and `x ≥ 0`. The tableau is row-major so that the elimination step is a
//! straight `axpy` over contiguous memory.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    /// `lhs − rhs` signed so that a positive value is a violation.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram { objective, constraints: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest constraint violation at `x` (bounds included).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x.iter().map(|v| -v).fold(0.0f64, f64::max);
        self.constraints.iter().map(|c| c.violation(x)).fold(bounds, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
}

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-8;

struct Tableau {
    m: usize,
    width: usize,
    // constraint rows followed by the objective row; last column is the rhs
    a: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    // slack or surplus columns, whose rows may be dropped once nonbinding
    slack: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.a[pr * w + pc];
        for v in &mut self.a[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let elim = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(elim);
        after.chunks_exact_mut(w).for_each(elim);
        self.basis[pr] = pc;
    }

    /// Maximizes the objective row. Returns false when unbounded.
    fn optimize(&mut self, max_iter: usize) -> bool {
        let obj = self.m;
        let ncols = self.width - 1;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let z = self.row(obj);
            // Dantzig pricing, Bland's rule once degeneracy persists
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..ncols {
                if self.blocked[j] {
                    continue;
                }
                if z[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = z[j];
                }
            }
            let Some(pc) = enter else {
                return true;
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let aij = self.a[i * self.width + pc];
                if aij > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / aij;
                    let better = match leave {
                        None => true,
                        Some(l) => ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(pr) = leave else {
                return false;
            };
            degenerate_run = if best_ratio < 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(pr, pc);
        }
        true
    }

    /// Dual simplex: restores primal feasibility while keeping reduced costs
    /// nonnegative. Returns false if the rows are infeasible.
    fn dual_optimize(&mut self, max_iter: usize) -> bool {
        let w = self.width;
        for _ in 0..max_iter {
            let mut leave = None;
            let mut worst = -FEAS_EPS;
            for i in 0..self.m {
                let b = self.rhs(i);
                if b < worst {
                    worst = b;
                    leave = Some(i);
                }
            }
            let Some(pr) = leave else {
                return true;
            };
            let z = &self.a[self.m * w..(self.m + 1) * w];
            let row = &self.a[pr * w..(pr + 1) * w];
            let mut enter = None;
            let mut best = f64::INFINITY;
            for j in 0..w - 1 {
                if self.blocked[j] || row[j] >= -PIVOT_EPS {
                    continue;
                }
                let ratio = z[j].max(0.0) / -row[j];
                if ratio < best {
                    best = ratio;
                    enter = Some(j);
                }
            }
            let Some(pc) = enter else {
                return false;
            };
            self.pivot(pr, pc);
        }
        true
    }

    /// Appends rows `coeffs·x ≤ rhs` (over the first `n` columns), each with
    /// a fresh basic slack, expressed in the current basis.
    fn push_le_rows(&mut self, n: usize, rows: &[(Vec<f64>, f64)]) {
        let (m, w, k) = (self.m, self.width, rows.len());
        let nw = w + k;
        let first_slack = w - 1;
        let mut a = vec![0.0; (m + k + 1) * nw];
        for (from, to) in (0..m).map(|i| (i, i)).chain(core::iter::once((m, m + k))) {
            let src = &self.a[from * w..(from + 1) * w];
            a[to * nw..to * nw + w - 1].copy_from_slice(&src[..w - 1]);
            a[to * nw + nw - 1] = src[w - 1];
        }
        let (head, tail) = a.split_at_mut(m * nw);
        for (r, (coeffs, rhs)) in rows.iter().enumerate() {
            let new = &mut tail[r * nw..(r + 1) * nw];
            let c = coeffs.len().min(n);
            new[..c].copy_from_slice(&coeffs[..c]);
            new[first_slack + r] = 1.0;
            new[nw - 1] = *rhs;
            for i in 0..m {
                let f = new[self.basis[i]];
                if f != 0.0 {
                    for (x, y) in new.iter_mut().zip(&head[i * nw..(i + 1) * nw]) {
                        *x -= f * y;
                    }
                    new[self.basis[i]] = 0.0;
                }
            }
        }
        self.a = a;
        self.width = nw;
        self.m = m + k;
        self.basis.extend(first_slack..first_slack + k);
        self.blocked.extend(core::iter::repeat_n(false, k));
        self.slack.extend(core::iter::repeat_n(true, k));
    }

    /// Removes every row whose basic variable is a slack with positive
    /// value, together with that slack column.
    fn drop_nonbinding(&mut self, eps: f64) {
        let (m, w) = (self.m, self.width);
        let drop_row: Vec<bool> = (0..m).map(|i| self.slack[self.basis[i]] && self.rhs(i) > eps).collect();
        if !drop_row.iter().any(|&d| d) {
            return;
        }
        let mut drop_col = vec![false; w];
        for i in 0..m {
            if drop_row[i] {
                drop_col[self.basis[i]] = true;
            }
        }
        let mut remap = vec![usize::MAX; w];
        let mut nw = 0;
        for j in 0..w {
            if !drop_col[j] {
                remap[j] = nw;
                nw += 1;
            }
        }
        let keep_rows: Vec<usize> = (0..m).filter(|&i| !drop_row[i]).chain(core::iter::once(m)).collect();
        let mut a = Vec::with_capacity(keep_rows.len() * nw);
        for &i in &keep_rows {
            let row = &self.a[i * w..(i + 1) * w];
            a.extend(row.iter().zip(&drop_col).filter(|(_, &d)| !d).map(|(v, _)| *v));
        }
        self.basis = keep_rows[..keep_rows.len() - 1].iter().map(|&i| remap[self.basis[i]]).collect();
        self.blocked = (0..w - 1).filter(|&j| !drop_col[j]).map(|j| self.blocked[j]).collect();
        self.slack = (0..w - 1).filter(|&j| !drop_col[j]).map(|j| self.slack[j]).collect();
        self.a = a;
        self.width = nw;
        self.m = keep_rows.len() - 1;
    }

    fn set_objective(&mut self, c: &[f64]) {
        let w = self.width;
        let obj = self.m;
        let mut z = vec![0.0; w];
        for (j, &cj) in c.iter().enumerate() {
            z[j] = -cj;
        }
        for i in 0..self.m {
            let cb = c.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (zj, aij) in z.iter_mut().zip(self.row(i)) {
                    *zj += cb * aij;
                }
            }
        }
        self.a[obj * w..(obj + 1) * w].copy_from_slice(&z);
    }
}

/// Two-phase simplex. `x ≥ 0` is implicit.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    Simplex::new(lp).1
}

/// A solved tableau that accepts further `≤` rows (warm-started by dual
/// simplex), as used by cutting-plane loops.
pub struct Simplex {
    tableau: Tableau,
    objective: Vec<f64>,
    status: LpStatus,
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> (Self, LpSolution) {
        let (tableau, status) = build_and_solve(lp);
        let s = Simplex { tableau, objective: lp.objective.clone(), status };
        let sol = s.solution();
        (s, sol)
    }

    pub fn status(&self) -> LpStatus {
        self.status
    }

    /// Adds `coeffs·x ≤ rhs` and re-optimizes from the current basis.
    pub fn add_le(&mut self, coeffs: &[f64], rhs: f64) -> LpSolution {
        if self.status == LpStatus::Optimal {
            let n = self.objective.len();
            self.tableau.push_le_rows(n, &[(coeffs.to_vec(), rhs)]);
            let iters = 50 * (self.tableau.m + self.tableau.width);
            if !self.tableau.dual_optimize(iters) {
                self.status = LpStatus::Infeasible;
            } else if !self.tableau.optimize(iters) {
                self.status = LpStatus::Unbounded;
            }
        }
        self.solution()
    }

    /// Forgets constraints that are strictly slack at the current optimum.
    /// The optimum itself is unchanged, but rows added afterwards are solved
    /// against the relaxed program, so a cutting-plane caller must be ready
    /// to re-add a dropped row once it is violated again.
    pub fn drop_nonbinding(&mut self) {
        if self.status == LpStatus::Optimal {
            self.tableau.drop_nonbinding(1e-9);
        }
    }

    /// Adds several rows before re-optimizing.
    pub fn add_le_rows(&mut self, rows: &[(Vec<f64>, f64)]) -> LpSolution {
        if self.status == LpStatus::Optimal {
            let n = self.objective.len();
            self.tableau.push_le_rows(n, rows);
            let iters = 50 * (self.tableau.m + self.tableau.width);
            if !self.tableau.dual_optimize(iters) {
                self.status = LpStatus::Infeasible;
            } else if !self.tableau.optimize(iters) {
                self.status = LpStatus::Unbounded;
            }
        }
        self.solution()
    }

    pub fn solution(&self) -> LpSolution {
        let n = self.objective.len();
        match self.status {
            LpStatus::Infeasible => LpSolution { status: LpStatus::Infeasible, objective: 0.0, x: vec![0.0; n] },
            LpStatus::Unbounded => LpSolution { status: LpStatus::Unbounded, objective: f64::INFINITY, x: vec![0.0; n] },
            LpStatus::Optimal => {
                let t = &self.tableau;
                let mut x = vec![0.0; n];
                for i in 0..t.m {
                    if t.basis[i] < n {
                        x[t.basis[i]] = t.rhs(i).max(0.0);
                    }
                }
                let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                LpSolution { status: LpStatus::Optimal, objective, x }
            }
        }
    }
}

fn build_and_solve(lp: &LinearProgram) -> (Tableau, LpStatus) {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    // orient rows so that rhs ≥ 0
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut coeffs = c.coeffs.clone();
        coeffs.resize(n, 0.0);
        if c.rhs < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            let rel = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            rows.push((coeffs, rel, -c.rhs));
        } else {
            rows.push((coeffs, c.relation, c.rhs));
        }
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art0 = n + n_slack;
    let width = n + n_slack + n_art + 1;
    let mut t = Tableau {
        m,
        width,
        a: vec![0.0; (m + 1) * width],
        basis: vec![0; m],
        blocked: vec![false; width - 1],
        slack: (0..width - 1).map(|j| j >= n && j < art0).collect(),
    };
    let (mut s, mut ar) = (n, art0);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut t.a[i * width..(i + 1) * width];
        row[..n].copy_from_slice(coeffs);
        row[width - 1] = *rhs;
        match rel {
            Relation::Le => {
                row[s] = 1.0;
                t.basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                row[s] = -1.0;
                s += 1;
                row[ar] = 1.0;
                t.basis[i] = ar;
                ar += 1;
            }
            Relation::Eq => {
                row[ar] = 1.0;
                t.basis[i] = ar;
                ar += 1;
            }
        }
    }
    let max_iter = 50 * (m + width);
    if n_art > 0 {
        let mut c1 = vec![0.0; width - 1];
        c1[art0..].iter_mut().for_each(|v| *v = -1.0);
        t.set_objective(&c1);
        t.optimize(max_iter);
        let infeas = -t.rhs(m);
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeas.abs() > FEAS_EPS * scale {
            return (t, LpStatus::Infeasible);
        }
        // push zero-level artificials out of the basis where possible
        for i in 0..m {
            if t.basis[i] >= art0 {
                let row = t.row(i);
                if let Some(j) = (0..art0).find(|&j| row[j].abs() > 1e-9) {
                    t.pivot(i, j);
                }
            }
        }
        for j in art0..width - 1 {
            t.blocked[j] = true;
        }
    }
    let mut c2 = vec![0.0; width - 1];
    c2[..n].copy_from_slice(&lp.objective);
    t.set_objective(&c2);
    if !t.optimize(max_iter) {
        return (t, LpStatus::Unbounded);
    }
    (t, LpStatus::Optimal)
}
