//! Dense matrices over GF(2^m).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::gf::Field;
use crate::rng::RandomStream;

/// Row-major dense matrix over a [`Field`].
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} {}x{}", self.field, self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:02x?}", self.row(r))?;
        }
        Ok(())
    }
}

impl FieldMatrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        FieldMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Build from row-major entries; every entry must be a field element.
    pub fn from_vec(field: Field, rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: (rows, cols), found: (data.len(), 1) });
        }
        if let Some(&bad) = data.iter().find(|&&x| !field.contains(x)) {
            return Err(Error::InvalidElement(bad));
        }
        Ok(FieldMatrix { field, rows, cols, data })
    }

    pub fn from_rows(field: Field, rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: (rows.len(), cols), found: (rows.len(), r.len()) });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(field, rows.len(), cols, data)
    }

    /// Totally random matrix: entries i.i.d. uniform over the field.
    pub fn random(field: Field, rows: usize, cols: usize, stream: &mut RandomStream) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        stream.fill_elements(field, &mut m.data);
        m
    }

    #[inline]
    pub fn field(&self) -> Field {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        debug_assert!(self.field.contains(v));
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Sub-matrix made of the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FieldMatrix { field: self.field, rows: rows.len(), cols: self.cols, data }
    }

    /// Sub-matrix made of the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut m = Self::zeros(self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.data[r * cols.len() + j] = self.get(r, c);
            }
        }
        m
    }

    /// `[self | other]`.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch { expected: (self.rows, other.cols), found: other.shape() });
        }
        let mut m = Self::zeros(self.field, self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            let dst = m.row_mut(r);
            dst[..self.cols].copy_from_slice(self.row(r));
            dst[self.cols..].copy_from_slice(other.row(r));
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[u8]) -> Result<()> {
        if self.rows > 0 && row.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: (1, self.cols), found: (1, row.len()) });
        }
        if self.rows == 0 {
            self.cols = row.len();
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: (self.cols, rhs.cols), found: rhs.shape() });
        }
        let f = self.field;
        let mut out = Self::zeros(f, self.rows, rhs.cols);
        for r in 0..self.rows {
            let (lhs_row, out_row) = (&self.data[r * self.cols..(r + 1) * self.cols], r * rhs.cols);
            for (k, &a) in lhs_row.iter().enumerate() {
                if a != 0 {
                    f.axpy(&mut out.data[out_row..out_row + rhs.cols], a, rhs.row(k));
                }
            }
        }
        Ok(out)
    }

    /// Rank by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut work = self.data.clone();
        row_reduce(self.field, &mut work, self.rows, self.cols, self.cols).len()
    }

    /// Solve `B · self = y` for `B`, where `self` is `d×c` with rank `d` and
    /// `y` is `t×c`. Returns `B` (`t×d`).
    pub fn solve_left(&self, y: &Self) -> Result<Self> {
        let (d, c) = self.shape();
        if y.cols != c {
            return Err(Error::DimensionMismatch { expected: (y.rows, c), found: y.shape() });
        }
        let t = y.rows;
        // Transposed system selfᵀ Bᵀ = yᵀ, augmented: c rows of [selfᵀ | yᵀ].
        let width = d + t;
        let mut aug = vec![0u8; c * width];
        for col in 0..c {
            let row = &mut aug[col * width..(col + 1) * width];
            for i in 0..d {
                row[i] = self.get(i, col);
            }
            for i in 0..t {
                row[d + i] = y.get(i, col);
            }
        }
        let pivots = row_reduce(self.field, &mut aug, c, width, d);
        if pivots.len() < d {
            return Err(Error::RankDeficient { rank: pivots.len(), required: d });
        }
        // rows beyond the pivots are zero on the left part; their right part must vanish too
        if aug[d * width..].iter().any(|&x| x != 0) {
            return Err(Error::Inconsistent);
        }
        let mut b = Self::zeros(self.field, t, d);
        for (k, &pc) in pivots.iter().enumerate() {
            let rhs = &aug[k * width + d..(k + 1) * width];
            for (i, &v) in rhs.iter().enumerate() {
                b.data[i * d + pc] = v;
            }
        }
        Ok(b)
    }
}

/// Reduced row echelon form in place on a `rows×width` row-major buffer,
/// pivoting only within the first `pivot_cols` columns. Pivot rows are moved
/// to the top in order. Returns the pivot column of each pivot row.
pub fn row_reduce(f: Field, a: &mut [u8], rows: usize, width: usize, pivot_cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut top = 0;
    for col in 0..pivot_cols {
        if top == rows {
            break;
        }
        let Some(p) = (top..rows).find(|&r| a[r * width + col] != 0) else {
            continue;
        };
        if p != top {
            for j in 0..width {
                a.swap(p * width + j, top * width + j);
            }
        }
        let inv = f.inv(a[top * width + col]).expect("pivot is nonzero");
        f.scale(&mut a[top * width..(top + 1) * width], inv);
        let (head, tail) = a.split_at_mut(top * width);
        let (pivot_row, rest) = tail.split_at_mut(width);
        for r in 0..rows {
            if r == top {
                continue;
            }
            let row = if r < top {
                &mut head[r * width..(r + 1) * width]
            } else {
                let o = (r - top - 1) * width;
                &mut rest[o..o + width]
            };
            let factor = row[col];
            if factor != 0 {
                f.axpy(row, factor, pivot_row);
            }
        }
        pivots.push(col);
        top += 1;
    }
    pivots
}

/// Free-function form of [`FieldMatrix::rank`].
pub fn mat_rank(a: &FieldMatrix) -> usize {
    a.rank()
}

/// Free-function form of [`FieldMatrix::solve_left`]: `B` with `B·a = y`.
pub fn mat_solve(a: &FieldMatrix, y: &FieldMatrix) -> Result<FieldMatrix> {
    a.solve_left(y)
}
