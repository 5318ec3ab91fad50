//! Exact integer matrices: products, column-style Hermite normal form,
//! integer kernels, and lattice saturation tests.
//!
//! Entries are `i128`. The matrices handled here are small incidence-type
//! matrices with entries in {-1, 0, 1}, and unimodular column reduction on
//! them stays many orders of magnitude away from overflow; debug and test
//! builds additionally trap on any overflow.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Dense integer matrix, column-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i128>,
}

/// Column-style Hermite normal form: `h = m · u` with `u` unimodular.
///
/// `h` has its `rank` pivot columns first (pivots positive, entries to the
/// left of each pivot reduced into `[0, pivot)`), followed by zero columns.
pub struct Hnf {
    pub h: IntMat,
    pub u: IntMat,
    pub rank: usize,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    /// Builds from rows of equal length (row-major input for readability).
    pub fn from_rows(rows: &[Vec<i128>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows in integer matrix"));
        }
        let mut m = IntMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[i128] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Exact product. Skips zero entries of `self`, so products with sparse
    /// incidence matrices cost O(nnz · cols of rhs).
    pub fn mul(&self, rhs: &IntMat) -> Result<IntMat> {
        if self.cols != rhs.rows {
            return Err(Error::domain(format!(
                "shape mismatch in integer product: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = IntMat::zeros(self.rows, rhs.cols);
        for k in 0..self.cols {
            let lhs_col = self.column(k);
            for (i, &a) in lhs_col.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Matrix–vector product over i128.
    pub fn mul_vec(&self, v: &[i128]) -> Result<Vec<i128>> {
        if v.len() != self.cols {
            return Err(Error::domain("vector length mismatch"));
        }
        let mut out = vec![0i128; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (i, &a) in self.column(j).iter().enumerate() {
                out[i] += a * x;
            }
        }
        Ok(out)
    }

    /// Matrix–vector product mapping an f64 vector through the integer
    /// entries (used for cochain evaluation).
    pub fn mul_vec_f64(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::domain("vector length mismatch"));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &x) in v.iter().enumerate() {
            for (i, &a) in self.column(j).iter().enumerate() {
                if a != 0 {
                    out[i] += a as f64 * x;
                }
            }
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(a * self.rows + i, b * self.rows + i);
        }
    }

    fn negate_col(&mut self, j: usize) {
        for v in &mut self.data[j * self.rows..(j + 1) * self.rows] {
            *v = -*v;
        }
    }

    /// col_j -= q * col_r
    fn axpy_col(&mut self, j: usize, q: i128, r: usize) {
        if q == 0 {
            return;
        }
        for i in 0..self.rows {
            let v = self.data[r * self.rows + i];
            self.data[j * self.rows + i] -= q * v;
        }
    }

    /// Column Hermite normal form by unimodular column operations.
    pub fn hnf(&self) -> Hnf {
        let mut h = self.clone();
        let mut u = IntMat::identity(self.cols);
        let mut r = 0;
        for i in 0..self.rows {
            if r == self.cols {
                break;
            }
            // Euclidean reduction among columns r.. until row i has a single
            // nonzero entry there; the entry shrinks strictly each pass.
            loop {
                let mut best: Option<usize> = None;
                for j in r..self.cols {
                    if h[(i, j)] != 0 {
                        best = match best {
                            Some(b) if h[(i, b)].abs() <= h[(i, j)].abs() => Some(b),
                            _ => Some(j),
                        };
                    }
                }
                let Some(jmin) = best else { break };
                h.swap_cols(r, jmin);
                u.swap_cols(r, jmin);
                let mut settled = true;
                for j in (r + 1)..self.cols {
                    if h[(i, j)] != 0 {
                        let q = h[(i, j)].div_euclid(h[(i, r)]);
                        h.axpy_col(j, q, r);
                        u.axpy_col(j, q, r);
                        if h[(i, j)] != 0 {
                            settled = false;
                        }
                    }
                }
                if settled {
                    break;
                }
            }
            if h[(i, r)] != 0 {
                if h[(i, r)] < 0 {
                    h.negate_col(r);
                    u.negate_col(r);
                }
                // Canonical form: entries left of the pivot lie in [0, pivot).
                for j in 0..r {
                    let q = h[(i, j)].div_euclid(h[(i, r)]);
                    h.axpy_col(j, q, r);
                    u.axpy_col(j, q, r);
                }
                r += 1;
            }
        }
        Hnf { h, u, rank: r }
    }

    /// Canonical basis of the integer column lattice: the pivot columns of
    /// the column HNF. Unique per lattice, so equality of outputs decides
    /// lattice equality.
    pub fn lattice_basis(&self) -> IntMat {
        let hnf = self.hnf();
        let mut b = IntMat::zeros(self.rows, hnf.rank);
        for j in 0..hnf.rank {
            for i in 0..self.rows {
                b[(i, j)] = hnf.h[(i, j)];
            }
        }
        b
    }

    /// Basis of the integer kernel `{x : self · x = 0}` (the `u` columns
    /// over the zero columns of `h`).
    pub fn kernel(&self) -> IntMat {
        let hnf = self.hnf();
        let n = self.cols - hnf.rank;
        let mut k = IntMat::zeros(self.cols, n);
        for j in 0..n {
            for i in 0..self.cols {
                k[(i, j)] = hnf.u[(i, hnf.rank + j)];
            }
        }
        k
    }

    /// Canonical basis of the saturation of the column lattice: the integer
    /// points of the real column span, computed as the double orthogonal
    /// ker_Z((ker_Z(selfᵀ))ᵀ).
    pub fn saturation(&self) -> IntMat {
        self.transpose().kernel().transpose().kernel().lattice_basis()
    }

    /// Whether the integer column lattice already equals its saturation,
    /// i.e. equals (real span) ∩ Z^rows. Decided by canonical-HNF equality.
    pub fn is_saturated(&self) -> bool {
        self.lattice_basis() == self.saturation()
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = i128;
    fn index(&self, (i, j): (usize, usize)) -> &i128 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i128 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl std::fmt::Debug for IntMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "IntMat {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{:4}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
