//! Finite cubical cell complexes: boxes in Z^d, oriented cells, integer
//! coboundary matrices, restriction and subdivision cochain maps, and
//! integer/real image computations.
//!
//! Cells are stored positively oriented with sorted direction multi-indices;
//! incidence signs follow the standard cubical rule
//! sign = (-1)^(position of the omitted axis). Every consistent convention
//! gives the same complex up to basis signs; d∘d = 0 pins this one down.

pub mod intmat;

use crate::error::{Error, Result};
use crate::linalg;
use intmat::IntMat;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// An axis-aligned box sublattice of Z^d: the product of intervals
/// `[lower_i, lower_i + sides_i]`. Connected and contractible by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    lower: Vec<i64>,
    sides: Vec<u32>,
}

impl LatticeBox {
    pub fn new(lower: Vec<i64>, sides: Vec<u32>) -> Result<Self> {
        if lower.len() != sides.len() {
            return Err(Error::domain("box lower/sides length mismatch"));
        }
        if lower.is_empty() {
            return Err(Error::domain("box dimension must be at least 1"));
        }
        if sides.contains(&0) {
            return Err(Error::domain("box sides must all be >= 1"));
        }
        Ok(LatticeBox { lower, sides })
    }

    /// The cube `[0, side]^d`.
    pub fn cube(d: usize, side: u32) -> Self {
        LatticeBox::new(vec![0; d], vec![side; d]).expect("cube arguments")
    }

    pub fn unit(d: usize) -> Self {
        LatticeBox::cube(d, 1)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn sides(&self) -> &[u32] {
        &self.sides
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                other.lower[i] >= self.lower[i]
                    && other.lower[i] + other.sides[i] as i64
                        <= self.lower[i] + self.sides[i] as i64
            })
    }

    pub fn contains_cell(&self, cell: &Cell) -> bool {
        if cell.base().len() != self.dim() {
            return false;
        }
        (0..self.dim()).all(|i| {
            let v = cell.base()[i];
            let extent = if cell.dirs().contains(&(i as u8)) { 1 } else { 0 };
            v >= self.lower[i] && v + extent <= self.lower[i] + self.sides[i] as i64
        })
    }

    /// The factor-2 subdivision: the same region on the half-spacing lattice,
    /// expressed in integer coordinates by doubling.
    pub fn subdivided(&self) -> LatticeBox {
        LatticeBox {
            lower: self.lower.iter().map(|&l| 2 * l).collect(),
            sides: self.sides.iter().map(|&s| 2 * s).collect(),
        }
    }

    /// Closed-form k-cell count: sum over direction sets α of size k of
    /// ∏_{i∈α} sides_i · ∏_{i∉α} (sides_i + 1).
    pub fn cell_count(&self, k: usize) -> Result<u64> {
        let d = self.dim();
        if k > d {
            return Err(Error::domain(format!("cell dimension {k} exceeds {d}")));
        }
        let mut total = 0u64;
        for alpha in k_subsets(d, k) {
            let mut prod = 1u64;
            for i in 0..d {
                let s = self.sides[i] as u64;
                prod *= if alpha.contains(&(i as u8)) { s } else { s + 1 };
            }
            total += prod;
        }
        Ok(total)
    }
}

/// An oriented k-cell of Z^d: `base` is the vertex of the cell closest to the
/// origin, `dirs` the strictly increasing multi-index of spanned axes
/// (0-based). Basis cells are stored with orientation +1; a -1 orientation
/// denotes the same cell traversed oppositely.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    base: Vec<i64>,
    dirs: Vec<u8>,
    orientation: i8,
}

impl Cell {
    pub fn new(base: Vec<i64>, dirs: Vec<u8>) -> Result<Self> {
        if !dirs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("cell directions must be strictly increasing"));
        }
        if dirs.iter().any(|&a| a as usize >= base.len()) {
            return Err(Error::domain("cell direction out of range"));
        }
        Ok(Cell {
            base,
            dirs,
            orientation: 1,
        })
    }

    pub fn vertex(base: Vec<i64>) -> Self {
        Cell {
            base,
            dirs: vec![],
            orientation: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn base(&self) -> &[i64] {
        &self.base
    }

    pub fn dirs(&self) -> &[u8] {
        &self.dirs
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn with_orientation(mut self, orientation: i8) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::domain("orientation must be +1 or -1"));
        }
        self.orientation = orientation;
        Ok(self)
    }

    /// The reversed-orientation copy of this cell.
    pub fn flipped(&self) -> Cell {
        let mut c = self.clone();
        c.orientation = -c.orientation;
        c
    }

    pub fn translated(&self, t: &[i64]) -> Result<Cell> {
        if t.len() != self.base.len() {
            return Err(Error::domain("translation vector length mismatch"));
        }
        let mut c = self.clone();
        for (b, &ti) in c.base.iter_mut().zip(t) {
            *b += ti;
        }
        Ok(c)
    }

    /// Identity key ignoring orientation (cells are equal iff base and dirs
    /// coincide; orientation only flips signs of evaluations).
    fn key(&self) -> (Vec<i64>, Vec<u8>) {
        (self.base.clone(), self.dirs.clone())
    }
}

/// The ordered cell basis of one degree of a box, with index lookup.
#[derive(Debug, Clone)]
pub struct CellBasis {
    cells: Vec<Cell>,
    index: HashMap<(Vec<i64>, Vec<u8>), usize>,
}

impl CellBasis {
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of a cell regardless of its orientation flag.
    pub fn position(&self, cell: &Cell) -> Option<usize> {
        self.index.get(&cell.key()).copied()
    }
}

pub(crate) fn k_subsets(d: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(d: usize, k: usize, start: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for a in start..d {
            current.push(a as u8);
            rec(d, k, a + 1, current, out);
            current.pop();
        }
    }
    rec(d, k, 0, &mut current, &mut out);
    out
}

/// All k-cells of the box in deterministic lexicographic order by
/// (base_vertex, directions).
pub fn enumerate_cells(bx: &LatticeBox, k: usize) -> Result<CellBasis> {
    let d = bx.dim();
    if k > d {
        return Err(Error::domain(format!(
            "cell dimension {k} out of range for a {d}-dimensional box"
        )));
    }
    let mut cells = Vec::with_capacity(bx.cell_count(k)? as usize);
    for alpha in k_subsets(d, k) {
        // base ranges: spanned axes stop one short of the upper face
        let mut base = bx.lower().to_vec();
        loop {
            cells.push(Cell {
                base: base.clone(),
                dirs: alpha.clone(),
                orientation: 1,
            });
            // odometer over the base vertex
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                let span = if alpha.contains(&(axis as u8)) { 1 } else { 0 };
                let hi = bx.lower()[axis] + bx.sides()[axis] as i64 - span;
                if base[axis] < hi {
                    base[axis] += 1;
                    break;
                }
                base[axis] = bx.lower()[axis];
            }
            if base == bx.lower() {
                break;
            }
        }
    }
    cells.sort();
    let index = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.key(), i))
        .collect();
    Ok(CellBasis { cells, index })
}

/// The signed faces one degree down: for a (k+1)-cell (v, β) the coboundary
/// pairing gives, for each axis β_t, the face (v + e_{β_t}, β∖β_t) with sign
/// (-1)^t and the face (v, β∖β_t) with sign -(-1)^t (t counted from 0).
fn signed_faces(cell: &Cell) -> Vec<(Cell, i128)> {
    let mut faces = Vec::with_capacity(2 * cell.dim());
    for (t, &axis) in cell.dirs().iter().enumerate() {
        let sign: i128 = if t % 2 == 0 { 1 } else { -1 };
        let mut dirs = cell.dirs().to_vec();
        dirs.retain(|&a| a != axis);
        let mut far_base = cell.base().to_vec();
        far_base[axis as usize] += 1;
        faces.push((
            Cell {
                base: far_base,
                dirs: dirs.clone(),
                orientation: 1,
            },
            sign,
        ));
        faces.push((
            Cell {
                base: cell.base().to_vec(),
                dirs,
                orientation: 1,
            },
            -sign,
        ));
    }
    faces
}

/// Matrix of the coboundary d_k : C^k -> C^{k+1} in the `enumerate_cells`
/// bases. Exact integers; entries in {-1, 0, 1}.
pub fn coboundary_matrix(bx: &LatticeBox, k: usize) -> Result<IntMat> {
    let d = bx.dim();
    if k + 1 > d {
        return Err(Error::domain(format!(
            "coboundary degree {k} out of range for dimension {d}"
        )));
    }
    let domain = enumerate_cells(bx, k)?;
    let codomain = enumerate_cells(bx, k + 1)?;
    let mut m = IntMat::zeros(codomain.len(), domain.len());
    for (row, cell) in codomain.cells().iter().enumerate() {
        for (face, sign) in signed_faces(cell) {
            let col = domain
                .position(&face)
                .expect("face of a box cell lies in the box");
            m[(row, col)] += sign;
        }
    }
    Ok(m)
}

/// 0/1 matrix selecting the cells of `sub` from the cells of `sup`;
/// surjective and commuting with coboundaries exactly.
pub fn restriction_matrix(sub: &LatticeBox, sup: &LatticeBox, k: usize) -> Result<IntMat> {
    if !sup.contains_box(sub) {
        return Err(Error::domain("restriction requires nested boxes"));
    }
    let sub_cells = enumerate_cells(sub, k)?;
    let sup_cells = enumerate_cells(sup, k)?;
    let mut m = IntMat::zeros(sub_cells.len(), sup_cells.len());
    for (row, cell) in sub_cells.cells().iter().enumerate() {
        let col = sup_cells
            .position(cell)
            .expect("sub-box cell lies in the super-box");
        m[(row, col)] = 1;
    }
    Ok(m)
}

/// Cochain map of the factor-2 subdivision for k <= 2: a coarse k-cell
/// receives the sum of the values on its 2^k fine sub-cells (for k = 0 this
/// is restriction to the doubled vertex). Rows index coarse cells, columns
/// fine cells of `coarse.subdivided()`.
pub fn subdivision_matrix(coarse: &LatticeBox, k: usize) -> Result<IntMat> {
    if k > 2 {
        return Err(Error::domain(
            "subdivision cochain maps are defined for k <= 2 only",
        ));
    }
    if k > coarse.dim() {
        return Err(Error::domain("cell dimension exceeds box dimension"));
    }
    let fine = coarse.subdivided();
    let coarse_cells = enumerate_cells(coarse, k)?;
    let fine_cells = enumerate_cells(&fine, k)?;
    let mut m = IntMat::zeros(coarse_cells.len(), fine_cells.len());
    for (row, cell) in coarse_cells.cells().iter().enumerate() {
        let doubled: Vec<i64> = cell.base().iter().map(|&v| 2 * v).collect();
        // offsets over {0,1}^dirs
        for mask in 0..(1u32 << k) {
            let mut base = doubled.clone();
            for (bit, &axis) in cell.dirs().iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    base[axis as usize] += 1;
                }
            }
            let col = fine_cells
                .position(&Cell {
                    base,
                    dirs: cell.dirs().to_vec(),
                    orientation: 1,
                })
                .expect("fine sub-cell lies in the subdivided box");
            m[(row, col)] = 1;
        }
    }
    Ok(m)
}

/// Canonical integer basis of the image lattice m·Z^cols, with the
/// saturation invariant asserted: for coboundaries of contractible boxes the
/// integer image equals (real span) ∩ (integer cochains). A failure signals
/// non-contractible input or a bug, not a recoverable condition.
pub fn image_lattice(m: &IntMat) -> Result<IntMat> {
    if !m.is_saturated() {
        return Err(Error::integrity(
            "integer image lattice is not saturated (torsion in the quotient)",
        ));
    }
    Ok(m.lattice_basis())
}

/// The gram-orthogonal projector onto the real column span of `m`:
/// idempotent and gram-self-adjoint. `gram` must be SPD on the codomain.
pub fn real_image_projector(m: &IntMat, gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.rows();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::domain("gram shape must match the codomain"));
    }
    linalg::spd_cholesky(gram, 1e-12, "projector gram")?;
    if m.is_zero() || m.cols() == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let a = m.to_f64();
    let svd = a.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > linalg::RANK_REL_TOL * smax)
        .count();
    let u = svd.u.as_ref().expect("svd with u");
    let ur = u.columns(0, rank).clone_owned();
    // P = U (Uᵀ G U)⁻¹ Uᵀ G projects onto span(U) orthogonally w.r.t. gram.
    let s = ur.transpose() * gram * &ur;
    let s_inv = linalg::spd_inverse(&s, "restricted gram")?;
    Ok(&ur * s_inv * ur.transpose() * gram)
}
