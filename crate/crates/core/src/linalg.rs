//! Small dense linear-algebra helpers shared across modules: floating-point
//! rank by elimination, SPD guards, deterministic pairwise summation, and
//! operator norms between inner-product spaces.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, Dyn};

/// Relative tolerance used for floating-point rank decisions throughout the
/// crate (relative to the largest entry/pivot encountered).
pub const RANK_REL_TOL: f64 = 1e-10;

/// Rank by right-looking Gaussian elimination with partial (row) pivoting.
/// An entry counts as a pivot while it exceeds `rel_tol` times the largest
/// absolute entry of the input.
pub fn rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let (m, n) = mat.shape();
    if m == 0 || n == 0 {
        return 0;
    }
    let scale = mat.amax();
    if scale == 0.0 {
        return 0;
    }
    let thr = rel_tol * scale;
    let mut a = mat.clone_owned();
    let data = a.as_mut_slice(); // column-major, column j at [j*m..(j+1)*m]
    let mut rank = 0;
    for j in 0..n {
        if rank == m {
            break;
        }
        // partial pivot within column j, rows rank..
        let col_off = j * m;
        let (mut piv_row, mut piv_abs) = (rank, 0.0f64);
        for i in rank..m {
            let v = data[col_off + i].abs();
            if v > piv_abs {
                piv_abs = v;
                piv_row = i;
            }
        }
        if piv_abs <= thr {
            continue;
        }
        if piv_row != rank {
            for l in j..n {
                data.swap(l * m + rank, l * m + piv_row);
            }
        }
        let pivot = data[col_off + rank];
        for l in (j + 1)..n {
            let f = data[l * m + rank] / pivot;
            if f == 0.0 {
                continue;
            }
            for i in (rank + 1)..m {
                data[l * m + i] -= f * data[col_off + i];
            }
            data[l * m + rank] = 0.0;
        }
        rank += 1;
    }
    rank
}

/// Checks symmetry to `sym_tol` and positive definiteness, returning the
/// Cholesky factorization. `what` names the matrix in error messages.
pub fn spd_cholesky(
    mat: &DMatrix<f64>,
    sym_tol: f64,
    what: &str,
) -> Result<Cholesky<f64, Dyn>> {
    if !mat.is_square() {
        return Err(Error::domain(format!("{what}: matrix is not square")));
    }
    let asym = (mat - mat.transpose()).amax();
    if asym > sym_tol {
        return Err(Error::domain(format!(
            "{what}: not symmetric (asymmetry {asym:.3e} > {sym_tol:.1e})"
        )));
    }
    let sym = (mat + mat.transpose()) * 0.5;
    Cholesky::new(sym)
        .ok_or_else(|| Error::domain(format!("{what}: not positive definite")))
}

/// Inverse of an SPD matrix via its Cholesky factorization.
pub fn spd_inverse(mat: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(spd_cholesky(mat, 1e-12, what)?.inverse())
}

/// Deterministic pairwise summation: a fixed balanced reduction tree over the
/// slice, independent of how the values were produced. Used to merge
/// per-partition sums so results do not depend on the worker count.
pub fn pairwise_sum<T>(values: &[T]) -> T
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    match values.len() {
        0 => T::default(),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Operator norm of `m` viewed as a map (source, gram_src) -> (target,
/// gram_tgt): the largest singular value of L_tgtᵀ · m · L_srcᵖ⁻ᵀ where
/// gram = L Lᵀ. Degenerate zero-dimensional domains or codomains give 0.
pub fn op_norm_between(
    m: &DMatrix<f64>,
    gram_src: &DMatrix<f64>,
    gram_tgt: &DMatrix<f64>,
) -> Result<f64> {
    let (rows, cols) = m.shape();
    if gram_src.nrows() != cols || gram_tgt.nrows() != rows {
        return Err(Error::domain("op_norm_between: shape mismatch"));
    }
    if rows == 0 || cols == 0 {
        return Ok(0.0);
    }
    let l_src = spd_cholesky(gram_src, 1e-12, "source gram")?.l();
    let l_tgt = spd_cholesky(gram_tgt, 1e-12, "target gram")?.l();
    // Want A = Lᵀ_tgt · m · L⁻ᵀ_src; get m·L⁻ᵀ_src from L_src · Xᵀ = mᵀ.
    let xt = l_src
        .solve_lower_triangular(&m.transpose())
        .ok_or_else(|| Error::integrity("singular Cholesky factor"))?;
    let a = l_tgt.transpose() * xt.transpose();
    Ok(a.svd(false, false).singular_values.max())
}

/// Moore–Penrose pseudo-inverse via SVD with relative singular-value cutoff.
pub fn pinv(mat: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, n) = mat.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = mat.clone_owned().svd(true, true);
    let smax = svd.singular_values.max();
    let thr = rel_tol * smax;
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut sinv = DMatrix::zeros(vt.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > thr && s > 0.0 {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}
