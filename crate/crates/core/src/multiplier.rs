//! Translation-invariant operators on cochains over Z^d through their
//! Fourier multiplier symbols.
//!
//! A k-cochain on Z^d is identified with a Λ^k-valued function of the site,
//! and translation-invariant operators act frequency-by-frequency as matrices
//! on Λ^k (the symbol). The coboundary's symbol is exterior multiplication by
//! m(ξ) with m_j = e^{iξ_j} − 1, its adjoint is interior multiplication by
//! the conjugate, and the transverse projector on 2-forms is
//! Π(ξ) = Id − d*d/‖m(ξ)‖². Matrix entries of such operators between two
//! lattice cells are torus integrals of the symbol against an oscillatory
//! phase; on a uniform frequency grid the integral becomes exactly the
//! corresponding entry on the periodic lattice of the same size, which is
//! what [`pi_entry`] computes and [`pi_entry_oracle`] re-derives densely.

use crate::complex::{k_subsets, Cell};
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Frequencies with ‖m(ξ)‖² below this are treated as the zero frequency.
const DEGENERATE_TOL: f64 = 1e-20;

/// The ordered basis of the k-th exterior power of R^d: all strictly
/// increasing k-multi-indices in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExteriorBasis {
    d: usize,
    k: usize,
    indices: Vec<Vec<u8>>,
}

impl ExteriorBasis {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if k > d {
            return Err(Error::domain(format!(
                "exterior degree {k} exceeds dimension {d}"
            )));
        }
        Ok(ExteriorBasis {
            d,
            k,
            indices: k_subsets(d, k),
        })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.indices.iter().position(|a| a.as_slice() == alpha)
    }
}

/// A symbol value: the matrix of a translation-invariant operator at one
/// frequency, in exterior-basis coordinates.
#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    xi: Vec<f64>,
    entries: DMatrix<Complex64>,
}

impl SymbolMatrix {
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }
}

/// m(ξ): component j is e^{iξ_j} − 1, so that ‖m(ξ)‖² = 4 Σ_j sin²(ξ_j/2).
pub fn m_vector(xi: &[f64]) -> Vec<Complex64> {
    xi.iter()
        .map(|&x| Complex64::new(x.cos() - 1.0, x.sin()))
        .collect()
}

/// ‖m(ξ)‖², evaluated through the half-angle form (exact at lattice points).
pub fn m_norm2(xi: &[f64]) -> f64 {
    4.0 * xi.iter().map(|&x| (x / 2.0).sin().powi(2)).sum::<f64>()
}

/// Symbol of the degree-k coboundary: exterior multiplication
/// e_α ↦ m(ξ) ∧ e_α, a C(d,k+1) × C(d,k) matrix.
pub fn symbol_d(xi: &[f64], k: usize) -> Result<SymbolMatrix> {
    let d = xi.len();
    if k + 1 > d {
        return Err(Error::domain(format!(
            "coboundary degree {k} out of range for dimension {d}"
        )));
    }
    let src = ExteriorBasis::new(d, k)?;
    let tgt = ExteriorBasis::new(d, k + 1)?;
    let m = m_vector(xi);
    let mut entries = DMatrix::zeros(tgt.dim(), src.dim());
    for (col, alpha) in src.indices().iter().enumerate() {
        for j in 0..d as u8 {
            if alpha.contains(&j) {
                continue;
            }
            let mut gamma: Vec<u8> = alpha.clone();
            gamma.push(j);
            gamma.sort_unstable();
            let sign = if alpha.iter().filter(|&&a| a < j).count() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let row = tgt.position(&gamma).expect("sorted union is a basis index");
            entries[(row, col)] += m[j as usize] * sign;
        }
    }
    Ok(SymbolMatrix {
        xi: xi.to_vec(),
        entries,
    })
}

/// Symbol of the degree-k codifferential: interior multiplication by the
/// conjugate of m(ξ), i.e. the adjoint of [`symbol_d`] at degree k−1.
pub fn symbol_dstar(xi: &[f64], k: usize) -> Result<SymbolMatrix> {
    let d = xi.len();
    if k == 0 || k > d {
        return Err(Error::domain(format!(
            "codifferential degree {k} out of range for dimension {d}"
        )));
    }
    let down = symbol_d(xi, k - 1)?;
    Ok(SymbolMatrix {
        xi: xi.to_vec(),
        entries: down.entries.adjoint(),
    })
}

/// Symbol of the transverse projector on 2-forms,
/// Π(ξ) = Id − d₂* d₂ / ‖m(ξ)‖². At the (measure-zero) degenerate frequency
/// ‖m(ξ)‖² = 0 the identity is returned and the flag is true.
pub fn symbol_projection(xi: &[f64]) -> Result<(SymbolMatrix, bool)> {
    let d = xi.len();
    if d < 2 {
        return Err(Error::domain("projection symbol needs dimension >= 2"));
    }
    let n2 = ExteriorBasis::new(d, 2)?.dim();
    let norm2 = m_norm2(xi);
    if d == 2 {
        // Λ³ = 0, so d₂ = 0 and the projector is the identity everywhere.
        return Ok((
            SymbolMatrix {
                xi: xi.to_vec(),
                entries: DMatrix::identity(n2, n2),
            },
            norm2 < DEGENERATE_TOL,
        ));
    }
    if norm2 < DEGENERATE_TOL {
        return Ok((
            SymbolMatrix {
                xi: xi.to_vec(),
                entries: DMatrix::identity(n2, n2),
            },
            true,
        ));
    }
    let d2 = symbol_d(xi, 2)?;
    let correction = d2.entries.adjoint() * &d2.entries / Complex64::new(norm2, 0.0);
    Ok((
        SymbolMatrix {
            xi: xi.to_vec(),
            entries: DMatrix::identity(n2, n2) - correction,
        },
        false,
    ))
}

/// The nonzero contributions to (d₂* d₂)_{α_p, α_q}(ξ): triples
/// (r_p, r_q, sign) with the entry equal to Σ sign · conj(m_{r_p}) m_{r_q}.
/// Each term comes from a 3-index γ containing both planes; r = γ∖α and the
/// sign is the product of the two shuffle signs.
fn entry_plan(d: usize, alpha_p: &[u8; 2], alpha_q: &[u8; 2]) -> Vec<(usize, usize, f64)> {
    let shuffle = |alpha: &[u8; 2], r: u8| -> f64 {
        if alpha.iter().filter(|&&a| a < r).count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut plan = Vec::new();
    if alpha_p == alpha_q {
        for r in 0..d as u8 {
            if !alpha_p.contains(&r) {
                plan.push((r as usize, r as usize, 1.0));
            }
        }
        return plan;
    }
    let mut union: Vec<u8> = alpha_p.to_vec();
    for &a in alpha_q {
        if !union.contains(&a) {
            union.push(a);
        }
    }
    if union.len() != 3 {
        return plan; // disjoint planes: no common 3-index
    }
    let rp = *union.iter().find(|&&x| !alpha_p.contains(&x)).unwrap();
    let rq = *union.iter().find(|&&x| !alpha_q.contains(&x)).unwrap();
    plan.push((
        rp as usize,
        rq as usize,
        shuffle(alpha_p, rp) * shuffle(alpha_q, rq),
    ));
    plan
}

fn validate_2cell(d: usize, c: &Cell) -> Result<[u8; 2]> {
    if c.base().len() != d {
        return Err(Error::domain(format!(
            "cell lives in dimension {}, expected {d}",
            c.base().len()
        )));
    }
    if c.dirs().len() != 2 {
        return Err(Error::domain("matrix entries are defined for 2-cells"));
    }
    Ok([c.dirs()[0], c.dirs()[1]])
}

/// Core frequency-grid summation shared by [`pi_entry`] and [`axis_profile`].
/// Sums phase(k) · Π_{α_p,α_q}(2πk/n) over all k in {0..n}^d, substituting
/// the identity value at k = 0, organized as: innermost axis summed
/// sequentially, the remaining per-plane rows and the n first-axis planes
/// combined by fixed-shape pairwise trees (bit-reproducible regardless of
/// thread count).
fn grid_sum(
    d: usize,
    w: &[i64],
    alpha_p: [u8; 2],
    alpha_q: [u8; 2],
    n: usize,
) -> Complex64 {
    debug_assert!(d >= 2);
    // ξ = 2πk/n lookup tables: s[k] = sin²(ξ/2), (cos_t, sin_t)[k] = e^{iξ}.
    let s: Vec<f64> = (0..n).map(|k| (PI * k as f64 / n as f64).sin().powi(2)).collect();
    let cos_t: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let sin_t: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
    let w_mod: Vec<usize> = w.iter().map(|&x| x.rem_euclid(n as i64) as usize).collect();
    let diag = alpha_p == alpha_q;
    let plan = entry_plan(d, &alpha_p, &alpha_q);
    let (a0, a1) = (alpha_p[0] as usize, alpha_p[1] as usize);

    let plane_sums: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|k0| {
            let mut k = vec![0usize; d];
            k[0] = k0;
            let rows_len = n.pow(d.saturating_sub(2) as u32);
            let mut rows = Vec::with_capacity(rows_len);
            loop {
                // One row: sweep the innermost axis with the partial sums of
                // the outer axes precomputed.
                let s_part: f64 = k[..d - 1].iter().map(|&kj| s[kj]).sum();
                let t_part: usize = k[..d - 1]
                    .iter()
                    .zip(&w_mod)
                    .map(|(&kj, &wj)| (wj * kj) % n)
                    .sum::<usize>()
                    % n;
                let w_last = w_mod[d - 1];
                let mut row = Complex64::new(0.0, 0.0);
                for kl in 0..n {
                    k[d - 1] = kl;
                    let stot = s_part + s[kl];
                    let t = (t_part + w_last * kl) % n;
                    // kernel reconstruction pairs the symbol with e^{−iξ·w}
                    // (symbols here act on the e^{+iξ·v} eigenfunctions)
                    let phase = Complex64::new(cos_t[t], -sin_t[t]);
                    if stot == 0.0 {
                        // the zero frequency: identity value, unit phase
                        if diag {
                            row += Complex64::new(1.0, 0.0);
                        }
                    } else if diag {
                        // Π diagonal = 1 − F₀ = (s_i + s_j)/Σ s
                        row += phase * ((s[k[a0]] + s[k[a1]]) / stot);
                    } else {
                        let mut dsd = Complex64::new(0.0, 0.0);
                        for &(rp, rq, sign) in &plan {
                            let (a, b) = (k[rp], k[rq]);
                            let mp_conj = Complex64::new(cos_t[a] - 1.0, -sin_t[a]);
                            let mq = Complex64::new(cos_t[b] - 1.0, sin_t[b]);
                            dsd += mp_conj * mq * sign;
                        }
                        row -= phase * dsd / (4.0 * stot);
                    }
                }
                rows.push(row);
                // advance the middle axes 1..d-1 (odometer)
                let mut axis = d - 1;
                loop {
                    if axis == 1 {
                        break;
                    }
                    axis -= 1;
                    if k[axis] + 1 < n {
                        k[axis] += 1;
                        break;
                    }
                    k[axis] = 0;
                }
                if k[1..d - 1].iter().all(|&kj| kj == 0) {
                    break;
                }
            }
            pairwise_sum(&rows)
        })
        .collect();
    pairwise_sum(&plane_sums)
}

/// Entry ⟨δ_p, Π δ_q⟩ of the transverse projector between two 2-cells of
/// Z^d, computed as the uniform frequency-grid sum with `grid_n` points per
/// axis. The sum equals exactly the corresponding entry on the periodic
/// lattice Z_{grid_n}^d, and converges to the infinite-lattice entry as
/// grid_n → ∞.
pub fn pi_entry(d: usize, p: &Cell, q: &Cell, grid_n: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("pi_entry needs dimension >= 2"));
    }
    if grid_n < 4 || !grid_n.is_multiple_of(2) {
        return Err(Error::domain("grid_n must be an even integer >= 4"));
    }
    let alpha_p = validate_2cell(d, p)?;
    let alpha_q = validate_2cell(d, q)?;
    let w: Vec<i64> = q
        .base()
        .iter()
        .zip(p.base())
        .map(|(&vq, &vp)| vq - vp)
        .collect();
    let sign = (p.orientation() * q.orientation()) as f64;
    let total = grid_sum(d, &w, alpha_p, alpha_q, grid_n);
    Ok(sign * total.re / (grid_n as f64).powi(d as i32))
}

/// Profile of the projector symbol along one axis: element t is the sum of
/// Π_{α_p,α_q}(ξ) over all grid frequencies whose `axis` index equals t
/// (identity value substituted at ξ = 0). Separation-n entries along `axis`
/// follow by an O(grid_n) phase contraction, independent of n:
/// pi_entry = Re(Σ_t e^{2πi n t/grid_n} T[t]) / grid_n^d.
pub fn axis_profile(
    d: usize,
    alpha_p: &[u8],
    alpha_q: &[u8],
    axis: usize,
    grid_n: usize,
) -> Result<Vec<Complex64>> {
    if d < 2 {
        return Err(Error::domain("axis_profile needs dimension >= 2"));
    }
    if axis >= d {
        return Err(Error::domain("profile axis out of range"));
    }
    if grid_n < 4 || !grid_n.is_multiple_of(2) {
        return Err(Error::domain("grid_n must be an even integer >= 4"));
    }
    let to_pair = |a: &[u8]| -> Result<[u8; 2]> {
        if a.len() == 2 && a[0] < a[1] && (a[1] as usize) < d {
            Ok([a[0], a[1]])
        } else {
            Err(Error::domain("plane index must be two increasing axes < d"))
        }
    };
    let ap = to_pair(alpha_p)?;
    let aq = to_pair(alpha_q)?;
    let n = grid_n;
    let s: Vec<f64> = (0..n).map(|k| (PI * k as f64 / n as f64).sin().powi(2)).collect();
    let cos_t: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let sin_t: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
    let diag = ap == aq;
    let plan = entry_plan(d, &ap, &aq);
    // Order the axes as [axis, others...]; k[0] is the profiled coordinate.
    let order: Vec<usize> = std::iter::once(axis)
        .chain((0..d).filter(|&j| j != axis))
        .collect();
    let pos_of = |j: usize| order.iter().position(|&o| o == j).unwrap();
    let (a0, a1) = (pos_of(ap[0] as usize), pos_of(ap[1] as usize));

    let profile: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|k_axis| {
            let mut k = vec![0usize; d]; // coordinates in `order`
            k[0] = k_axis;
            let rows_len = n.pow(d.saturating_sub(2) as u32);
            let mut rows = Vec::with_capacity(rows_len);
            loop {
                let s_part: f64 = k[..d - 1].iter().map(|&kj| s[kj]).sum();
                let mut row = Complex64::new(0.0, 0.0);
                for kl in 0..n {
                    k[d - 1] = kl;
                    let stot = s_part + s[kl];
                    if stot == 0.0 {
                        if diag {
                            row += Complex64::new(1.0, 0.0);
                        }
                    } else if diag {
                        row += Complex64::new((s[k[a0]] + s[k[a1]]) / stot, 0.0);
                    } else {
                        let mut dsd = Complex64::new(0.0, 0.0);
                        for &(rp, rq, sign) in &plan {
                            let (a, b) = (k[pos_of(rp)], k[pos_of(rq)]);
                            let mp_conj = Complex64::new(cos_t[a] - 1.0, -sin_t[a]);
                            let mq = Complex64::new(cos_t[b] - 1.0, sin_t[b]);
                            dsd += mp_conj * mq * sign;
                        }
                        row -= dsd / (4.0 * stot);
                    }
                }
                rows.push(row);
                let mut ax = d - 1;
                loop {
                    if ax == 1 {
                        break;
                    }
                    ax -= 1;
                    if k[ax] + 1 < n {
                        k[ax] += 1;
                        break;
                    }
                    k[ax] = 0;
                }
                if k[1..d - 1].iter().all(|&kj| kj == 0) {
                    break;
                }
            }
            pairwise_sum(&rows)
        })
        .collect();
    Ok(profile)
}

/// Contract an axis profile against the separation phase: the projector
/// entry between same-plane cells offset by `sep` units along the profiled
/// axis.
pub fn profile_entry(profile: &[Complex64], sep: i64, d: usize) -> f64 {
    let n = profile.len();
    let terms: Vec<Complex64> = profile
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            let phase = 2.0 * PI * (sep.rem_euclid(n as i64) as f64) * t as f64 / n as f64;
            v * Complex64::new(phase.cos(), -phase.sin())
        })
        .collect();
    pairwise_sum(&terms).re / (n as f64).powi(d as i32)
}

/// Independent dense oracle for [`pi_entry`]: builds the coboundary d₂ of
/// the periodic lattice Z_period^d explicitly, inverts the top Laplacian
/// d₂d₂ᵀ on the complement of its harmonic mode, and reads the projector
/// entry Id − d₂ᵀ(d₂d₂ᵀ)⁺d₂ by direct linear algebra. Supported for d = 2
/// (where the answer is a Kronecker delta) and d = 3 with period ≤ 10.
pub fn pi_entry_oracle(d: usize, p: &Cell, q: &Cell, period: usize) -> Result<f64> {
    if period < 2 {
        return Err(Error::domain("period must be at least 2"));
    }
    let alpha_p = validate_2cell(d, p)?;
    let alpha_q = validate_2cell(d, q)?;
    let sign = (p.orientation() * q.orientation()) as f64;
    let reduce = |c: &Cell| -> Vec<usize> {
        c.base()
            .iter()
            .map(|&v| v.rem_euclid(period as i64) as usize)
            .collect()
    };
    let vp = reduce(p);
    let vq = reduce(q);
    match d {
        2 => Ok(if vp == vq && alpha_p == alpha_q { sign } else { 0.0 }),
        3 => {
            if period > 10 {
                return Err(Error::domain(
                    "dense oracle supports period <= 10 in dimension 3",
                ));
            }
            let n = period;
            let n3 = n * n * n;
            let site = |v: &[usize]| (v[0] * n + v[1]) * n + v[2];
            let planes = ExteriorBasis::new(3, 2)?;
            let plane_idx = |a: &[u8; 2]| planes.position(a).expect("plane in basis");
            // dense d₂: rows are cubes (site), columns are plaquettes
            // (site, plane); (d₂ω)(cube v) = Σ_t (−1)^t [ω(α_t, v+e_t) − ω(α_t, v)]
            // with α_t the plane omitting axis t.
            let mut d2 = DMatrix::<f64>::zeros(n3, 3 * n3);
            let gamma = [0u8, 1, 2];
            for v0 in 0..n {
                for v1 in 0..n {
                    for v2 in 0..n {
                        let v = [v0, v1, v2];
                        let row = site(&v);
                        for (t, &axis) in gamma.iter().enumerate() {
                            let alpha: [u8; 2] = match axis {
                                0 => [1, 2],
                                1 => [0, 2],
                                _ => [0, 1],
                            };
                            let sgn = if t % 2 == 0 { 1.0 } else { -1.0 };
                            let mut shifted = v;
                            shifted[axis as usize] = (shifted[axis as usize] + 1) % n;
                            d2[(row, site(&shifted) * 3 + plane_idx(&alpha))] += sgn;
                            d2[(row, site(&v) * 3 + plane_idx(&alpha))] -= sgn;
                        }
                    }
                }
            }
            let lap = &d2 * d2.transpose();
            let eig = lap.symmetric_eigen();
            let lmax = eig.eigenvalues.max();
            let zero_modes = eig.eigenvalues.iter().filter(|&&l| l <= 1e-9 * lmax).count();
            if zero_modes != 1 {
                return Err(Error::integrity(format!(
                    "periodic top Laplacian has {zero_modes} zero modes, expected 1"
                )));
            }
            let col_p = site(&vp) * 3 + plane_idx(&alpha_p);
            let col_q = site(&vq) * 3 + plane_idx(&alpha_q);
            let up: DVector<f64> = d2.column(col_p).into();
            let uq: DVector<f64> = d2.column(col_q).into();
            // u_pᵀ Δ⁺ u_q through the eigenbasis, skipping the zero mode
            let mut corr = 0.0;
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                if l > 1e-9 * lmax {
                    let basis = eig.eigenvectors.column(i);
                    corr += basis.dot(&up) * basis.dot(&uq) / l;
                }
            }
            let delta = if col_p == col_q { 1.0 } else { 0.0 };
            Ok(sign * (delta - corr))
        }
        _ => Err(Error::domain(
            "dense oracle is implemented for dimensions 2 and 3",
        )),
    }
}
