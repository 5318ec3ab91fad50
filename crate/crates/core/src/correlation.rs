//! Connected two-point functions of plaquette observables on Z^d.
//!
//! The closed form expresses everything through projection-kernel entries:
//! with D_p = ⟨δ_p, Πδ_p⟩, D_q likewise and C = ⟨δ_p, Πδ_q⟩,
//!
//! O_β(p,q) = e^{−4π²β(D_p + D_q)} · (e^{−8π²β C} − 1),
//!
//! so the sign of O is opposite to the sign of the cross term, and the
//! elementary bound |e^{−t} − 1| ≥ |t|/(1+|t|) yields a certified floor for
//! |O| at every separation. Along a lattice axis the cross terms — and with
//! them O — decay like a power n^{−d}, not exponentially; `decay_series`
//! computes the series from a single grid sweep and `fit_power_law`
//! measures the empirical exponent while asserting the floor.

use crate::complex::Cell;
use crate::error::{Error, Result};
use crate::multiplier::{axis_profile, pi_entry, profile_entry};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// |O| values at or below this are treated as underflowed and excluded
/// from log-fits.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// One point of a decay series: the connected correlation at separation `n`
/// lattice units, together with the raw cross term it came from and the
/// certified lower bound on its magnitude.
#[derive(Debug, Clone)]
pub struct CorrelationPoint {
    pub n: u32,
    pub value: f64,
    pub cross_term: f64,
    pub floor: f64,
    pub grid_n: usize,
    pub beta: f64,
}

/// Least-squares power law through a decay series on log-log axes.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub max_log_residual: f64,
    pub n_range: (u32, u32),
}

/// The closed form assembled from kernel entries, written through `exp_m1`
/// so that tiny cross terms keep full relative precision.
pub fn o_from_parts(beta: f64, diag_p: f64, diag_q: f64, cross: f64) -> f64 {
    let w = 4.0 * PI * PI * beta;
    (-w * (diag_p + diag_q)).exp() * (-2.0 * w * cross).exp_m1()
}

/// Certified lower bound for |O| from |e^{−t} − 1| ≥ |t|/(1+|t|) with
/// t = 8π²β·cross and the exact diagonal value 2/d in the prefactor.
pub fn decay_floor(d: usize, beta: f64, cross: f64) -> f64 {
    let t = (8.0 * PI * PI * beta * cross).abs();
    (-8.0 * PI * PI * beta * 2.0 / d as f64).exp() * t / (1.0 + t)
}

/// Connected two-point function of the plaquette observables at cells `p`
/// and `q`, all kernel entries evaluated on the same `grid_n` quadrature.
pub fn two_point(d: usize, beta: f64, p: &Cell, q: &Cell, grid_n: usize) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::domain("beta must be positive"));
    }
    let diag_p = pi_entry(d, p, p, grid_n)?;
    let diag_q = pi_entry(d, q, q, grid_n)?;
    let cross = pi_entry(d, p, q, grid_n)?;
    let value = o_from_parts(beta, diag_p, diag_q, cross);
    if !value.is_finite() {
        return Err(Error::integrity("two-point value is not finite"));
    }
    Ok(value)
}

/// O_β(p, p + n·e_axis) for every n in `n_list`, with p a 2-cell spanning
/// `plane`. A single grid sweep produces the axis profile; each separation
/// is then a discrete Fourier readout, so the cost is independent of the
/// number of points. Separations must satisfy 8·n ≤ grid_n to keep
/// periodization error under control.
pub fn decay_series(
    d: usize,
    beta: f64,
    plane: (u8, u8),
    axis: usize,
    n_list: &[u32],
    grid_n: usize,
) -> Result<Vec<CorrelationPoint>> {
    if beta <= 0.0 {
        return Err(Error::domain("beta must be positive"));
    }
    let (i, j) = plane;
    if i >= j || j as usize >= d {
        return Err(Error::domain(format!(
            "plane ({i},{j}) is not a coordinate plane of dimension {d}"
        )));
    }
    if axis >= d {
        return Err(Error::domain(format!(
            "axis {axis} out of range for dimension {d}"
        )));
    }
    if let Some(&largest) = n_list.iter().max() {
        if 8 * largest as usize > grid_n {
            return Err(Error::precision(
                format!(
                    "separation {largest} needs grid_n >= {}; periodization would \
                     dominate at grid_n = {grid_n}",
                    8 * largest
                ),
                grid_n as f64 / 8.0,
            ));
        }
    }
    let alpha = [i, j];
    let profile = axis_profile(d, &alpha, &alpha, axis, grid_n)?;
    let diag = profile_entry(&profile, 0, d);
    n_list
        .iter()
        .map(|&n| {
            let cross = profile_entry(&profile, n as i64, d);
            let value = o_from_parts(beta, diag, diag, cross);
            if !value.is_finite() {
                return Err(Error::integrity(format!(
                    "correlation value at separation {n} is not finite"
                )));
            }
            Ok(CorrelationPoint {
                n,
                value,
                cross_term: cross,
                floor: decay_floor(d, beta, cross),
                grid_n,
                beta,
            })
        })
        .collect()
}

/// Least-squares line through (ln n, ln |O|). Every input point must sit on
/// or above its certified floor (integrity error otherwise); points with
/// n = 0 or underflowed values are excluded from the fit, and at least 4
/// usable points over at least two distinct separations are required.
pub fn fit_power_law(points: &[CorrelationPoint]) -> Result<DecayFit> {
    for pt in points {
        if pt.value.abs() < pt.floor {
            return Err(Error::integrity(format!(
                "correlation value {:.6e} at n={} fell below its certified floor {:.6e}",
                pt.value, pt.n, pt.floor
            )));
        }
    }
    let usable: Vec<&CorrelationPoint> = points
        .iter()
        .filter(|pt| pt.n >= 1 && pt.value.is_finite() && pt.value.abs() > UNDERFLOW_FLOOR)
        .collect();
    if usable.len() < 4 {
        return Err(Error::domain(format!(
            "power-law fit needs at least 4 usable points, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|pt| (pt.n as f64).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|pt| pt.value.abs().ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::domain(
            "power-law fit needs at least two distinct separations",
        ));
    }
    let exponent = sxy / sxx;
    let log_prefactor = my - exponent * mx;
    let max_log_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (log_prefactor + exponent * x)).abs())
        .fold(0.0f64, f64::max);
    let n_min = usable.iter().map(|pt| pt.n).min().expect("nonempty");
    let n_max = usable.iter().map(|pt| pt.n).max().expect("nonempty");
    Ok(DecayFit {
        exponent,
        log_prefactor,
        max_log_residual,
        n_range: (n_min, n_max),
    })
}

/// Monte Carlo estimate of the connected correlation through the joint law
/// of the two plaquette angles: a wrapped Gaussian on the 2-torus with
/// covariance 2β·[[D_p, C], [C, D_q]] built from the same grid entries as
/// the closed form. Returns (estimate, batch-means standard error). The
/// draw order is fixed, so a seeded generator reproduces results exactly.
pub fn marginal_mc_two_point<R: Rng + ?Sized>(
    d: usize,
    beta: f64,
    p: &Cell,
    q: &Cell,
    grid_n: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if beta <= 0.0 {
        return Err(Error::domain("beta must be positive"));
    }
    const BATCHES: usize = 100;
    if num_samples < 2 * BATCHES {
        return Err(Error::domain(format!(
            "need at least {} samples for batch error estimation",
            2 * BATCHES
        )));
    }
    let diag_p = pi_entry(d, p, p, grid_n)?;
    let diag_q = pi_entry(d, q, q, grid_n)?;
    let cross = pi_entry(d, p, q, grid_n)?;
    let sigma = Matrix2::new(diag_p, cross, cross, diag_q) * (2.0 * beta);
    let eig = sigma.symmetric_eigen();
    let lambda_min = eig.eigenvalues.min();
    if lambda_min < -1e-12 {
        return Err(Error::integrity(format!(
            "marginal covariance is not positive semi-definite (eigenvalue {lambda_min:.3e})"
        )));
    }
    // borderline (rank-deficient) covariances get a hair of regularization
    let bump = if lambda_min < 1e-12 { 1e-12 } else { 0.0 };
    let scale = eig.eigenvalues.map(|l| (l.max(0.0) + bump).sqrt());
    let v = eig.eigenvectors;
    let mut total1 = Complex64::new(0.0, 0.0);
    let mut total2 = Complex64::new(0.0, 0.0);
    let mut total12 = Complex64::new(0.0, 0.0);
    let mut batch_estimates = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let start = b * num_samples / BATCHES;
        let end = (b + 1) * num_samples / BATCHES;
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut s12 = Complex64::new(0.0, 0.0);
        for _ in start..end {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let z_p = v[(0, 0)] * scale[0] * g1 + v[(0, 1)] * scale[1] * g2;
            let z_q = v[(1, 0)] * scale[0] * g1 + v[(1, 1)] * scale[1] * g2;
            let w_p = Complex64::from_polar(1.0, -2.0 * PI * z_p);
            let w_q = Complex64::from_polar(1.0, -2.0 * PI * z_q);
            s1 += w_p;
            s2 += w_q;
            s12 += w_p * w_q;
        }
        let m = (end - start) as f64;
        batch_estimates.push((s12 / m - (s1 / m) * (s2 / m)).re);
        total1 += s1;
        total2 += s2;
        total12 += s12;
    }
    let n = num_samples as f64;
    let estimate = (total12 / n - (total1 / n) * (total2 / n)).re;
    let batch_mean = batch_estimates.iter().sum::<f64>() / BATCHES as f64;
    let batch_var = batch_estimates
        .iter()
        .map(|t| (t - batch_mean).powi(2))
        .sum::<f64>()
        / (BATCHES as f64 - 1.0);
    let stderr = (batch_var / BATCHES as f64).sqrt();
    Ok((estimate, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plaq(base: Vec<i64>, dirs: Vec<u8>) -> Cell {
        Cell::new(base, dirs).unwrap()
    }

    fn synthetic_point(n: u32, value: f64) -> CorrelationPoint {
        CorrelationPoint {
            n,
            value,
            cross_term: 0.0,
            floor: 0.0,
            grid_n: 64,
            beta: 0.1,
        }
    }

    #[test]
    fn synthetic_cubic_decay_fits_exactly() {
        let pts: Vec<CorrelationPoint> = (1..=8)
            .map(|n| synthetic_point(n, (n as f64).powi(-3)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent + 3.0).abs() <= 1e-12, "exponent {}", fit.exponent);
        assert!(fit.log_prefactor.abs() <= 1e-12);
        assert!(fit.max_log_residual <= 1e-12);
        assert_eq!(fit.n_range, (1, 8));
    }

    #[test]
    fn fit_rejects_too_few_points() {
        let pts: Vec<CorrelationPoint> =
            (1..=3).map(|n| synthetic_point(n, 1.0 / n as f64)).collect();
        assert!(matches!(fit_power_law(&pts), Err(Error::Domain(_))));
    }

    #[test]
    fn fit_detects_floor_violation() {
        let mut pts: Vec<CorrelationPoint> = (1..=5)
            .map(|n| synthetic_point(n, (n as f64).powi(-3)))
            .collect();
        pts[2].floor = 1.0;
        assert!(matches!(fit_power_law(&pts), Err(Error::Integrity(_))));
    }

    #[test]
    fn plane_off_diagonal_vanishes() {
        // in dimension 2 the projection is the identity, so distinct cells
        // are uncorrelated
        let p = plaq(vec![0, 0], vec![0, 1]);
        let q = plaq(vec![2, 1], vec![0, 1]);
        let value = two_point(2, 0.3, &p, &q, 16).unwrap();
        assert!(value.abs() <= 1e-12, "value {value}");
        for pt in decay_series(2, 0.3, (0, 1), 0, &[1, 2, 3, 4], 32).unwrap() {
            assert!(pt.value.abs() <= 1e-12, "n={} value {}", pt.n, pt.value);
        }
    }

    #[test]
    fn same_cell_value_matches_closed_form() {
        let beta = 0.1;
        let p = plaq(vec![0, 0, 0], vec![0, 1]);
        let value = two_point(3, beta, &p, &p, 32).unwrap();
        let e = (-16.0 * PI * PI * beta / 3.0).exp();
        assert!(
            (value - e * (e - 1.0)).abs() <= 1e-6,
            "value {value} vs {}",
            e * (e - 1.0)
        );
    }

    #[test]
    fn translation_invariance_of_two_point() {
        let beta = 0.2;
        let p = plaq(vec![0, 0, 0], vec![0, 1]);
        let q = plaq(vec![1, 0, 2], vec![0, 2]);
        let shift = [3i64, -2, 5];
        let pt = plaq(
            p.base().iter().zip(&shift).map(|(a, b)| a + b).collect(),
            p.dirs().to_vec(),
        );
        let qt = plaq(
            q.base().iter().zip(&shift).map(|(a, b)| a + b).collect(),
            q.dirs().to_vec(),
        );
        let a = two_point(3, beta, &p, &q, 8).unwrap();
        let b = two_point(3, beta, &pt, &qt, 8).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn series_consistency_sign_law_and_floor() {
        let beta = 0.1;
        let pts = decay_series(3, beta, (0, 1), 0, &[0, 2, 4, 8], 64).unwrap();
        let p = plaq(vec![0, 0, 0], vec![0, 1]);
        let direct = two_point(3, beta, &p, &p, 64).unwrap();
        assert!((pts[0].value - direct).abs() <= 1e-12);
        for pt in &pts {
            assert!(pt.value.abs() >= pt.floor, "floor violated at n={}", pt.n);
            if pt.cross_term != 0.0 {
                assert!(
                    pt.value.signum() == -pt.cross_term.signum(),
                    "sign law broken at n={}",
                    pt.n
                );
            }
        }
        assert!(
            pts[3].value.abs() < pts[1].value.abs(),
            "no decay: |O(8)| = {} vs |O(2)| = {}",
            pts[3].value.abs(),
            pts[1].value.abs()
        );
    }

    #[test]
    fn grid_refinement_is_under_control() {
        let beta = 0.1;
        let ns = [2u32, 4, 8];
        let coarse = decay_series(3, beta, (0, 1), 0, &ns, 64).unwrap();
        let fine = decay_series(3, beta, (0, 1), 0, &ns, 128).unwrap();
        let anchor = fine.last().unwrap().value.abs();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(
                (c.value - f.value).abs() < 0.1 * anchor,
                "n={}: {} vs {}",
                c.n,
                c.value,
                f.value
            );
        }
    }

    #[test]
    fn doubling_separation_scales_like_inverse_cube() {
        let beta = 0.1;
        let pts = decay_series(3, beta, (0, 1), 0, &[16, 32], 256).unwrap();
        let ratio = pts[1].value.abs() / pts[0].value.abs();
        assert!(
            (ratio - 0.125).abs() <= 0.25 * 0.125,
            "|O(32)|/|O(16)| = {ratio}, expected near 2^-3"
        );
    }

    #[test]
    fn undersized_grid_is_a_precision_error() {
        match decay_series(3, 0.1, (0, 1), 0, &[16], 64) {
            Err(Error::Precision { bound, .. }) => assert_eq!(bound, 8.0),
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_plane_or_axis_is_a_domain_error() {
        assert!(matches!(
            decay_series(3, 0.1, (1, 1), 0, &[1], 32),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            decay_series(3, 0.1, (0, 1), 3, &[1], 32),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn marginal_mc_agrees_with_closed_form() {
        let beta = 0.1;
        let p = plaq(vec![0, 0, 0], vec![0, 1]);
        let q = plaq(vec![1, 0, 0], vec![0, 1]);
        let exact = two_point(3, beta, &p, &q, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (est, stderr) = marginal_mc_two_point(3, beta, &p, &q, 16, 30_000, &mut rng).unwrap();
        assert!(stderr > 0.0 && stderr < 0.05);
        assert!(
            (est - exact).abs() <= 3.0 * stderr,
            "estimate {est} vs exact {exact} (stderr {stderr})"
        );
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let again = marginal_mc_two_point(3, beta, &p, &q, 16, 30_000, &mut rng2).unwrap();
        assert_eq!((est, stderr), again, "seeded run must reproduce exactly");
    }

    #[test]
    fn marginal_mc_handles_coincident_cells() {
        let beta = 0.1;
        let p = plaq(vec![0, 0, 0], vec![1, 2]);
        let exact = two_point(3, beta, &p, &p, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (est, stderr) = marginal_mc_two_point(3, beta, &p, &p, 8, 20_000, &mut rng).unwrap();
        assert!(
            (est - exact).abs() <= 3.0 * stderr,
            "estimate {est} vs exact {exact} (stderr {stderr})"
        );
    }
}
