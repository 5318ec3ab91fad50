//! Tori g/Λ presented by a Gram matrix on lattice coordinates, their
//! integer-vector characters, heat-kernel Fourier data, series evaluation,
//! and wrapped-Gaussian sampling.
//!
//! Convention: U(1) = R/Z, points are coordinate vectors mod 1, characters
//! are integer vectors, and the Fourier kernel is e^{-2πi ξ·x}. The heat
//! measure at inverse temperature β then has Fourier transform
//! e^{-4π²β‖ξ‖²_*} with ‖ξ‖²_* = ξᵀ gram⁻¹ ξ, and its normalization constant
//! is identically 1 (the ξ = 0 coefficient).

use crate::complex::intmat::IntMat;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::sync::Arc;

/// Absolute truncation-error target for heat-kernel series evaluation.
pub const SERIES_TOL: f64 = 1e-12;

/// Search cap for series cutoff radii; a box this large is infeasible to
/// walk anyway, so past it the other representation has to take over.
const RADIUS_CAP: u64 = 1_000_000;

/// Smallest radius r ≤ RADIUS_CAP with bound(r) ≤ SERIES_TOL, found by
/// exponential probing plus binary search (tail bounds decrease in r).
fn smallest_radius(bound: impl Fn(u64) -> f64) -> Option<u64> {
    if bound(0) <= SERIES_TOL {
        return Some(0);
    }
    let mut hi = 1u64;
    while bound(hi) > SERIES_TOL {
        hi = hi.saturating_mul(2);
        if hi > RADIUS_CAP {
            return None;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= SERIES_TOL {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// A torus g/Λ with an inner product on g expressed in a basis of Λ, so that
/// points are coordinate vectors mod 1 and characters are integer vectors.
#[derive(Debug, Clone)]
pub struct TorusGroup {
    n: usize,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    /// Cholesky factor L of gram = L Lᵀ (primal quadratic form ‖Lᵀx‖²).
    chol_l: DMatrix<f64>,
    /// L⁻ᵀ for gram = L Lᵀ: the sampling map for the unit-covariance Gaussian.
    inv_lt: DMatrix<f64>,
    /// Cholesky factor M of gram⁻¹ = M Mᵀ (dual quadratic form ‖Mᵀξ‖²).
    dual_chol: DMatrix<f64>,
    /// Smallest eigenvalue of gram⁻¹; controls dual series cutoffs.
    dual_eig_min: f64,
    /// Smallest eigenvalue of gram; controls position series cutoffs.
    gram_eig_min: f64,
    /// det(gram)^{1/2}, the position-series normalization ingredient.
    sqrt_det: f64,
}

impl TorusGroup {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 {
            return Err(Error::domain("torus dimension must be at least 1"));
        }
        let chol = crate::linalg::spd_cholesky(&gram, 1e-12, "torus gram")?;
        let gram_inv = chol.inverse();
        let chol_l = chol.l().clone_owned();
        let sqrt_det = chol_l.diagonal().iter().product();
        let inv_lt = chol_l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::integrity("singular Cholesky factor"))?
            .transpose();
        let dual_chol = crate::linalg::spd_cholesky(&gram_inv, 1e-9, "dual gram")?
            .l()
            .clone_owned();
        let dual_eig_min = gram_inv
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .min();
        let gram_eig_min = gram.clone().symmetric_eigen().eigenvalues.min();
        if dual_eig_min <= 0.0 || gram_eig_min <= 0.0 {
            return Err(Error::domain("torus gram is numerically singular"));
        }
        Ok(TorusGroup {
            n,
            gram: (gram.clone() + gram.transpose()) * 0.5,
            gram_inv,
            chol_l,
            inv_lt,
            dual_chol,
            dual_eig_min,
            gram_eig_min,
            sqrt_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    fn check_char(&self, xi: &[i64]) -> Result<()> {
        if xi.len() != self.n {
            return Err(Error::domain(format!(
                "character length {} != torus dimension {}",
                xi.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Dual-norm square ‖ξ‖²_* = ξᵀ gram⁻¹ ξ of an integer character.
    pub fn dual_norm2(&self, xi: &[i64]) -> Result<f64> {
        self.check_char(xi)?;
        let v = DVector::from_iterator(self.n, xi.iter().map(|&k| k as f64));
        Ok((self.dual_chol.transpose() * &v).norm_squared())
    }

    /// Fourier transform of the heat measure: exp(-4π²β‖ξ‖²_*).
    pub fn heat_fourier(&self, beta: f64, xi: &[i64]) -> Result<f64> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        Ok((-4.0 * PI * PI * beta * self.dual_norm2(xi)?).exp())
    }

    /// Rigorous bound on the series mass outside the sup-norm box of radius
    /// `cutoff`: Σ_{‖ξ‖_∞ = s > cutoff} count(s) · e^{-4π²β λ_min s²} with
    /// count(s) = (2s+1)^n − (2s−1)^n.
    pub fn series_tail_bound(&self, beta: f64, cutoff: u64) -> f64 {
        let rate = 4.0 * PI * PI * beta * self.dual_eig_min;
        let mut tail = 0.0;
        let mut s = cutoff + 1;
        loop {
            let sf = s as f64;
            let count = (2.0 * sf + 1.0).powi(self.n as i32)
                - (2.0 * sf - 1.0).powi(self.n as i32);
            let term = count * (-rate * sf * sf).exp();
            tail += term;
            if term < 1e-300 || s > cutoff + 100_000 {
                break;
            }
            s += 1;
        }
        tail
    }

    /// Smallest sup-norm radius whose dual-series tail bound is below
    /// `SERIES_TOL`.
    pub fn min_cutoff(&self, beta: f64) -> Result<u64> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        smallest_radius(|r| self.series_tail_bound(beta, r)).ok_or_else(|| {
            Error::precision(
                "heat series cutoff did not converge",
                self.series_tail_bound(beta, RADIUS_CAP),
            )
        })
    }

    /// Rigorous bound on the wrapped-Gaussian (position-space) series mass
    /// outside the sup-norm box of radius `cutoff`, prefactor included, for
    /// a point reduced to the centered cell [-1/2, 1/2]^n: there
    /// ‖x + k‖_∞ ≥ s − 1/2 on the shell ‖k‖_∞ = s, so each shell
    /// contributes at most count(s) · e^{-λ_min(gram)(s-1/2)²/(4β)}.
    pub fn position_tail_bound(&self, beta: f64, cutoff: u64) -> f64 {
        let rate = self.gram_eig_min / (4.0 * beta);
        let prefactor = self.sqrt_det / (4.0 * PI * beta).powf(self.n as f64 / 2.0);
        let mut tail = 0.0;
        let mut s = cutoff + 1;
        loop {
            let sf = s as f64;
            let count = (2.0 * sf + 1.0).powi(self.n as i32)
                - (2.0 * sf - 1.0).powi(self.n as i32);
            let term = count * (-rate * (sf - 0.5) * (sf - 0.5)).exp();
            tail += term;
            if term < 1e-300 || s > cutoff + 100_000 {
                break;
            }
            s += 1;
        }
        prefactor * tail
    }

    /// Smallest sup-norm radius whose position-series tail bound is below
    /// `SERIES_TOL`.
    pub fn min_cutoff_position(&self, beta: f64) -> Result<u64> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        smallest_radius(|r| self.position_tail_bound(beta, r)).ok_or_else(|| {
            Error::precision(
                "wrapped-Gaussian cutoff did not converge",
                self.position_tail_bound(beta, RADIUS_CAP),
            )
        })
    }

    /// Heat-kernel density H_β(x) = Σ_ξ e^{-4π²β‖ξ‖²_*} e^{2πi ξ·x} evaluated
    /// as a truncated series over the sup-norm box of radius `cutoff`. The
    /// ±ξ pairs combine into cosines, so the result is real by construction.
    pub fn heat_kernel_eval(&self, beta: f64, x: &[f64], cutoff: u64) -> Result<f64> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        if x.len() != self.n {
            return Err(Error::domain("point length != torus dimension"));
        }
        let tail = self.series_tail_bound(beta, cutoff);
        if tail > SERIES_TOL {
            return Err(Error::precision(
                format!("series cutoff {cutoff} too small for the 1e-12 tail target"),
                tail,
            ));
        }
        if cutoff == 0 {
            return Ok(1.0);
        }
        // Walk the box [-R, R]^n; maintain per-level partial vectors of
        // Mᵀξ (dual Cholesky rows) and the phase ξ·x, so a leaf costs O(n).
        let r = cutoff as i64;
        let rate = 4.0 * PI * PI * beta;
        let mt = self.dual_chol.transpose();
        let mut partial = vec![DVector::<f64>::zeros(self.n); self.n + 1];
        let mut phase = vec![0.0f64; self.n + 1];
        let mut idx = vec![-r - 1; self.n]; // level i value; -r-1 = not entered
        let mut sum = 0.0f64;
        let mut level = 0usize;
        loop {
            if idx[level] < r {
                idx[level] += 1;
                let k = idx[level];
                partial[level + 1] = &partial[level] + mt.column(level) * k as f64;
                phase[level + 1] = phase[level] + k as f64 * x[level];
                if level + 1 == self.n {
                    let q = partial[level + 1].norm_squared();
                    if q > 0.0 {
                        let coef = (-rate * q).exp();
                        if coef > 1e-18 {
                            sum += coef * (2.0 * PI * phase[level + 1]).cos();
                        }
                    } else if idx.iter().all(|&v| v == 0) {
                        sum += 1.0; // the ξ = 0 term
                    } else {
                        sum += (2.0 * PI * phase[level + 1]).cos();
                    }
                } else {
                    level += 1;
                    idx[level] = -r - 1;
                }
            } else if level == 0 {
                break;
            } else {
                level -= 1;
            }
        }
        Ok(sum)
    }

    /// The same density through Poisson summation: the wrapped Gaussian
    /// H_β(x) = det(gram)^{1/2}/(4πβ)^{n/2} · Σ_k e^{-(y+k)ᵀ gram (y+k)/(4β)}
    /// with y the centered representative of x, truncated to the sup-norm
    /// box of radius `cutoff`. Converges fast exactly where the dual series
    /// is slow (small β).
    pub fn heat_kernel_eval_position(&self, beta: f64, x: &[f64], cutoff: u64) -> Result<f64> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        if x.len() != self.n {
            return Err(Error::domain("point length != torus dimension"));
        }
        let tail = self.position_tail_bound(beta, cutoff);
        if tail > SERIES_TOL {
            return Err(Error::precision(
                format!("wrapped-Gaussian cutoff {cutoff} too small for the 1e-12 tail target"),
                tail,
            ));
        }
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let m = v.rem_euclid(1.0);
                if m > 0.5 {
                    m - 1.0
                } else {
                    m
                }
            })
            .collect();
        let prefactor = self.sqrt_det / (4.0 * PI * beta).powf(self.n as f64 / 2.0);
        let lt = self.chol_l.transpose();
        let r = cutoff as i64;
        // Walk the box [-R, R]^n, maintaining Lᵀ(y + k) level by level; a
        // leaf costs O(n) and every term is a positive Gaussian weight.
        let offset = &lt * DVector::from_column_slice(&y);
        let mut partial = vec![offset.clone(); self.n + 1];
        let mut idx = vec![-r - 1; self.n];
        let mut sum = 0.0f64;
        let mut level = 0usize;
        loop {
            if idx[level] < r {
                idx[level] += 1;
                let k = idx[level];
                partial[level + 1] = &partial[level] + lt.column(level) * k as f64;
                if level + 1 == self.n {
                    let q = partial[level + 1].norm_squared();
                    sum += (-q / (4.0 * beta)).exp();
                } else {
                    level += 1;
                    idx[level] = -r - 1;
                }
            } else if level == 0 {
                break;
            } else {
                level -= 1;
            }
        }
        Ok(prefactor * sum)
    }

    /// Density via whichever certified representation (dual character sum
    /// or wrapped Gaussian) needs to walk fewer lattice points at this β.
    pub fn heat_kernel_eval_auto(&self, beta: f64, x: &[f64]) -> Result<f64> {
        match (self.min_cutoff(beta), self.min_cutoff_position(beta)) {
            (Ok(rd), Ok(rp)) => {
                if rp < rd {
                    self.heat_kernel_eval_position(beta, x, rp)
                } else {
                    self.heat_kernel_eval(beta, x, rd)
                }
            }
            (Ok(rd), Err(_)) => self.heat_kernel_eval(beta, x, rd),
            (Err(_), Ok(rp)) => self.heat_kernel_eval_position(beta, x, rp),
            (Err(e), Err(_)) => Err(e),
        }
    }

    /// One draw from the heat measure: a centered Gaussian with covariance
    /// 2β·gram⁻¹ in lattice coordinates, reduced mod 1 (a wrapped Gaussian).
    /// The characteristic function E[e^{-2πi ξ·x}] equals `heat_fourier`.
    pub fn sample_heat<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Result<Vec<f64>> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        let z = DVector::from_iterator(self.n, (0..self.n).map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v
        }));
        let x = &self.inv_lt * z * (2.0 * beta).sqrt();
        Ok(x.iter().map(|v| v.rem_euclid(1.0)).collect())
    }
}

/// Shared evaluator for a measure's Fourier transform on ℤ^dim characters.
type FtEval = Arc<dyn Fn(&[i64]) -> Complex64 + Send + Sync>;

/// The Fourier transform of a finite measure on a torus: a function from
/// integer character vectors to complex numbers with value 1 at ξ = 0.
#[derive(Clone)]
pub struct MeasureFt {
    dim: usize,
    eval: FtEval,
}

impl MeasureFt {
    pub fn new(
        dim: usize,
        eval: impl Fn(&[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        MeasureFt {
            dim,
            eval: Arc::new(move |xi| {
                if xi.iter().all(|&k| k == 0) {
                    Complex64::new(1.0, 0.0)
                } else {
                    eval(xi)
                }
            }),
        }
    }

    /// The heat measure's Fourier transform on `torus`.
    pub fn heat(torus: &TorusGroup, beta: f64) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        let t = torus.clone();
        Ok(MeasureFt::new(torus.dim(), move |xi| {
            Complex64::new(t.heat_fourier(beta, xi).expect("validated above"), 0.0)
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, xi: &[i64]) -> Result<Complex64> {
        if xi.len() != self.dim {
            return Err(Error::domain("character length != measure dimension"));
        }
        Ok((self.eval)(xi))
    }
}

/// Pushforward along the torus homomorphism given by the integer matrix `f`
/// (codomain_dim × domain_dim): the dual map on characters is transposition,
/// so the new transform is χ ↦ μ̂(fᵀχ).
pub fn pushforward_ft(f: &IntMat, mu: &MeasureFt) -> Result<MeasureFt> {
    if f.cols() != mu.dim() {
        return Err(Error::domain(format!(
            "homomorphism domain {} != measure dimension {}",
            f.cols(),
            mu.dim()
        )));
    }
    let ft = f.transpose();
    let mu = mu.clone();
    Ok(MeasureFt::new(f.rows(), move |xi| {
        let pulled = ft
            .mul_vec(&xi.iter().map(|&k| k as i128).collect::<Vec<_>>())
            .expect("shape checked");
        let pulled_i64: Vec<i64> = pulled.iter().map(|&v| v as i64).collect();
        mu.eval(&pulled_i64).expect("dimension preserved")
    }))
}

/// Verifies that the dual of `f` is an isometry (gram2-dual to gram1-dual):
/// the matrix identity f·gram1⁻¹·fᵀ = gram2⁻¹. Returns the pass verdict at
/// `tol` together with the max-abs residual.
pub fn dual_isometry_check(
    f: &IntMat,
    gram1: &DMatrix<f64>,
    gram2: &DMatrix<f64>,
    tol: f64,
) -> Result<(bool, f64)> {
    if gram1.nrows() != f.cols() || gram2.nrows() != f.rows() {
        return Err(Error::domain("dual_isometry_check: shape mismatch"));
    }
    let g1_inv = crate::linalg::spd_inverse(gram1, "gram1")?;
    let g2_inv = crate::linalg::spd_inverse(gram2, "gram2")?;
    let ff = f.to_f64();
    let residual = (&ff * g1_inv * ff.transpose() - g2_inv).amax();
    Ok((residual <= tol, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus1(g: f64) -> TorusGroup {
        TorusGroup::new(DMatrix::from_element(1, 1, g)).unwrap()
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-10i32..=10) as f64 / 10.0);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn heat_fourier_basics() {
        let t = torus1(1.0);
        assert_eq!(t.heat_fourier(0.7, &[0]).unwrap(), 1.0);
        let beta = 1.0 / (4.0 * PI * PI);
        let v = t.heat_fourier(beta, &[1]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(
            t.heat_fourier(0.3, &[2]).unwrap(),
            t.heat_fourier(0.3, &[-2]).unwrap()
        );
        assert!(t.heat_fourier(-1.0, &[1]).is_err());
        assert!(t.heat_fourier(1.0, &[1, 2]).is_err());
    }

    #[test]
    fn heat_fourier_multiplicative_on_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g1 = random_spd(2, &mut rng);
        let g2 = random_spd(3, &mut rng);
        let mut block = DMatrix::zeros(5, 5);
        block.view_mut((0, 0), (2, 2)).copy_from(&g1);
        block.view_mut((2, 2), (3, 3)).copy_from(&g2);
        let (ta, tb, tab) = (
            TorusGroup::new(g1).unwrap(),
            TorusGroup::new(g2).unwrap(),
            TorusGroup::new(block).unwrap(),
        );
        let beta = 0.21;
        for xi in [[1i64, -2, 0, 3, 1], [0, 1, 1, 0, -4], [2, 2, -1, -1, 0]] {
            let lhs = tab.heat_fourier(beta, &xi).unwrap();
            let rhs = ta.heat_fourier(beta, &xi[..2]).unwrap()
                * tb.heat_fourier(beta, &xi[2..]).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        // Quadrature oracle: the ξ = 0 Fourier coefficient is the Haar
        // integral, so a uniform grid mean must be 1 (z_β = 1).
        let t = torus1(1.0);
        let beta = 0.05;
        let cutoff = t.min_cutoff(beta).unwrap();
        let m = 512;
        let mean = (0..m)
            .map(|i| {
                t.heat_kernel_eval(beta, &[i as f64 / m as f64], cutoff)
                    .unwrap()
            })
            .sum::<f64>()
            / m as f64;
        assert!((mean - 1.0).abs() < 1e-8, "quadrature mean {mean}");
    }

    #[test]
    fn heat_kernel_matches_wrapped_gaussian_oracle() {
        // Poisson summation: H_β(x) = sqrt(g/(4πβ)) Σ_m e^{-g(x-m)²/(4β)}.
        for (g, beta) in [(1.0, 0.03), (2.5, 0.11), (0.7, 0.4)] {
            let t = torus1(g);
            let cutoff = t.min_cutoff(beta).unwrap();
            for &x in &[0.0, 0.12, 0.5, 0.93] {
                let series = t.heat_kernel_eval(beta, &[x], cutoff).unwrap();
                let mut image_sum = 0.0;
                for m in -60i64..=60 {
                    let dx = x - m as f64;
                    image_sum += (-g * dx * dx / (4.0 * beta)).exp();
                }
                let oracle = (g / (4.0 * PI * beta)).sqrt() * image_sum;
                assert!(
                    (series - oracle).abs() < 1e-10,
                    "series {series} vs wrapped-Gaussian {oracle} at x={x}"
                );
            }
        }
    }

    #[test]
    fn heat_kernel_large_beta_tends_to_one() {
        let t = torus1(1.0);
        let v = t.heat_kernel_eval_auto(40.0, &[0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_symmetric_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = TorusGroup::new(random_spd(3, &mut rng)).unwrap();
        let beta = 0.08;
        let cutoff = t.min_cutoff(beta).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let neg: Vec<f64> = x.iter().map(|&v| (-v).rem_euclid(1.0)).collect();
            let hx = t.heat_kernel_eval(beta, &x, cutoff).unwrap();
            let hn = t.heat_kernel_eval(beta, &neg, cutoff).unwrap();
            assert!(hx >= 0.0);
            assert!((hx - hn).abs() < 1e-10, "H(x) != H(-x)");
        }
    }

    #[test]
    fn cutoff_too_small_is_a_precision_error() {
        let t = torus1(1.0);
        match t.heat_kernel_eval(0.001, &[0.3], 1) {
            Err(Error::Precision { bound, .. }) => assert!(bound > SERIES_TOL),
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn sampler_matches_characteristic_function() {
        let t = torus1(1.0);
        let beta = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let xi = [1i64];
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sq = 0.0;
        for _ in 0..n {
            let x = t.sample_heat(beta, &mut rng).unwrap();
            let w = Complex64::from_polar(1.0, -2.0 * PI * (xi[0] as f64) * x[0]);
            sum += w;
            sq += w.re * w.re;
        }
        let mean = sum / n as f64;
        let target = t.heat_fourier(beta, &xi).unwrap();
        let var = (sq / n as f64 - mean.re * mean.re).max(0.0);
        let stderr = (var / n as f64).sqrt();
        assert!(
            (mean.re - target).abs() <= 3.0 * stderr,
            "CF mismatch: {} vs {} (3σ = {})",
            mean.re,
            target,
            3.0 * stderr
        );
    }

    #[test]
    fn sampler_is_deterministic_under_seed() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let mut rng3 = ChaCha8Rng::seed_from_u64(8);
        let t = torus1(2.0);
        let a = t.sample_heat(0.3, &mut rng1).unwrap();
        let b = t.sample_heat(0.3, &mut rng2).unwrap();
        let c = t.sample_heat(0.3, &mut rng3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_beta_concentrates_at_identity() {
        let t = torus1(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = 0.0;
        let n = 2000;
        for _ in 0..n {
            let x = t.sample_heat(1e-10, &mut rng).unwrap();
            mean += (2.0 * PI * x[0]).cos();
        }
        assert!((mean / n as f64 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pushforward_identity_and_zero() {
        let t = torus1(1.0);
        let mu = MeasureFt::heat(&t, 0.2).unwrap();
        let id = pushforward_ft(&IntMat::identity(1), &mu).unwrap();
        for xi in [-3i64, 0, 2] {
            assert_eq!(id.eval(&[xi]).unwrap(), mu.eval(&[xi]).unwrap());
        }
        let zero = pushforward_ft(&IntMat::zeros(2, 1), &mu).unwrap();
        assert_eq!(zero.eval(&[5, -1]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pushforward_composes_contravariantly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = TorusGroup::new(random_spd(3, &mut rng)).unwrap();
        let mu = MeasureFt::heat(&t, 0.09).unwrap();
        let g = IntMat::from_rows(&[vec![1, 0, 2], vec![0, -1, 1]]).unwrap(); // 3 -> 2
        let f = IntMat::from_rows(&[vec![2, 1], vec![1, 0], vec![0, 3]]).unwrap(); // 2 -> 3
        let fg = f.mul(&g).unwrap();
        let lhs = pushforward_ft(&fg, &mu).unwrap();
        let rhs = pushforward_ft(&f, &pushforward_ft(&g, &mu).unwrap()).unwrap();
        for _ in 0..20 {
            let xi: Vec<i64> = (0..3).map(|_| rng.random_range(-4i64..=4)).collect();
            let a = lhs.eval(&xi).unwrap();
            let b = rhs.eval(&xi).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn heat_pushforward_through_dual_isometry() {
        // Construct gram2 := (f gram1⁻¹ fᵀ)⁻¹ so the dual map is an isometry
        // by construction; then the pushed heat FT equals the codomain's.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gram1 = random_spd(3, &mut rng);
        let f = IntMat::from_rows(&[vec![1, 0, 1], vec![0, 1, -1]]).unwrap();
        let ff = f.to_f64();
        let g1_inv = crate::linalg::spd_inverse(&gram1, "g1").unwrap();
        let gram2 = crate::linalg::spd_inverse(&(&ff * g1_inv * ff.transpose()), "g2").unwrap();
        let (ok, res) = dual_isometry_check(&f, &gram1, &gram2, 1e-10).unwrap();
        assert!(ok, "constructed isometry has residual {res}");

        let t1 = TorusGroup::new(gram1).unwrap();
        let t2 = TorusGroup::new(gram2).unwrap();
        for beta in [0.05, 0.7] {
            let pushed = pushforward_ft(&f, &MeasureFt::heat(&t1, beta).unwrap()).unwrap();
            let direct = MeasureFt::heat(&t2, beta).unwrap();
            for _ in 0..100 {
                let xi: Vec<i64> = (0..2).map(|_| rng.random_range(-5i64..=5)).collect();
                let a = pushed.eval(&xi).unwrap();
                let b = direct.eval(&xi).unwrap();
                assert!((a - b).norm() < 1e-12, "FT mismatch at {xi:?}");
            }
        }
    }

    #[test]
    fn dual_isometry_check_trivials() {
        // a signed permutation is orthogonal, hence a dual isometry for
        // euclidean grams
        let f = IntMat::from_rows(&[vec![0, 1], vec![-1, 0]]).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        let (ok, res) = dual_isometry_check(&f, &id, &id, 1e-12).unwrap();
        assert!(ok);
        assert!(res < 1e-15);
        // doubling is not an isometry and the residual says so
        let twice = IntMat::from_rows(&[vec![2]]).unwrap();
        let id1 = DMatrix::<f64>::identity(1, 1);
        let (ok2, res2) = dual_isometry_check(&twice, &id1, &id1, 1e-12).unwrap();
        assert!(!ok2);
        assert!(res2 > 1.0);
    }

    #[test]
    fn measure_ft_fixes_value_at_zero() {
        let mu = MeasureFt::new(2, |_| Complex64::new(0.25, 0.1));
        assert_eq!(mu.eval(&[0, 0]).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(mu.eval(&[1, 0]).unwrap(), Complex64::new(0.25, 0.1));
        assert!(mu.eval(&[1]).is_err());
    }

    #[test]
    fn poisson_summation_ties_both_series_representations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..3 {
            let t = TorusGroup::new(random_spd(3, &mut rng)).unwrap();
            for &beta in &[0.05, 0.3, 1.5] {
                for _ in 0..4 {
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
                    let dual = t
                        .heat_kernel_eval(beta, &x, t.min_cutoff(beta).unwrap())
                        .unwrap();
                    let pos = t
                        .heat_kernel_eval_position(beta, &x, t.min_cutoff_position(beta).unwrap())
                        .unwrap();
                    assert!(
                        (dual - pos).abs() <= 1e-10,
                        "Poisson mismatch at β={beta}: dual {dual} vs position {pos}"
                    );
                }
            }
        }
    }

    #[test]
    fn position_series_is_cheap_at_small_beta() {
        let t = TorusGroup::new(DMatrix::identity(3, 3)).unwrap();
        let beta = 1e-3;
        let cutoff = t.min_cutoff_position(beta).unwrap();
        assert!(cutoff <= 2, "cutoff {cutoff}");
        // wrap contributions are ~e^{-60}; the density is the plain
        // Gaussian at the centered representative
        let x = [0.01, -0.02, 0.985];
        let y = [0.01f64, -0.02, -0.015];
        let q: f64 = y.iter().map(|v| v * v).sum();
        let expected = (4.0 * PI * beta).powf(-1.5) * (-q / (4.0 * beta)).exp();
        let got = t.heat_kernel_eval_position(beta, &x, cutoff).unwrap();
        assert!(
            ((got - expected) / expected).abs() <= 1e-10,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn auto_eval_matches_whichever_side_is_certified() {
        let t = TorusGroup::new(DMatrix::identity(2, 2)).unwrap();
        let x = [0.2, 0.7];
        for &beta in &[0.02, 0.2, 2.0] {
            let auto = t.heat_kernel_eval_auto(beta, &x).unwrap();
            let dual = t
                .heat_kernel_eval(beta, &x, t.min_cutoff(beta).unwrap())
                .unwrap();
            assert!(
                (auto - dual).abs() <= 2.5e-12,
                "auto {auto} vs dual {dual} at β={beta}"
            );
        }
    }

    #[test]
    fn undersized_position_cutoff_is_a_precision_error() {
        let t = TorusGroup::new(DMatrix::identity(2, 2)).unwrap();
        match t.heat_kernel_eval_position(5.0, &[0.0, 0.0], 0) {
            Err(Error::Precision { bound, .. }) => assert!(bound > SERIES_TOL),
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn cutoff_searches_agree_with_their_tail_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = TorusGroup::new(random_spd(2, &mut rng)).unwrap();
        for &beta in &[0.01, 0.1, 1.0, 10.0] {
            let rd = t.min_cutoff(beta).unwrap();
            assert!(t.series_tail_bound(beta, rd) <= SERIES_TOL);
            assert!(rd == 0 || t.series_tail_bound(beta, rd - 1) > SERIES_TOL);
            let rp = t.min_cutoff_position(beta).unwrap();
            assert!(t.position_tail_bound(beta, rp) <= SERIES_TOL);
            assert!(rp == 0 || t.position_tail_bound(beta, rp - 1) > SERIES_TOL);
        }
    }
}
