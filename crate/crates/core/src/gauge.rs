//! The gauge measure of a finite box: heat-kernel weight on the image torus
//! of the edge-to-plaquette coboundary, Wilson observables, exact
//! expectations, and Monte Carlo estimates.
//!
//! A gauge field is a U(1)-valued 1-cochain c. Its field strength d₁c lives
//! in the subtorus Im d₁ of the plaquette torus, and the measure of interest
//! weights c by the heat-kernel density of that subtorus evaluated at d₁c,
//! against Haar on the edge torus. Because the density only sees d₁c, the
//! measure is exactly gauge invariant, and expectations of Wilson observables
//! reduce to Fourier coefficients of the image-torus heat measure.

use crate::complex::intmat::IntMat;
use crate::complex::{coboundary_matrix, enumerate_cells, image_lattice, Cell, CellBasis, LatticeBox};
use crate::error::{Error, Result};
use crate::linalg;
use crate::torus::TorusGroup;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

/// Tolerance for the lift residual: a sampled image point must be hit by the
/// lifted edge cochain to this accuracy.
const LIFT_TOL: f64 = 1e-9;

/// Choice of inner product on the ambient plaquette cochain space.
#[derive(Debug, Clone)]
pub enum InnerProductSpec {
    /// The standard Euclidean product in the plaquette δ-basis.
    Euclidean,
    /// h^power times the Euclidean product (mesh-dependent scaling).
    Scaled { h: f64, power: i32 },
    /// An explicit SPD Gram matrix on plaquette cochains.
    Explicit(DMatrix<f64>),
}

impl InnerProductSpec {
    fn ambient_gram(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            InnerProductSpec::Euclidean => Ok(DMatrix::identity(n, n)),
            InnerProductSpec::Scaled { h, power } => {
                if *h <= 0.0 {
                    return Err(Error::domain("scale h must be positive"));
                }
                Ok(DMatrix::identity(n, n) * h.powi(*power))
            }
            InnerProductSpec::Explicit(g) => {
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::domain(format!(
                        "explicit Gram is {}x{}, expected {n}x{n}",
                        g.nrows(),
                        g.ncols()
                    )));
                }
                Ok(g.clone())
            }
        }
    }
}

/// A gauge orbit, stored through its minimum-norm representative (an edge
/// cochain with entries in [0, 1)).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeClass {
    rep: Vec<f64>,
}

impl GaugeClass {
    pub fn rep(&self) -> &[f64] {
        &self.rep
    }
}

/// Precomputed data of the gauge measure on one box: coboundaries, the
/// saturated image lattice of d₁, the induced Gram on image coordinates, and
/// the torus carrying the heat measure.
#[derive(Debug, Clone)]
pub struct GaugeComplexData {
    lattice_box: LatticeBox,
    plaq_basis: CellBasis,
    d0: IntMat,
    d1: IntMat,
    d2: IntMat,
    /// Columns form a basis of the integral image lattice of d₁ (saturated),
    /// expressed in ambient plaquette coordinates. n₂ × r.
    image_basis: IntMat,
    gram_image: DMatrix<f64>,
    image_torus: TorusGroup,
    /// n₁ × r minimum-norm lift: d₁ · lift = image_basis over the reals.
    lift: DMatrix<f64>,
    /// r × n₂ left inverse of image_basis: coords · image_basis = Id.
    coords: DMatrix<f64>,
}

impl GaugeComplexData {
    pub fn build(bx: &LatticeBox, ip: &InnerProductSpec) -> Result<Self> {
        let d = bx.dim();
        if d < 2 {
            return Err(Error::domain(
                "gauge measure needs 2-cells: box dimension must be at least 2",
            ));
        }
        let d0 = coboundary_matrix(bx, 0)?;
        let d1 = coboundary_matrix(bx, 1)?;
        let n2 = d1.rows();
        let d2 = if d >= 3 {
            coboundary_matrix(bx, 2)?
        } else {
            IntMat::zeros(0, n2)
        };
        if !d1.mul(&d0)?.is_zero() || !d2.mul(&d1)?.is_zero() {
            return Err(Error::integrity("coboundary squares are not zero"));
        }
        let plaq_basis = enumerate_cells(bx, 2)?;

        let image_basis = image_lattice(&d1)?;
        let r = image_basis.cols();
        let b = image_basis.to_f64();
        let gram_ambient = ip.ambient_gram(n2)?;
        let gram_image = b.transpose() * &gram_ambient * &b;
        let image_torus = TorusGroup::new(gram_image.clone())?;

        let lift = linalg::pinv(&d1.to_f64(), linalg::RANK_REL_TOL) * &b;
        let build_residual = (&d1.to_f64() * &lift - &b).amax();
        if build_residual > LIFT_TOL {
            return Err(Error::integrity(format!(
                "image basis does not lift through d1 (residual {build_residual:.3e})"
            )));
        }
        // B has full column rank, so pinv(B)·B = Id.
        let coords = linalg::pinv(&b, linalg::RANK_REL_TOL);
        if (&coords * &b - DMatrix::identity(r, r)).amax() > 1e-10 {
            return Err(Error::integrity("image basis is rank deficient"));
        }

        Ok(GaugeComplexData {
            lattice_box: bx.clone(),
            plaq_basis,
            d0,
            d1,
            d2,
            image_basis,
            gram_image,
            image_torus,
            lift,
            coords,
        })
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn d0(&self) -> &IntMat {
        &self.d0
    }

    pub fn d1(&self) -> &IntMat {
        &self.d1
    }

    pub fn d2(&self) -> &IntMat {
        &self.d2
    }

    pub fn image_basis(&self) -> &IntMat {
        &self.image_basis
    }

    pub fn gram_image(&self) -> &DMatrix<f64> {
        &self.gram_image
    }

    pub fn image_torus(&self) -> &TorusGroup {
        &self.image_torus
    }

    /// Dimension of the image torus (rank of d₁).
    pub fn image_rank(&self) -> usize {
        self.image_basis.cols()
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.d1.cols()
    }

    /// Index of a plaquette in the canonical 2-cell basis, together with its
    /// orientation relative to the stored (+1) representative.
    fn plaquette_index(&self, p: &Cell) -> Result<(usize, i64)> {
        if p.dirs().len() != 2 {
            return Err(Error::domain("Wilson observables are indexed by 2-cells"));
        }
        if !self.lattice_box.contains_cell(p) {
            return Err(Error::domain(format!("2-cell {p:?} is not in the box")));
        }
        let idx = self
            .plaq_basis
            .position(p)
            .ok_or_else(|| Error::domain("2-cell not found in basis"))?;
        Ok((idx, p.orientation() as i64))
    }

    /// The character of the image torus implementing evaluation at `p`,
    /// together with its dual-norm square ξᵀ gram_image⁻¹ ξ. For the
    /// Euclidean ambient product the norm equals ‖Π δ_p‖² with Π the
    /// orthogonal projector onto Im d₁.
    pub fn wilson_character(&self, p: &Cell) -> Result<(Vec<i64>, f64)> {
        let (idx, sign) = self.plaquette_index(p)?;
        let xi: Vec<i64> = (0..self.image_basis.cols())
            .map(|j| (sign as i128 * self.image_basis[(idx, j)]) as i64)
            .collect();
        let norm2 = self.image_torus.dual_norm2(&xi)?;
        Ok((xi, norm2))
    }

    /// E[W_p] under the gauge measure: the heat-measure Fourier transform at
    /// the Wilson character, exp(-4π²β‖ξ‖²_*).
    pub fn exact_wilson_expectation(&self, beta: f64, p: &Cell) -> Result<f64> {
        let (xi, _) = self.wilson_character(p)?;
        self.image_torus.heat_fourier(beta, &xi)
    }

    /// Draw a gauge class: sample the image torus heat measure, then lift to
    /// an edge cochain by the minimum-norm right inverse of d₁.
    pub fn sample_gauge_class<R: Rng + ?Sized>(
        &self,
        beta: f64,
        rng: &mut R,
    ) -> Result<GaugeClass> {
        let x = self.image_torus.sample_heat(beta, rng)?;
        let xv = DVector::from_column_slice(&x);
        let rep: Vec<f64> = (&self.lift * &xv).iter().map(|v| v.rem_euclid(1.0)).collect();
        // d₁(rep) must reproduce the drawn image point modulo integers.
        let target = self.image_basis.to_f64() * &xv;
        let reached = self.d1.mul_vec_f64(&rep)?;
        for (a, b) in reached.iter().zip(target.iter()) {
            let miss = (a - b) - (a - b).round();
            if miss.abs() > LIFT_TOL {
                return Err(Error::integrity(format!(
                    "lift residual {miss:.3e} exceeds {LIFT_TOL:.0e}"
                )));
            }
        }
        Ok(GaugeClass { rep })
    }

    /// The Wilson observable W_p(c) = conj(e^{2πi (d₁ rep)(p)}).
    pub fn wilson_value(&self, class: &GaugeClass, p: &Cell) -> Result<Complex64> {
        let (idx, sign) = self.plaquette_index(p)?;
        if class.rep.len() != self.edge_count() {
            return Err(Error::domain("gauge class has wrong edge count"));
        }
        let field = self.d1.mul_vec_f64(&class.rep)?;
        Ok(Complex64::from_polar(1.0, -2.0 * PI * sign as f64 * field[idx]))
    }

    /// Monte Carlo estimate of E[W_p]: (complex mean, standard error of the
    /// mean measured by total complex dispersion). Sequential and therefore
    /// bit-reproducible for a fixed RNG state.
    pub fn mc_wilson<R: Rng + ?Sized>(
        &self,
        beta: f64,
        p: &Cell,
        num_samples: usize,
        rng: &mut R,
    ) -> Result<(Complex64, f64)> {
        if num_samples < 100 {
            return Err(Error::domain("mc_wilson needs at least 100 samples"));
        }
        let (idx, sign) = self.plaquette_index(p)?;
        let mut values = Vec::with_capacity(num_samples);
        for _ in 0..num_samples {
            let class = self.sample_gauge_class(beta, rng)?;
            let field = self.d1.mul_vec_f64(&class.rep)?;
            values.push(Complex64::from_polar(
                1.0,
                -2.0 * PI * sign as f64 * field[idx],
            ));
        }
        let n = num_samples as f64;
        let mean = values.iter().sum::<Complex64>() / n;
        let disp = values.iter().map(|w| (w - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        Ok((mean, (disp / n).sqrt()))
    }

    /// Unnormalized density of the gauge measure at the edge cochain `c`:
    /// the image-torus heat kernel at the image coordinates of d₁c. Exactly
    /// gauge invariant because d₁ d₀ = 0.
    pub fn density_unnormalized(&self, beta: f64, c: &[f64]) -> Result<f64> {
        if c.len() != self.edge_count() {
            return Err(Error::domain("edge cochain has wrong length"));
        }
        let field = DVector::from_column_slice(&self.d1.mul_vec_f64(c)?);
        let y: Vec<f64> = (&self.coords * field).iter().map(|v| v.rem_euclid(1.0)).collect();
        self.image_torus.heat_kernel_eval_auto(beta, &y)
    }

    /// Whether two edge cochains represent the same gauge class: their
    /// difference must lie in Im d₀ + integer cochains, which (by saturation
    /// of the image lattice and contractibility) holds exactly when d₁ of
    /// the difference is integral.
    pub fn classes_equal(&self, a: &[f64], b: &[f64], tol: f64) -> Result<bool> {
        if a.len() != self.edge_count() || b.len() != self.edge_count() {
            return Err(Error::domain("edge cochain has wrong length"));
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let field = self.d1.mul_vec_f64(&diff)?;
        Ok(field.iter().all(|v| (v - v.round()).abs() <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::real_image_projector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> GaugeComplexData {
        GaugeComplexData::build(&LatticeBox::unit(2), &InnerProductSpec::Euclidean)
            .unwrap()
    }

    fn cube() -> GaugeComplexData {
        GaugeComplexData::build(&LatticeBox::unit(3), &InnerProductSpec::Euclidean)
            .unwrap()
    }

    #[test]
    fn square_image_torus() {
        let g = square();
        assert_eq!(g.image_rank(), 1);
        assert_eq!(g.gram_image()[(0, 0)], 1.0);
        let p = Cell::new(vec![0, 0], vec![0, 1]).unwrap();
        let (xi, norm2) = g.wilson_character(&p).unwrap();
        assert_eq!(xi.iter().map(|k| k * k).sum::<i64>(), 1);
        assert!((norm2 - 1.0).abs() < 1e-14);
        let beta = 0.13;
        let exact = g.exact_wilson_expectation(beta, &p).unwrap();
        assert!((exact - (-4.0 * PI * PI * beta).exp()).abs() < 1e-15);
    }

    #[test]
    fn cube_dual_norm_matches_projector_oracle() {
        let g = cube();
        assert_eq!(g.image_rank(), 5);
        let proj = real_image_projector(g.d1(), &DMatrix::identity(6, 6)).unwrap();
        for (idx, p) in enumerate_cells(g.lattice_box(), 2).unwrap().cells().iter().enumerate() {
            let (_, norm2) = g.wilson_character(p).unwrap();
            let mut delta = DVector::zeros(6);
            delta[idx] = 1.0;
            let oracle = (&proj * &delta).dot(&delta);
            assert!(
                (norm2 - oracle).abs() < 1e-12,
                "face {idx}: {norm2} vs projector oracle {oracle}"
            );
            assert!(norm2 > 0.0 && norm2 < 1.0);
        }
    }

    #[test]
    fn orientation_flip_negates_character() {
        let g = cube();
        let p = Cell::new(vec![0, 0, 0], vec![0, 2]).unwrap();
        let q = p.flipped();
        let (xi_p, n_p) = g.wilson_character(&p).unwrap();
        let (xi_q, n_q) = g.wilson_character(&q).unwrap();
        assert_eq!(xi_p.iter().map(|k| -k).collect::<Vec<_>>(), xi_q);
        assert_eq!(n_p, n_q);
        let e_p = g.exact_wilson_expectation(0.2, &p).unwrap();
        let e_q = g.exact_wilson_expectation(0.2, &q).unwrap();
        assert_eq!(e_p, e_q);
    }

    #[test]
    fn exact_expectation_monotone_in_beta() {
        let g = cube();
        let p = Cell::new(vec![0, 0, 0], vec![0, 1]).unwrap();
        let mut last = 1.0 + 1e-12;
        for beta in [1e-6, 0.01, 0.1, 1.0, 10.0] {
            let v = g.exact_wilson_expectation(beta, &p).unwrap();
            assert!(v < last, "not decreasing at beta={beta}");
            assert!(v > 0.0);
            last = v;
        }
    }

    #[test]
    fn sampling_reaches_the_drawn_point() {
        let g = cube();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let class = g.sample_gauge_class(0.5, &mut rng).unwrap();
            assert_eq!(class.rep().len(), 12);
            assert!(class.rep().iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn gauge_freedom_does_not_change_the_class() {
        let g = cube();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let class = g.sample_gauge_class(0.3, &mut rng).unwrap();
        // another lift of the same image point: add a gauge transformation
        let u: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = g.d0().mul_vec_f64(&u).unwrap();
        let other: Vec<f64> = class
            .rep()
            .iter()
            .zip(&shift)
            .map(|(a, s)| (a + s + 3.0).rem_euclid(1.0))
            .collect();
        assert_ne!(class.rep(), other.as_slice());
        assert!(g.classes_equal(class.rep(), &other, 1e-9).unwrap());
        // a non-gauge perturbation changes the class
        let mut bad = class.rep().to_vec();
        bad[0] = (bad[0] + 0.37).rem_euclid(1.0);
        assert!(!g.classes_equal(class.rep(), &bad, 1e-9).unwrap());
    }

    #[test]
    fn kernel_of_d1_is_gauge_image() {
        for bx in [
            LatticeBox::unit(2),
            LatticeBox::unit(3),
            LatticeBox::new(vec![-1, 0, 2], vec![2, 1, 3]).unwrap(),
            LatticeBox::new(vec![0, 0, 0, 0], vec![1, 2, 1, 1]).unwrap(),
        ] {
            let d0 = coboundary_matrix(&bx, 0).unwrap();
            let d1 = coboundary_matrix(&bx, 1).unwrap();
            let r0 = linalg::rank(&d0.to_f64(), linalg::RANK_REL_TOL);
            let r1 = linalg::rank(&d1.to_f64(), linalg::RANK_REL_TOL);
            assert_eq!(d1.cols() - r1, r0, "ker d1 != Im d0 on {bx:?}");
        }
    }

    #[test]
    fn mc_wilson_matches_exact_on_cube() {
        let g = cube();
        let p = Cell::new(vec![0, 0, 0], vec![1, 2]).unwrap();
        let beta = 0.02;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mean, stderr) = g.mc_wilson(beta, &p, 20_000, &mut rng).unwrap();
        let exact = g.exact_wilson_expectation(beta, &p).unwrap();
        assert!(
            (mean.re - exact).abs() <= 3.0 * stderr,
            "MC {} vs exact {} (3σ = {})",
            mean.re,
            exact,
            3.0 * stderr
        );
        assert!(mean.im.abs() <= 3.0 * stderr, "imaginary part not near 0");
    }

    #[test]
    fn mc_wilson_is_deterministic_and_conjugates() {
        let g = cube();
        let p = Cell::new(vec![0, 0, 0], vec![0, 1]).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let (m1, s1) = g.mc_wilson(0.1, &p, 500, &mut r1).unwrap();
        let (m2, s2) = g.mc_wilson(0.1, &p, 500, &mut r2).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
        let mut r3 = ChaCha8Rng::seed_from_u64(77);
        let (m3, _) = g.mc_wilson(0.1, &p.flipped(), 500, &mut r3).unwrap();
        assert!((m3 - m1.conj()).norm() < 1e-14);
        assert!(g.mc_wilson(0.1, &p, 99, &mut r1).is_err());
    }

    #[test]
    fn density_peaks_at_zero_and_is_gauge_invariant() {
        let g = cube();
        let beta = 0.08;
        let at_zero = g.density_unnormalized(beta, &[0.0; 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let c: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
            let rho = g.density_unnormalized(beta, &c).unwrap();
            assert!(rho <= at_zero + 1e-12);
            let u: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let shift = g.d0().mul_vec_f64(&u).unwrap();
            let moved: Vec<f64> = c.iter().zip(&shift).map(|(a, s)| a + s).collect();
            let rho2 = g.density_unnormalized(beta, &moved).unwrap();
            assert!(
                (rho - rho2).abs() <= 1e-10 * rho.max(1.0),
                "gauge orbit density varies: {rho} vs {rho2}"
            );
        }
    }

    #[test]
    fn density_integrates_to_one_over_haar() {
        // z_β = 1 in this normalization: the Haar integral of the density is
        // the ξ = 0 coefficient. Monte Carlo quadrature over uniform edge
        // cochains of the unit square.
        let g = square();
        let beta = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 20_000;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            vals.push(g.density_unnormalized(beta, &c).unwrap());
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let stderr = (var / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * stderr,
            "Haar integral {mean} != 1 (3σ = {})",
            3.0 * stderr
        );
    }

    #[test]
    fn haar_pushforward_kills_nonzero_characters() {
        // Uniform edge cochains push forward through d₁ to Haar on the image
        // torus, whose FT vanishes away from 0.
        let g = cube();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 4000;
        let chars: Vec<Vec<i64>> = vec![
            vec![1, 0, 0, 0, 0],
            vec![0, 1, -1, 0, 0],
            vec![2, 0, 0, 1, 0],
        ];
        let mut sums = vec![Complex64::new(0.0, 0.0); chars.len()];
        for _ in 0..n {
            let c: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
            let field = DVector::from_column_slice(&g.d1().mul_vec_f64(&c).unwrap());
            let y = &g.coords * field;
            for (s, xi) in sums.iter_mut().zip(&chars) {
                let phase: f64 = xi.iter().zip(y.iter()).map(|(&k, v)| k as f64 * v).sum();
                *s += Complex64::from_polar(1.0, -2.0 * PI * phase);
            }
        }
        let sigma = 1.0 / (n as f64).sqrt(); // |w| = 1, so var ≤ 1 per part
        for (s, xi) in sums.iter().zip(&chars) {
            let mean = s / n as f64;
            assert!(
                mean.norm() <= 3.0 * 2.0f64.sqrt() * sigma,
                "character {xi:?} survives Haar pushforward: |mean| = {}",
                mean.norm()
            );
        }
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(GaugeComplexData::build(
            &LatticeBox::unit(1),
            &InnerProductSpec::Euclidean
        )
        .is_err());
        let not_spd = DMatrix::from_row_slice(1, 1, &[-2.0]);
        assert!(GaugeComplexData::build(
            &LatticeBox::unit(2),
            &InnerProductSpec::Explicit(not_spd)
        )
        .is_err());
        let wrong_size = DMatrix::identity(3, 3);
        assert!(GaugeComplexData::build(
            &LatticeBox::unit(2),
            &InnerProductSpec::Explicit(wrong_size)
        )
        .is_err());
    }

    #[test]
    fn scaled_inner_product_scales_norms() {
        let bx = LatticeBox::unit(3);
        let plain = GaugeComplexData::build(&bx, &InnerProductSpec::Euclidean).unwrap();
        let scaled = GaugeComplexData::build(
            &bx,
            &InnerProductSpec::Scaled { h: 0.5, power: -1 },
        )
        .unwrap();
        let p = Cell::new(vec![0, 0, 0], vec![0, 1]).unwrap();
        let (_, n_plain) = plain.wilson_character(&p).unwrap();
        let (_, n_scaled) = scaled.wilson_character(&p).unwrap();
        // gram doubles, dual norm halves
        assert!((n_scaled - 0.5 * n_plain).abs() < 1e-13);
    }
}
